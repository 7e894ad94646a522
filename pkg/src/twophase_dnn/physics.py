"""Operators, residuals and manufactured solutions for the three interface problems.

Residuals are returned as named scalar components (one :class:`Var` per
component, batched over points).  Physical prefactors are folded in as square
roots, so the sum of squared components at a point equals the integrand of
the corresponding least-squares term, e.g. ``sqrt(rho) * (v - v0)`` for a
density-weighted initial condition.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .jets import Jet, JetOverflowError, Var, cos, exp, input_jets, no_tape, sin

SQRT2 = math.sqrt(2.0)


class ProblemKind(enum.Enum):
    TWO_PHASE = "two-phase"
    FSI_WAVE = "fsi-wave"
    FSI_PARABOLIC = "fsi-parabolic"

    @classmethod
    def parse(cls, text) -> "ProblemKind":
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("_", "-")
        aliases = {"twophase": "two-phase", "two-phase-flow": "two-phase",
                   "fsi-parabolic-like": "fsi-parabolic"}
        key = aliases.get(key, key)
        for k in cls:
            if k.value == key:
                return k
        raise ValueError(f"unknown problem kind {text!r}; expected one of "
                         + ", ".join(k.value for k in cls))


FLUID_FIELDS = ("v_x", "v_y", "p")
FIELD_NAMES = {
    ProblemKind.TWO_PHASE: (FLUID_FIELDS, FLUID_FIELDS),
    ProblemKind.FSI_WAVE: (FLUID_FIELDS, ("u_x", "u_y")),
    ProblemKind.FSI_PARABOLIC: (FLUID_FIELDS, ("u_x", "u_y", "vs_x", "vs_y")),
}


def output_layout(kind) -> tuple[int, int]:
    """Per-subdomain network output widths."""
    names = FIELD_NAMES[ProblemKind.parse(kind)]
    return len(names[0]), len(names[1])


@dataclass(frozen=True)
class FluidParams:
    rho: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        if not (self.rho > 0 and self.mu > 0):
            raise ValueError(f"fluid density and viscosity must be positive, got rho={self.rho}, mu={self.mu}")


@dataclass(frozen=True)
class StructParams:
    rho_s: float = 1e3
    E: float = 1e6
    nu: float = 0.3

    def __post_init__(self):
        if not (self.rho_s > 0 and self.E > 0):
            raise ValueError("structural density and Young's modulus must be positive")
        if not 0 < self.nu < 0.5:
            raise ValueError(f"Poisson ratio must lie in (0, 0.5), got {self.nu}")

    @property
    def mu_s(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def lambda_s(self) -> float:
        return self.E * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))


@dataclass(frozen=True)
class Problem:
    """A problem kind with its parameters and solution/loss options.

    ``theory_terms`` keeps the two structural terms that stem from the error
    analysis rather than the model equations (wave form: initial strain
    energy and boundary velocity trace; parabolic form: initial strain
    energy and the strain energy of the compatibility residual).
    """

    kind: ProblemKind
    sub1: FluidParams = field(default_factory=FluidParams)
    sub2: FluidParams | StructParams = field(default_factory=FluidParams)
    paper_literal_solution: bool = False
    theory_terms: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", ProblemKind.parse(self.kind))
        if not isinstance(self.sub1, FluidParams):
            raise TypeError("subdomain 1 is always a fluid")
        want = FluidParams if self.kind is ProblemKind.TWO_PHASE else StructParams
        if not isinstance(self.sub2, want):
            raise TypeError(f"{self.kind.value} needs {want.__name__} in subdomain 2")
        if self.paper_literal_solution and self.kind is not ProblemKind.TWO_PHASE:
            raise ValueError("paper_literal_solution applies to the two-phase problem only")

    @classmethod
    def two_phase(cls, rho1=1.0, mu1=1.0, rho2=1.0, mu2=1.0, **kw) -> "Problem":
        return cls(ProblemKind.TWO_PHASE, FluidParams(rho1, mu1), FluidParams(rho2, mu2), **kw)

    @classmethod
    def fsi(cls, kind="fsi-parabolic", rho_f=1.0, mu_f=1.0, rho_s=1e3, E=1e6, nu=0.3, **kw) -> "Problem":
        return cls(ProblemKind.parse(kind), FluidParams(rho_f, mu_f), StructParams(rho_s, E, nu), **kw)

    @property
    def is_fsi(self) -> bool:
        return self.kind is not ProblemKind.TWO_PHASE

    def field_names(self, sub: int) -> tuple[str, ...]:
        return FIELD_NAMES[self.kind][sub - 1]


# -- field containers --------------------------------------------------------

class FieldJets:
    """Named jets for one subdomain, each batched over the same points."""

    def __init__(self, jets: dict[str, Jet]):
        self.jets = dict(jets)

    @classmethod
    def from_output(cls, out: Jet, names) -> "FieldJets":
        """Split a network output jet of shape ``(B, n_out)`` by column."""
        if out.shape[-1] != len(names):
            raise ValueError(f"output width {out.shape[-1]} does not match fields {names}")
        return cls({n: out[..., k] for k, n in enumerate(names)})

    def __getitem__(self, name) -> Jet:
        try:
            return self.jets[name]
        except KeyError:
            raise ValueError(f"field {name!r} missing; have {sorted(self.jets)}") from None

    def __contains__(self, name):
        return name in self.jets

    def names(self):
        return tuple(self.jets)

    def take(self, index) -> "FieldJets":
        return FieldJets({k: j[index] for k, j in self.jets.items()})

    def values(self) -> dict[str, np.ndarray]:
        return {k: j.value for k, j in self.jets.items()}


@dataclass
class ResidualVector:
    """Named residual components of one loss term, batched over points."""

    term: str
    components: dict[str, Var]

    def __post_init__(self):
        for name, v in self.components.items():
            if not np.isfinite(v.a).all():
                raise JetOverflowError(f"non-finite residual component {self.term}:{name}")

    def names(self):
        return tuple(self.components)

    def __getitem__(self, name) -> np.ndarray:
        return self.components[name].a

    def square_sum(self, names=None) -> np.ndarray:
        """Per-point sum of squares over ``names`` (default: all)."""
        names = self.names() if names is None else names
        return sum(self.components[n].a ** 2 for n in names)

    def group_square_sum(self, prefix: str) -> np.ndarray:
        return self.square_sum([n for n in self.names() if n.startswith(prefix)])

    def square_sum_var(self) -> Var:
        """Recorded per-point sum of squares (for loss assembly)."""
        acc = None
        for v in self.components.values():
            sq = v.square()
            acc = sq if acc is None else acc + sq
        return acc

    def max_abs(self) -> float:
        return max((float(np.max(np.abs(v.a), initial=0.0)) for v in self.components.values()), default=0.0)


# -- stresses ----------------------------------------------------------------

def fluid_stress(fields: FieldJets, mu: float):
    """``-p I + 2 mu D(v)`` as a nested 2x2 list of first-order jets."""
    vx, vy, p = fields["v_x"], fields["v_y"], fields["p"]
    sxx = 2.0 * mu * vx.partial("x") - p
    syy = 2.0 * mu * vy.partial("y") - p
    sxy = mu * (vx.partial("y") + vy.partial("x"))
    return [[sxx, sxy], [sxy, syy]]


def solid_stress(fields: FieldJets, mu_s: float, lambda_s: float):
    """``2 mu_s eps(u) + lambda_s tr(eps(u)) I`` as a nested 2x2 list of jets."""
    exx = fields["u_x"].partial("x")
    eyy = fields["u_y"].partial("y")
    div = exx + eyy
    sxx = 2.0 * mu_s * exx + lambda_s * div
    syy = 2.0 * mu_s * eyy + lambda_s * div
    sxy = mu_s * (fields["u_x"].partial("y") + fields["u_y"].partial("x"))
    return [[sxx, sxy], [sxy, syy]]


def _stress(problem: Problem, sub: int, fields: FieldJets):
    if sub == 1 or not problem.is_fsi:
        prm = problem.sub1 if sub == 1 else problem.sub2
        return fluid_stress(fields, prm.mu)
    s = problem.sub2
    return solid_stress(fields, s.mu_s, s.lambda_s)


def _div_stress(sig):
    return (sig[0][0].d("x") + sig[0][1].d("y"),
            sig[1][0].d("x") + sig[1][1].d("y"))


def _strain_components(ux: Jet, uy: Jet, mu: float, lam: float, tag: str) -> dict[str, Var]:
    """Components whose squares sum to ``2 mu |eps(u)|^2 + lam |div u|^2``."""
    exx, eyy = ux.d("x"), uy.d("y")
    exy = 0.5 * (ux.d("y") + uy.d("x"))
    a, b = math.sqrt(2.0 * mu), math.sqrt(lam)
    return {
        f"{tag}-strain-xx": a * exx,
        f"{tag}-strain-xy": (a * SQRT2) * exy,
        f"{tag}-strain-yy": a * eyy,
        f"{tag}-strain-div": b * (exx + eyy),
    }


def _strain_rate_components(u: tuple[Jet, Jet], v: tuple[Jet, Jet], mu, lam, tag) -> dict[str, Var]:
    """As :func:`_strain_components` for ``w = du/dt - v`` without forming ``w``."""
    ux, uy = u
    vx, vy = v
    wxx = ux.dd("x", "t") - vx.d("x")
    wyy = uy.dd("y", "t") - vy.d("y")
    wxy = 0.5 * ((ux.dd("y", "t") - vx.d("y")) + (uy.dd("x", "t") - vy.d("x")))
    a, b = math.sqrt(2.0 * mu), math.sqrt(lam)
    return {
        f"{tag}-strain-xx": a * wxx,
        f"{tag}-strain-xy": (a * SQRT2) * wxy,
        f"{tag}-strain-yy": a * wyy,
        f"{tag}-strain-div": b * (wxx + wyy),
    }


def _as_pair(g, n):
    if g is None:
        return np.zeros(n), np.zeros(n)
    g = np.asarray(g, dtype=float)
    if g.ndim == 1 and g.shape == (2,):
        return np.full(n, g[0]), np.full(n, g[1])
    return g[..., 0], g[..., 1]


def _npoints(fields: FieldJets) -> int:
    j = next(iter(fields.jets.values()))
    return j.shape[0] if j.shape else 1


# -- residuals ---------------------------------------------------------------

def pde_residual(problem: Problem, sub: int, fields: FieldJets, forcing=None) -> ResidualVector:
    """Interior residual of subdomain ``sub``; ``forcing`` is ``(B, 2)`` or None."""
    fx, fy = _as_pair(forcing, _npoints(fields))
    if sub == 1 or not problem.is_fsi:
        prm = problem.sub1 if sub == 1 else problem.sub2
        vx, vy = fields["v_x"], fields["v_y"]
        sig = fluid_stress(fields, prm.mu)
        dsx, dsy = _div_stress(sig)
        vxv, vyv = vx.val, vy.val
        ax = vx.d("t") + vxv * vx.d("x") + vyv * vx.d("y")
        ay = vy.d("t") + vxv * vy.d("x") + vyv * vy.d("y")
        comps = {
            "momentum-x": prm.rho * ax - dsx - fx,
            "momentum-y": prm.rho * ay - dsy - fy,
            "divergence": vx.d("x") + vy.d("y"),
        }
        return ResidualVector(f"L{sub}", comps)

    s = problem.sub2
    ux, uy = fields["u_x"], fields["u_y"]
    dsx, dsy = _div_stress(solid_stress(fields, s.mu_s, s.lambda_s))
    if problem.kind is ProblemKind.FSI_WAVE:
        comps = {
            "solid-x": s.rho_s * ux.dd("t", "t") - dsx - fx,
            "solid-y": s.rho_s * uy.dd("t", "t") - dsy - fy,
        }
        return ResidualVector("L2", comps)

    vsx, vsy = fields["vs_x"], fields["vs_y"]
    comps = {
        "solid-x": s.rho_s * vsx.d("t") - dsx - fx,
        "solid-y": s.rho_s * vsy.d("t") - dsy - fy,
    }
    if problem.theory_terms:
        comps.update(_strain_rate_components((ux, uy), (vsx, vsy), s.mu_s, s.lambda_s, "compatibility"))
    comps["compatibility-x"] = ux.d("t") - vsx.val
    comps["compatibility-y"] = uy.d("t") - vsy.val
    return ResidualVector("L2", comps)


def _check_normal(n1) -> np.ndarray:
    n1 = np.atleast_2d(np.asarray(n1, dtype=float))
    if np.any(np.abs(np.hypot(n1[:, 0], n1[:, 1]) - 1.0) > 1e-9):
        raise ValueError("interface normal must have unit length")
    return n1


def interface_residual(problem: Problem, fields1: FieldJets, fields2: FieldJets,
                       n1, g1=None, g2=None) -> ResidualVector:
    """Kinematic and dynamic interface residuals; ``n1`` points into subdomain 2."""
    n1 = _check_normal(n1)
    n = _npoints(fields1)
    g1x, g1y = _as_pair(g1, n)
    g2x, g2y = _as_pair(g2, n)
    v1 = (fields1["v_x"].val, fields1["v_y"].val)
    if problem.kind is ProblemKind.TWO_PHASE:
        v2 = (fields2["v_x"].val, fields2["v_y"].val)
    elif problem.kind is ProblemKind.FSI_WAVE:
        v2 = (fields2["u_x"].d("t"), fields2["u_y"].d("t"))
    else:
        v2 = (fields2["vs_x"].val, fields2["vs_y"].val)
    s1 = _stress(problem, 1, fields1)
    s2 = _stress(problem, 2, fields2)
    nx, ny = n1[:, 0], n1[:, 1]
    # sigma_1 n_1 + sigma_2 n_2 with n_2 = -n_1
    tx = (s1[0][0].val - s2[0][0].val) * nx + (s1[0][1].val - s2[0][1].val) * ny
    ty = (s1[1][0].val - s2[1][0].val) * nx + (s1[1][1].val - s2[1][1].val) * ny
    comps = {
        "kinematic-x": v1[0] - v2[0] - g1x,
        "kinematic-y": v1[1] - v2[1] - g1y,
        "dynamic-x": tx - g2x,
        "dynamic-y": ty - g2y,
    }
    return ResidualVector("G", comps)


def boundary_initial_residual(problem: Problem, term: str, sub: int, fields: FieldJets,
                              data: FieldJets, immersed: bool = True) -> ResidualVector:
    """Boundary (``term='B'``) or initial (``term='I'``) residual against exact traces.

    ``data`` holds the exact fields at the same points (off-tape jets, so
    derivative traces such as ``du/dt`` or ``eps(u0)`` are available).
    """
    if term not in ("B", "I"):
        raise ValueError(f"term must be 'B' or 'I', got {term!r}")
    if sub not in (1, 2):
        raise ValueError(f"subdomain must be 1 or 2, got {sub!r}")
    label = f"{term}{sub}"
    fluid = sub == 1 or not problem.is_fsi

    if term == "B":
        if sub == 2 and immersed:
            raise ValueError("B2 is inactive: subdomain 2 has no outer boundary in the immersed geometry")
        if fluid:
            return ResidualVector(label, {
                "boundary-x": fields["v_x"].val - data["v_x"].value,
                "boundary-y": fields["v_y"].val - data["v_y"].value,
            })
        if problem.kind is ProblemKind.FSI_WAVE:
            comps = {}
            if problem.theory_terms:
                comps["boundary-velocity-x"] = fields["u_x"].d("t") - data["u_x"].grad[2]
                comps["boundary-velocity-y"] = fields["u_y"].d("t") - data["u_y"].grad[2]
            comps["boundary-x"] = fields["u_x"].val - data["u_x"].value
            comps["boundary-y"] = fields["u_y"].val - data["u_y"].value
            return ResidualVector(label, comps)
        return ResidualVector(label, {
            "boundary-x": fields["vs_x"].val - data["vs_x"].value,
            "boundary-y": fields["vs_y"].val - data["vs_y"].value,
        })

    if fluid:
        prm = problem.sub1 if sub == 1 else problem.sub2
        r = math.sqrt(prm.rho)
        return ResidualVector(label, {
            "initial-x": r * (fields["v_x"].val - data["v_x"].value),
            "initial-y": r * (fields["v_y"].val - data["v_y"].value),
        })

    s = problem.sub2
    r = math.sqrt(s.rho_s)
    if problem.kind is ProblemKind.FSI_WAVE:
        comps = {
            "initial-velocity-x": r * (fields["u_x"].d("t") - data["u_x"].grad[2]),
            "initial-velocity-y": r * (fields["u_y"].d("t") - data["u_y"].grad[2]),
        }
    else:
        comps = {
            "initial-velocity-x": r * (fields["vs_x"].val - data["vs_x"].value),
            "initial-velocity-y": r * (fields["vs_y"].val - data["vs_y"].value),
        }
    if problem.theory_terms:
        du = (fields["u_x"] - data["u_x"], fields["u_y"] - data["u_y"])
        comps.update(_strain_components(du[0], du[1], s.mu_s, s.lambda_s, "initial"))
    comps["initial-displacement-x"] = fields["u_x"].val - data["u_x"].value
    comps["initial-displacement-y"] = fields["u_y"].val - data["u_y"].value
    return ResidualVector(label, comps)


# -- manufactured solutions ----------------------------------------------------

def exact_solution(problem: Problem, sub: int, points) -> FieldJets:
    """Closed-form exact fields as jets at ``points`` (shape (B, 3) or (3,))."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    with no_tape():
        X = input_jets(pts)
        x, y, t = X[:, 0], X[:, 1], X[:, 2]
        if problem.kind is ProblemKind.TWO_PHASE:
            if sub == 1:
                et = exp(t)
                sx, cx, sy, cy = sin(x), cos(x), sin(y), cos(y)
                vy = et * cx * sy
                if not problem.paper_literal_solution:
                    vy = -vy
                return FieldJets({"v_x": et * sx * cy, "v_y": vy, "p": et * sx * sy})
            ct = cos(t)
            return FieldJets({
                "v_x": ct * cos(x) * cos(y),
                "v_y": ct * sin(x) * sin(y),
                "p": ct * cos(x + y),
            })
        if sub == 1:
            et = exp(t)
            sx, cx, sy, cy = sin(x), cos(x), sin(y), cos(y)
            return FieldJets({"v_x": et * sx * cy, "v_y": -(et * cx * sy), "p": et * sx * sy})
        st, ct = sin(t), cos(t)
        cxcy = cos(x) * cos(y)
        sxsy = sin(x) * sin(y)
        out = {"u_x": ct * cxcy, "u_y": st * sxsy}
        if problem.kind is ProblemKind.FSI_PARABOLIC:
            out["vs_x"] = -(st * cxcy)
            out["vs_y"] = ct * sxsy
        return FieldJets(out)


@dataclass
class SynthesizedData:
    """Right-hand sides that make the exact fields solve the discrete system."""

    forcing1: np.ndarray
    forcing2: np.ndarray
    g1: np.ndarray
    g2: np.ndarray


def forcing(problem: Problem, sub: int, points) -> np.ndarray:
    """Momentum forcing ``(B, 2)``: the operator applied to the exact fields."""
    with no_tape():
        r = pde_residual(problem, sub, exact_solution(problem, sub, points))
    keys = ("momentum-x", "momentum-y") if (sub == 1 or not problem.is_fsi) else ("solid-x", "solid-y")
    return np.column_stack([r[keys[0]], r[keys[1]]])


def interface_data(problem: Problem, points, n1) -> tuple[np.ndarray, np.ndarray]:
    """Interface jumps ``(g1, g2)``, each ``(B, 2)``, of the exact fields."""
    with no_tape():
        r = interface_residual(problem, exact_solution(problem, 1, points),
                               exact_solution(problem, 2, points), n1)
    g1 = np.column_stack([r["kinematic-x"], r["kinematic-y"]])
    g2 = np.column_stack([r["dynamic-x"], r["dynamic-y"]])
    return g1, g2


def synthesize_data(problem: Problem, interior1, interior2, interface_pts, normals) -> SynthesizedData:
    g1, g2 = interface_data(problem, interface_pts, normals)
    return SynthesizedData(forcing(problem, 1, interior1), forcing(problem, 2, interior2), g1, g2)


def divergence_misfit(problem: Problem, sub: int, points) -> float:
    """RMS of ``div v`` of the exact velocity (nonzero for the literal two-phase v1)."""
    if problem.is_fsi and sub == 2:
        return 0.0
    f = exact_solution(problem, sub, points)
    d = f["v_x"].grad[0] + f["v_y"].grad[1]
    return float(np.sqrt(np.mean(d ** 2)))
