"""Error evaluation, parameter sweeps, rate fits, plots and loss diagnostics."""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .geometry import ON_INTERFACE_TOL, Geometry, SamplingPlan
from .jets import no_tape
from .network import Network
from .physics import FieldJets, Problem, ProblemKind, exact_solution
from .training import LossBreakdown, LossWeights, NumericalFailure, TrainConfig, train

log = logging.getLogger(__name__)

DEFAULT_GRID = (61, 61, 11)
CHUNK = 4096


def observation_points_default() -> list[tuple[float, float]]:
    """The disk centre plus four points at radius 0.5 on the diagonals."""
    c, r = 1.5, 0.5 * math.cos(math.pi / 4)
    return [(c + r, c + r), (c - r, c + r), (c - r, c - r), (c + r, c - r), (c, c)]


# -- error evaluation ----------------------------------------------------------

@dataclass
class ErrorReport:
    per_field: dict[str, float]
    combined: float
    loss: LossBreakdown | None = None
    wall_seconds: float = 0.0
    seed: int | None = None
    diagnostics: dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {"combined": self.combined, "per_field": dict(self.per_field),
               "diagnostics": dict(self.diagnostics),
               "wall_seconds": self.wall_seconds, "seed": self.seed}
        if self.loss is not None:
            out["loss_total"] = self.loss.total
            out["loss_terms"] = dict(self.loss.terms)
        return out


def evaluation_grid(geom: Geometry, resolution=DEFAULT_GRID) -> dict[int, np.ndarray]:
    """Grid points per subdomain; points on the interface are dropped."""
    nx, ny, nt = resolution
    x0, x1, y0, y1 = geom.box
    X, Y, T = np.meshgrid(np.linspace(x0, x1, nx), np.linspace(y0, y1, ny),
                          np.linspace(0.0, geom.t_end, nt), indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), T.ravel()])
    lv = geom.level(pts[:, 0], pts[:, 1])
    keep = np.abs(lv) >= ON_INTERFACE_TOL
    return {1: pts[keep & (lv > 0)], 2: pts[keep & (lv < 0)]}


def _predicted_fields(net, problem: Problem, sub: int, pts: np.ndarray) -> dict[str, np.ndarray]:
    names = problem.field_names(sub)
    need_dt = problem.kind is ProblemKind.FSI_WAVE and sub == 2
    out = {n: [] for n in names}
    if need_dt:
        out["vs_x"], out["vs_y"] = [], []
    for a in range(0, len(pts), CHUNK):
        chunk = pts[a:a + CHUNK]
        if need_dt:
            with no_tape():
                jet = net.forward_jet(chunk)
            c = jet.c
            for k, n in enumerate(names):
                out[n].append(c[0, :, k])
            out["vs_x"].append(c[3, :, 0])
            out["vs_y"].append(c[3, :, 1])
        elif isinstance(net, Network):
            vals = net(chunk)
            for k, n in enumerate(names):
                out[n].append(vals[:, k])
        else:
            with no_tape():
                c = net.forward_jet(chunk).c
            for k, n in enumerate(names):
                out[n].append(c[0, :, k])
    return {k: np.concatenate(v) if v else np.zeros(0) for k, v in out.items()}


def _exact_fields(problem: Problem, sub: int, pts: np.ndarray) -> dict[str, np.ndarray]:
    out: dict[str, list] = {}
    for a in range(0, len(pts), CHUNK):
        f = exact_solution(problem, sub, pts[a:a + CHUNK])
        for n in f.names():
            out.setdefault(n, []).append(f[n].value)
        if problem.kind is ProblemKind.FSI_WAVE and sub == 2:
            out.setdefault("vs_x", []).append(f["u_x"].grad[2])
            out.setdefault("vs_y", []).append(f["u_y"].grad[2])
    return {k: np.concatenate(v) for k, v in out.items()}


def field_errors(problem: Problem, predicted: dict[int, dict], exact: dict[int, dict]):
    """Relative L2 per field (pooled over subdomains) and the combined error."""
    num: dict[str, float] = {}
    den: dict[str, float] = {}
    for sub in (1, 2):
        for name, ex in exact[sub].items():
            e = predicted[sub][name] - ex
            num[name] = num.get(name, 0.0) + float(np.dot(e, e))
            den[name] = den.get(name, 0.0) + float(np.dot(ex, ex))
    per = {n: math.sqrt(num[n] / den[n]) if den[n] > 0 else math.sqrt(num[n]) for n in num}
    total_den = sum(den.values())
    combined = math.sqrt(sum(num.values()) / total_den) if total_den > 0 else math.sqrt(sum(num.values()))
    return per, combined


def pressure_gauge_error(grid: dict[int, np.ndarray], predicted: dict[int, dict], exact: dict[int, dict]) -> float:
    """Relative pressure error after removing the best constant offset at each time level.

    The loss only sees pressure gradients and pressure jumps, so a spatially
    constant c(t) added to every fluid pressure is invisible to it; this
    measures the error that training can actually control.
    """
    subs = [s for s in (1, 2) if "p" in exact[s]]
    if not subs:
        return math.nan
    t = np.concatenate([grid[s][:, 2] for s in subs])
    d = np.concatenate([predicted[s]["p"] - exact[s]["p"] for s in subs])
    ex = np.concatenate([exact[s]["p"] for s in subs])
    levels, inv = np.unique(t, return_inverse=True)
    offset = np.bincount(inv, weights=d) / np.bincount(inv)
    d = d - offset[inv]
    den = float(np.dot(ex, ex))
    return math.sqrt(float(np.dot(d, d)) / den) if den > 0 else math.sqrt(float(np.dot(d, d)))


def evaluate_error(nets, problem: Problem, resolution=DEFAULT_GRID, geometry: Geometry | None = None,
                   loss: LossBreakdown | None = None, seed=None, wall_seconds: float = 0.0) -> ErrorReport:
    """Compare ``nets`` with the exact solution on a uniform space-time grid.

    FSI-wave reports the structural velocity as the time derivative of the
    displacement network so all FSI runs share the same field set.
    """
    geom = geometry or Geometry()
    grid = evaluation_grid(geom, resolution)
    pred = {s: _predicted_fields(nets[s - 1], problem, s, grid[s]) for s in (1, 2)}
    exact = {s: _exact_fields(problem, s, grid[s]) for s in (1, 2)}
    per, combined = field_errors(problem, pred, exact)
    diag = {"p_gauge_free": pressure_gauge_error(grid, pred, exact)}
    return ErrorReport(per, combined, loss, wall_seconds, seed, diag)


def write_snapshot(nets, problem: Problem, t: float, path, n: int = 61, geometry: Geometry | None = None):
    """Predicted and exact fields on an ``n x n`` grid at time ``t`` as CSV."""
    geom = geometry or Geometry()
    x0, x1, y0, y1 = geom.box
    X, Y = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n), indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), np.full(X.size, float(t))])
    lv = geom.level(pts[:, 0], pts[:, 1])
    rows = []
    names = sorted(set(problem.field_names(1)) | set(problem.field_names(2)))
    for sub, mask in ((1, lv > ON_INTERFACE_TOL), (2, lv < -ON_INTERFACE_TOL)):
        P = pts[mask]
        if not len(P):
            continue
        pred = _predicted_fields(nets[sub - 1], problem, sub, P)
        ex = _exact_fields(problem, sub, P)
        for i in range(len(P)):
            row = [P[i, 0], P[i, 1], P[i, 2], sub]
            for nm in names:
                row += [pred[nm][i], ex[nm][i]] if nm in ex else [math.nan, math.nan]
            rows.append(row)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "t", "subdomain"] + [f"{p}{nm}" for nm in names for p in ("", "exact_")])
        w.writerows(rows)


# -- sweeps -------------------------------------------------------------------

SWEEP_COLUMNS = ("problem", "rho2_or_rhos", "mu2_or_E", "M_L", "M_B", "M_Gamma", "M_I", "seed",
                 "approx_error", "loss_error", "wall_seconds")


@dataclass
class SweepRow:
    problem: str
    rho2_or_rhos: float
    mu2_or_E: float
    M_L: int
    M_B: int
    M_Gamma: int
    M_I: int
    seed: int
    approx_error: float
    loss_error: float
    wall_seconds: float

    def same_as(self, other: "SweepRow") -> bool:
        """Equality that treats NaN as equal to NaN."""
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, float) and math.isnan(a):
                if not (isinstance(b, float) and math.isnan(b)):
                    return False
            elif a != b:
                return False
        return True


def table_plans(rows=None) -> list[SamplingPlan]:
    """The twelve sampling plans shared by all result tables."""
    plans = []
    for n, nt in ((10, 5), (20, 10), (40, 20)):
        for k in (4, 8, 16, 32):
            plans.append(SamplingPlan((n, n, nt), (k, 4, nt), (k, nt), (k, k)))
    if rows is not None:
        plans = [plans[i] for i in rows]
    return plans


TABLES = {
    "table1": lambda: Problem.two_phase(1, 1, 1, 1),
    "table2": lambda: Problem.two_phase(1, 1, 10, 10),
    "table3": lambda: Problem.two_phase(1, 1, 100, 100),
    "table4": lambda: Problem.two_phase(1, 1, 1000, 1000),
    "table5": lambda: Problem.two_phase(1, 1, 1000, 1000),
    "table6": lambda: Problem.fsi("fsi-wave"),
    "table7": lambda: Problem.fsi("fsi-parabolic"),
}
TABLES_WITH_OBSERVATIONS = {"table5"}


@dataclass
class SweepSpec:
    problem: Problem
    plans: list[SamplingPlan]
    seeds: list[int] = field(default_factory=lambda: [0])
    hidden: tuple[int, ...] = (50, 50, 50)
    train: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=5000))
    weights: LossWeights | None = None
    observation: tuple[tuple[float, float], ...] = ()
    resolution: tuple[int, int, int] = DEFAULT_GRID

    def __post_init__(self):
        if not self.plans or not self.seeds:
            raise ValueError("a sweep needs at least one plan and one seed")

    @classmethod
    def for_table(cls, name: str, rows=None, **kw) -> "SweepSpec":
        if name not in TABLES:
            raise ValueError(f"unknown table {name!r}; known: {', '.join(TABLES)}")
        obs = tuple(observation_points_default()) if name in TABLES_WITH_OBSERVATIONS else ()
        kw.setdefault("observation", obs)
        return cls(TABLES[name](), table_plans(rows), **kw)


def _param_columns(problem: Problem) -> tuple[float, float]:
    if problem.is_fsi:
        return problem.sub2.rho_s, problem.sub2.E
    return problem.sub2.rho, problem.sub2.mu


def run_one(problem: Problem, plan: SamplingPlan, seed: int, hidden=(50, 50, 50),
            config: TrainConfig | None = None, weights=None, resolution=DEFAULT_GRID, **train_kw):
    """Train with ``seed`` (networks and samples) and evaluate; returns (TrainResult, ErrorReport)."""
    config = replace(config or TrainConfig(), seed=seed)
    plan = replace(plan, seed=seed)
    t0 = time.perf_counter()
    result = train(problem, plan, hidden, config, weights, **train_kw)
    wall = time.perf_counter() - t0
    report = evaluate_error(result.nets, problem, resolution, loss=result.final, seed=seed, wall_seconds=wall)
    return result, report


def run_sweep(spec: SweepSpec, csv_path=None, progress=None) -> list[SweepRow]:
    """One row per (plan, seed); a failed run records NaN errors and the sweep continues."""
    rows = []
    a, b = _param_columns(spec.problem)
    for plan in spec.plans:
        if spec.observation:
            plan = replace(plan, observation=spec.observation)
        for seed in spec.seeds:
            t0 = time.perf_counter()
            try:
                _, rep = run_one(spec.problem, plan, seed, spec.hidden, spec.train, spec.weights, spec.resolution)
                approx, loss = rep.combined, rep.loss.total
            except (NumericalFailure, OverflowError, ArithmeticError) as exc:
                log.error("sweep row failed (plan %s, seed %d): %s", plan.label(), seed, exc)
                approx = loss = math.nan
            row = SweepRow(spec.problem.kind.value, float(a), float(b), plan.M_L, plan.M_B, plan.M_Gamma,
                           plan.M_I, int(seed), float(approx), float(loss), time.perf_counter() - t0)
            rows.append(row)
            if progress is not None:
                progress(row)
            if csv_path is not None:
                write_sweep_csv(csv_path, rows)
    return rows


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def sweep_csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in SWEEP_COLUMNS])
    return buf.getvalue()


def write_sweep_csv(path, rows) -> None:
    Path(path).write_text(sweep_csv_text(rows), encoding="utf-8", newline="\n")


def read_sweep_csv(path) -> list[SweepRow]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SWEEP_COLUMNS:
            raise ValueError(f"{path}: unexpected sweep header {reader.fieldnames}")
        out = []
        for rec in reader:
            kw = {}
            for f in fields(SweepRow):
                v = rec[f.name]
                kw[f.name] = int(v) if f.type in ("int", int) else (v if f.type in ("str", str) else float(v))
            out.append(SweepRow(**kw))
    return out


# -- rates and plots ----------------------------------------------------------

def fit_rate(sizes, errors) -> float:
    """Negated least-squares slope of log(error) against log(M)."""
    M = np.asarray(sizes, dtype=float)
    e = np.asarray(errors, dtype=float)
    if M.shape != e.shape or M.size < 3:
        raise ValueError("fit_rate needs at least three (size, error) pairs")
    if np.any(M <= 0) or np.any(e <= 0) or not (np.isfinite(M).all() and np.isfinite(e).all()):
        raise ValueError("fit_rate needs positive finite sizes and errors")
    slope = np.polyfit(np.log(M), np.log(e), 1)[0]
    return float(-slope)


def smooth_test_function(x, y):
    return np.sin(2 * x) * np.cos(y) + 0.5 * np.exp(-((x - 1.5) ** 2 + (y - 1.5) ** 2))


def disk_mean_reference(geom: Geometry, fn=smooth_test_function, n: int = 64) -> float:
    """Mean of ``fn**2`` over the disk by polar Gauss-Legendre quadrature."""
    r_nodes, r_w = np.polynomial.legendre.leggauss(n)
    r = 0.5 * geom.radius * (r_nodes + 1)
    wr = 0.5 * geom.radius * r_w
    th = 2 * np.pi * (np.arange(4 * n) + 0.5) / (4 * n)  # periodic: midpoint rule is spectral
    R, TH = np.meshgrid(r, th, indexing="ij")
    vals = fn(geom.center[0] + R * np.cos(TH), geom.center[1] + R * np.sin(TH)) ** 2
    integral = float(np.sum(wr[:, None] * R * vals) * (2 * np.pi / (4 * n)))
    return integral / (np.pi * geom.radius ** 2)


def mc_quadrature_errors(sizes=(100, 1000, 10000, 100000), repeats: int = 20, seed: int = 0,
                         geometry: Geometry | None = None, fn=smooth_test_function):
    """Mean absolute error of the Monte-Carlo mean of ``fn**2`` over disk samples."""
    from .geometry import sample_interior
    geom = geometry or Geometry()
    ref = disk_mean_reference(geom, fn)
    rng = np.random.default_rng(seed)
    errs = []
    for M in sizes:
        e = 0.0
        for _ in range(repeats):
            P = sample_interior(geom, rng, int(M), 2)
            e += abs(float(np.mean(fn(P[:, 0], P[:, 1]) ** 2)) - ref)
        errs.append(e / repeats)
    return list(sizes), errs


def plot_x(row: SweepRow) -> int:
    """Total boundary, interface and initial points of a row."""
    return row.M_B + row.M_Gamma + 2 * row.M_I


def emit_plot(rows, path, reference_slope: float = 0.25, title: str | None = None) -> None:
    """Log-log scatter of approximation error per M_L group with a reference line (SVG)."""
    rows = [r for r in rows if math.isfinite(r.approx_error) and r.approx_error > 0]
    if not rows:
        raise ValueError("nothing to plot: no rows with a finite positive error")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.fonttype"] = "none"
    plt.rcParams["svg.hashsalt"] = "twophase-dnn"
    fig, ax = plt.subplots(figsize=(6, 4.5))
    groups: dict[int, list[SweepRow]] = {}
    for r in rows:
        groups.setdefault(r.M_L, []).append(r)
    markers = "osd^v<>"
    for i, (ml, grp) in enumerate(sorted(groups.items())):
        by_x: dict[int, list[float]] = {}
        for r in grp:
            by_x.setdefault(plot_x(r), []).append(r.approx_error)
        xs = sorted(by_x)
        ys = [float(np.median(by_x[x])) for x in xs]
        ax.loglog(xs, ys, marker=markers[i % len(markers)], label=f"M_L = {ml}")
    xs_all = np.array(sorted({plot_x(r) for r in rows}), dtype=float)
    x0 = xs_all[0]
    y0 = float(np.median([r.approx_error for r in rows if plot_x(r) == x0]))
    xr = np.array([xs_all[0], xs_all[-1] if xs_all[-1] > x0 else 2 * x0])
    ax.loglog(xr, y0 * (xr / x0) ** (-reference_slope), "k--", label=f"slope -{reference_slope:g}")
    ax.set_xlabel("boundary + interface + initial points")
    ax.set_ylabel("approximation error")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# -- diagnostics --------------------------------------------------------------

@dataclass
class BoundTerm:
    term: str
    loss: float
    points: int
    quadrature: float


def error_bound_terms(breakdown: LossBreakdown, plan: SamplingPlan, alpha: float = 0.5) -> list[BoundTerm]:
    """Loss term next to its ``M^-alpha`` quadrature proxy, per term."""
    counts = {"L1": plan.M_L, "L2": plan.M_L, "G": plan.M_Gamma, "B1": plan.M_B,
              "I1": plan.M_I, "I2": plan.M_I}
    out = []
    for term, m in counts.items():
        if term in breakdown.terms and m > 0:
            out.append(BoundTerm(term, breakdown.terms[term], m, m ** (-alpha)))
    return out


def format_bound_terms(terms) -> str:
    lines = [f"{'term':<5}{'F_term':>13}{'M':>8}{'M^-alpha':>12}"]
    for t in terms:
        lines.append(f"{t.term:<5}{t.loss:>13.4e}{t.points:>8d}{t.quadrature:>12.4e}")
    return "\n".join(lines)
