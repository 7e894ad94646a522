"""Self-checks run by ``twophase-dnn check``: oracle residuals, AD against
finite differences, and the Monte-Carlo quadrature rate."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .experiments import fit_rate, mc_quadrature_errors
from .geometry import Geometry, SamplingPlan, generate_samples
from .jets import no_tape
from .network import LayerSpec, init_network
from .physics import Problem, boundary_initial_residual, exact_solution
from .training import (ExactEvaluator, LossWeights, assemble_loss, build_networks,
                       loss_and_gradient, prepare_loss_data)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def oracle_plan(n: int = 1000, seed: int = 0) -> SamplingPlan:
    """A plan with ``n`` points in every interior, interface, boundary and initial set."""
    return SamplingPlan((n, 1, 1), (n // 20, 4, 5), (n // 10, 10), (n, 1), seed=seed)


def oracle_residuals(problem: Problem, n: int = 1000, seed: int = 0, geometry=None):
    """Loss terms and worst residual component with exact fields in place of networks.

    Returns ``(LossBreakdown, {term: max |component|})``.
    """
    geom = geometry or Geometry()
    samples = generate_samples(geom, oracle_plan(n, seed))
    data = prepare_loss_data(problem, samples)
    ev = [ExactEvaluator(problem, 1), ExactEvaluator(problem, 2)]
    with no_tape():
        bd, res, _ = assemble_loss(problem, data, ev, LossWeights())
    worst = {t: r.max_abs() for t, r in res.items()}
    return bd, worst


def check_oracle(problem: Problem, n: int = 1000, seed: int = 0) -> CheckResult:
    bd, worst = oracle_residuals(problem, n, seed)
    ok = all(v < 1e-10 for v in bd.terms.values()) and all(v < 1e-9 for v in worst.values())
    return CheckResult(f"oracle zero residual ({problem.kind.value})", ok,
                       f"max loss term {max(bd.terms.values()):.2e}, max component {max(worst.values()):.2e}")


def jet_fd_error(widths=(3, 20, 20, 3), n_points: int = 100, h: float = 1e-4, seed: int = 0) -> float:
    """Worst relative error of network gradients/Hessians against central differences."""
    net = init_network(LayerSpec(widths), seed)
    rng = np.random.default_rng(seed + 1)
    P = np.column_stack([rng.uniform(0, 3, n_points), rng.uniform(0, 3, n_points), rng.uniform(0, 1, n_points)])
    with no_tape():
        jet = net.forward_jet(P)
    grad = jet.c[1:4]                                  # (3, B, out)
    hess = jet.c[[4, 5, 6, 5, 7, 8, 6, 8, 9]].reshape(3, 3, *jet.shape)
    fd_g = np.zeros_like(grad)
    fd_h = np.zeros_like(hess)
    base = net(P)
    for a in range(3):
        e = np.zeros(3)
        e[a] = h
        fp, fm = net(P + e), net(P - e)
        fd_g[a] = (fp - fm) / (2 * h)
        fd_h[a, a] = (fp - 2 * base + fm) / h ** 2
        for b in range(a + 1, 3):
            e2 = np.zeros(3)
            e2[b] = h
            v = (net(P + e + e2) - net(P + e - e2) - net(P - e + e2) + net(P - e - e2)) / (4 * h * h)
            fd_h[a, b] = fd_h[b, a] = v
    eg = np.abs(fd_g - grad).max() / max(np.abs(grad).max(), 1e-300)
    eh = np.abs(fd_h - hess).max() / max(np.abs(hess).max(), 1e-300)
    return float(max(eg, eh))


def loss_gradient_fd_error(problem: Problem | None = None, hidden=(5, 5), points: int = 10,
                           h: float = 1e-5, seed: int = 0) -> float:
    """Relative error of the tape gradient of the full loss against central differences."""
    problem = problem or Problem.two_phase(1, 1, 2, 3)
    k = max(1, int(round(points ** 0.5)))
    plan = SamplingPlan((points, 1, 1), (max(1, points // 20), 4, 5), (points, 1), (k, k), seed=seed)
    data = prepare_loss_data(problem, generate_samples(Geometry(), plan))
    nets = build_networks(problem, hidden, seed)
    theta = np.concatenate([n.params for n in nets])
    off = 0
    for n in nets:
        n.bind(theta[off:off + n.spec.n_params])
        off += n.spec.n_params
    w = LossWeights()
    _, g = loss_and_gradient(problem, data, nets, w)
    fd = np.zeros_like(theta)
    for i in range(theta.size):
        old = theta[i]
        theta[i] = old + h
        fp = assemble_loss(problem, data, nets, w)[0].total
        theta[i] = old - h
        fm = assemble_loss(problem, data, nets, w)[0].total
        theta[i] = old
        fd[i] = (fp - fm) / (2 * h)
    return float(np.abs(fd - g).max() / np.abs(g).max())


def check_ad() -> list[CheckResult]:
    e1 = jet_fd_error()
    e2 = loss_gradient_fd_error()
    return [CheckResult("network jets vs finite differences", e1 < 1e-5, f"rel. error {e1:.2e}"),
            CheckResult("loss gradient vs finite differences", e2 < 1e-5, f"rel. error {e2:.2e}")]


def check_mc_rate(seed: int = 0) -> CheckResult:
    sizes, errs = mc_quadrature_errors(seed=seed)
    alpha = fit_rate(sizes, errs)
    return CheckResult("Monte-Carlo quadrature rate", 0.35 <= alpha <= 0.65, f"alpha = {alpha:.3f}")


def check_boundary_initial(problem: Problem, n: int = 200, seed: int = 0) -> CheckResult:
    """Boundary/initial residuals of exact traces vanish (B2 checked without immersion)."""
    rng = np.random.default_rng(seed)
    P = np.column_stack([rng.uniform(0, 3, n), rng.uniform(0, 3, n), rng.uniform(0, 1, n)])
    worst = 0.0
    with no_tape():
        for term in ("B", "I"):
            for sub in (1, 2):
                ex = exact_solution(problem, sub, P)
                r = boundary_initial_residual(problem, term, sub, ex, ex, immersed=False)
                worst = max(worst, r.max_abs())
    return CheckResult(f"boundary/initial traces ({problem.kind.value})", worst < 1e-9, f"max {worst:.2e}")


def run_all(quick: bool = False) -> list[CheckResult]:
    problems = [Problem.two_phase(), Problem.two_phase(1, 1, 1000, 1000),
                Problem.fsi("fsi-wave"), Problem.fsi("fsi-parabolic")]
    out = [check_oracle(p, 200 if quick else 1000) for p in problems]
    out += [check_boundary_initial(p) for p in problems]
    out += check_ad()
    out.append(check_mc_rate())
    return out
