"""Discrete least-squares loss, Adam, and the training loop."""
from __future__ import annotations

import contextlib
import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import Geometry, SampleSet, SamplingPlan, generate_samples
from .jets import Jet, JetOverflowError, Tape, Var, tape_backward
from .network import LayerSpec, Network, init_network, save_checkpoint
from .physics import (FieldJets, Problem, boundary_initial_residual, exact_solution,
                      interface_residual, output_layout, pde_residual, synthesize_data)

log = logging.getLogger(__name__)

TERMS = ("L1", "L2", "G", "B1", "I1", "I2", "OBS")
WEIGHT_FIELDS = {"L1": "omega_L1", "L2": "omega_L2", "G": "omega_Gamma", "B1": "omega_B1",
                 "I1": "omega_I1", "I2": "omega_I2", "OBS": "omega_obs"}
HISTORY_COLUMNS = ("epoch", "F_L1", "F_L2", "F_Gamma", "F_B1", "F_I1", "F_I2", "F_obs", "total")


class NumericalFailure(RuntimeError):
    """Training hit a non-finite gradient or a diverging loss."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history or []


@dataclass
class LossWeights:
    omega_L1: float = 1.0
    omega_L2: float = 1.0
    omega_Gamma: float = 1.0
    omega_B1: float = 1.0
    omega_B2: float = 0.0
    omega_I1: float = 1.0
    omega_I2: float = 1.0
    omega_obs: float = 1.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = float(getattr(self, f.name))
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{f.name} must be a finite nonnegative number, got {v}")
            setattr(self, f.name, v)
        if self.omega_B2 != 0.0:
            log.warning("omega_B2 forced to 0: subdomain 2 has no outer boundary")
            self.omega_B2 = 0.0
        if not any(getattr(self, f.name) > 0 for f in dataclasses.fields(self)):
            raise ValueError("at least one loss weight must be positive")

    def of(self, term: str) -> float:
        return getattr(self, WEIGHT_FIELDS[term])


def default_weights(problem: Problem) -> LossWeights:
    """Each weight is ``1 / max(1, largest coefficient in that term)``."""
    inv = lambda *c: 1.0 / max(1.0, *c)  # noqa: E731
    f1 = problem.sub1
    if problem.is_fsi:
        s = problem.sub2
        solid = (s.rho_s, s.mu_s, s.lambda_s)
        return LossWeights(
            omega_L1=inv(f1.rho, f1.mu), omega_L2=inv(*solid),
            omega_Gamma=inv(f1.mu, s.mu_s, s.lambda_s), omega_B1=1.0,
            omega_I1=inv(f1.rho), omega_I2=inv(*solid), omega_obs=1.0)
    f2 = problem.sub2
    return LossWeights(
        omega_L1=inv(f1.rho, f1.mu), omega_L2=inv(f2.rho, f2.mu),
        omega_Gamma=inv(f1.mu, f2.mu), omega_B1=1.0,
        omega_I1=inv(f1.rho), omega_I2=inv(f2.rho), omega_obs=1.0)


@dataclass
class LossBreakdown:
    """Unweighted per-term MSEs and the weighted total."""

    terms: dict[str, float]
    weights: dict[str, float]
    total: float

    def __getitem__(self, term):
        return self.terms.get(term, 0.0)

    def row(self) -> list[float]:
        return [self[t] for t in TERMS] + [self.total]


# -- loss data -----------------------------------------------------------------

@dataclass
class LossData:
    """Everything the loss needs besides the networks, computed once."""

    problem: Problem
    samples: SampleSet
    points: dict[int, np.ndarray]
    slices: dict[tuple[int, str], slice]
    forcing: dict[int, np.ndarray]
    g1: np.ndarray
    g2: np.ndarray
    traces: dict[str, FieldJets]
    p_obs: np.ndarray | None


_SUB_TERMS = {1: ("L1", "G", "B1", "I1"), 2: ("L2", "G", "I2", "OBS")}


def prepare_loss_data(problem: Problem, samples: SampleSet) -> LossData:
    points, slices = {}, {}
    for sub, terms in _SUB_TERMS.items():
        chunks, off = [], 0
        for term in terms:
            P = samples[term]
            slices[(sub, term)] = slice(off, off + len(P))
            off += len(P)
            chunks.append(P)
        points[sub] = np.vstack(chunks) if off else np.zeros((0, 3))
    data = synthesize_data(problem, samples["L1"], samples["L2"], samples["G"], samples.normals)
    traces = {}
    for term, sub in (("B1", 1), ("I1", 1), ("I2", 2)):
        if samples.count(term):
            traces[term] = exact_solution(problem, sub, samples[term])
    p_obs = None
    if samples.count("OBS"):
        p_obs = exact_solution(problem, 2, samples["OBS"])["p"].value.copy() \
            if not problem.is_fsi else None
    return LossData(problem, samples, points, slices, {1: data.forcing1, 2: data.forcing2},
                    data.g1, data.g2, traces, p_obs)


class ExactEvaluator:
    """Stands in for a network by returning the exact fields as jets."""

    def __init__(self, problem: Problem, sub: int):
        self.problem, self.sub = problem, sub
        self.leaves = []

    def forward_jet(self, points, tape=None) -> Jet:
        f = exact_solution(self.problem, self.sub, points)
        names = self.problem.field_names(self.sub)
        return Jet(np.stack([f[n].c for n in names], axis=-1))


def assemble_loss(problem: Problem, data: LossData | SampleSet, nets, weights: LossWeights,
                  tape: Tape | None = None):
    """Return ``(LossBreakdown, residuals, total Var)``.

    ``residuals`` maps each active term to its :class:`ResidualVector`.
    """
    if isinstance(data, SampleSet):
        data = prepare_loss_data(problem, data)
    s = data.samples
    active = [t for t in TERMS if weights.of(t) > 0 and (t != "OBS" or data.p_obs is not None)]
    for t in active:
        if t != "OBS" and s.count(t) == 0:
            raise ValueError(f"loss term {t} is active but has no sampling points")

    fields = {}
    for sub in (1, 2):
        pts = data.points[sub]
        out = nets[sub - 1].forward_jet(pts, tape=tape)
        fields[sub] = FieldJets.from_output(out, problem.field_names(sub))

    def part(sub, term):
        return fields[sub].take(data.slices[(sub, term)])

    res = {}
    for t in active:
        if t == "L1":
            res[t] = pde_residual(problem, 1, part(1, "L1"), data.forcing[1])
        elif t == "L2":
            res[t] = pde_residual(problem, 2, part(2, "L2"), data.forcing[2])
        elif t == "G":
            res[t] = interface_residual(problem, part(1, "G"), part(2, "G"), s.normals, data.g1, data.g2)
        elif t in ("B1", "I1", "I2"):
            sub = int(t[1])
            res[t] = boundary_initial_residual(problem, t[0], sub, part(sub, t), data.traces[t])

    terms, total_var = {}, None
    wdict = {t: weights.of(t) for t in TERMS}
    for t in active:
        if t == "OBS":
            r = part(2, "OBS")["p"].val - data.p_obs
            F = r.square().mean()
        else:
            F = res[t].square_sum_var().mean()
        terms[t] = float(F.a)
        wF = wdict[t] * F
        total_var = wF if total_var is None else total_var + wF
    total = float(total_var.a) if total_var is not None else 0.0
    return LossBreakdown(terms, wdict, total), res, total_var


# -- optimizer -------------------------------------------------------------------

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(state: AdamState, grad, params, lr: float, beta1=0.9, beta2=0.999, eps=1e-8,
              epoch: int | None = None):
    """One bias-corrected Adam update, in place; returns ``(params, state)``."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != params.shape or state.m.shape != params.shape:
        raise ValueError("gradient, parameters and moments must have equal length")
    if not np.isfinite(grad).all():
        where = f" at epoch {epoch}" if epoch is not None else ""
        raise NumericalFailure(f"non-finite gradient{where}")
    state.step += 1
    state.m *= beta1
    state.m += (1 - beta1) * grad
    state.v *= beta2
    state.v += (1 - beta2) * grad * grad
    mhat = state.m / (1 - beta1 ** state.step)
    vhat = state.v / (1 - beta2 ** state.step)
    params -= lr * mhat / (np.sqrt(vhat) + eps)
    return params, state


# -- training loop ---------------------------------------------------------------

@dataclass
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 50000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    log_interval: int = 100
    batch: str = "full"
    deterministic: bool = True
    divergence_limit: float = 1e12

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.log_interval < 1:
            raise ValueError("log_interval must be at least 1")
        if self.batch != "full":
            raise ValueError("only full-batch training is supported")


@dataclass
class HistoryRow:
    epoch: int
    breakdown: LossBreakdown

    def csv(self) -> str:
        return ",".join([str(self.epoch)] + [repr(float(v)) for v in self.breakdown.row()])


@dataclass
class TrainResult:
    nets: list[Network]
    history: list[HistoryRow]
    samples: SampleSet
    final: LossBreakdown
    wall_seconds: float = 0.0


def history_header() -> str:
    return ",".join(HISTORY_COLUMNS)


def write_history(path, history) -> None:
    lines = [history_header()] + [h.csv() for h in history]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_history(path) -> list[dict]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    head = lines[0].split(",")
    return [dict(zip(head, (float(v) for v in ln.split(",")))) for ln in lines[1:] if ln]


def network_seeds(seed: int) -> tuple[int, int]:
    a, b = np.random.SeedSequence(seed).generate_state(2)
    return int(a), int(b)


def build_networks(problem: Problem, hidden, seed: int) -> list[Network]:
    widths = output_layout(problem.kind)
    s1, s2 = network_seeds(seed)
    return [init_network(LayerSpec.mlp(hidden, widths[0]), s1),
            init_network(LayerSpec.mlp(hidden, widths[1]), s2)]


@contextlib.contextmanager
def _thread_guard(deterministic: bool):
    if not deterministic:
        yield
        return
    from threadpoolctl import threadpool_limits
    with threadpool_limits(limits=1):
        yield


def loss_and_gradient(problem, data, nets, weights):
    with Tape() as tape:
        bd, _, total = assemble_loss(problem, data, nets, weights, tape=tape)
    leaves = nets[0].leaves + nets[1].leaves
    return bd, tape_backward(tape, total, leaves)


def train(problem: Problem, plan: SamplingPlan, hidden=(50, 50, 50), config: TrainConfig | None = None,
          weights: LossWeights | None = None, geometry: Geometry | None = None,
          nets: list[Network] | None = None, history_path=None, checkpoint_path=None,
          progress=None) -> TrainResult:
    """Full-batch Adam on the weighted least-squares loss.

    History rows are recorded at epoch 0, every ``log_interval`` epochs and
    at the final epoch; each row holds the loss *before* that epoch's update.
    """
    config = config or TrainConfig()
    weights = weights or default_weights(problem)
    geometry = geometry or Geometry()
    t0 = time.perf_counter()
    samples = generate_samples(geometry, plan)
    data = prepare_loss_data(problem, samples)
    if nets is None:
        nets = build_networks(problem, hidden, config.seed)
    theta = np.concatenate([n.params for n in nets])
    off = 0
    for n in nets:
        k = n.spec.n_params
        n.bind(theta[off:off + k])
        off += k
    state = AdamState.zeros(theta.size)
    history: list[HistoryRow] = []
    stream = None
    if history_path is not None:
        stream = open(history_path, "w", encoding="utf-8", newline="\n")
        stream.write(history_header() + "\n")

    def record(epoch, bd):
        row = HistoryRow(epoch, bd)
        history.append(row)
        if stream is not None:
            stream.write(row.csv() + "\n")
            stream.flush()
        if progress is not None:
            progress(row)

    try:
        with _thread_guard(config.deterministic):
            for epoch in range(config.epochs + 1):
                last = epoch == config.epochs
                try:
                    if last:
                        bd, _, _ = assemble_loss(problem, data, nets, weights)
                        grad = None
                    else:
                        bd, grad = loss_and_gradient(problem, data, nets, weights)
                except JetOverflowError as exc:
                    raise NumericalFailure(f"epoch {epoch}: {exc}", history) from exc
                if not math.isfinite(bd.total) or bd.total > config.divergence_limit:
                    record(epoch, bd)
                    raise NumericalFailure(
                        f"loss diverged at epoch {epoch} (total {bd.total:.3e})", history)
                if last or epoch % config.log_interval == 0:
                    record(epoch, bd)
                if last:
                    break
                try:
                    adam_step(state, grad, theta, config.lr, config.beta1, config.beta2,
                              config.eps, epoch=epoch)
                except NumericalFailure as exc:
                    exc.history = history
                    raise
    finally:
        if stream is not None:
            stream.close()
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, nets)
    return TrainResult(nets, history, samples, history[-1].breakdown, time.perf_counter() - t0)
