"""INI experiment configuration.

Every key is documented in ``configs/example.ini``.  Unknown sections or keys,
keys that do not apply to the chosen problem, and malformed values are
errors reported with the offending line number.
"""
from __future__ import annotations

import configparser
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

from .experiments import DEFAULT_GRID, observation_points_default
from .geometry import SamplingPlan
from .physics import Problem, ProblemKind
from .training import LossWeights, TrainConfig, default_weights

SEED_ENV = "TWOPHASE_DNN_SEED"


class ConfigError(ValueError):
    pass


_KEYS = {
    "problem": {"kind", "rho1", "mu1", "rho2", "mu2", "rho_f", "mu_f", "rho_s", "E", "nu",
                "paper_literal_solution", "theory_terms"},
    "sampling": {"interior", "boundary", "interface", "initial", "mode"},
    "network": {"hidden"},
    "training": {"lr", "epochs", "beta1", "beta2", "eps", "seed", "log_interval", "deterministic"},
    "weights": {"auto", "omega_L1", "omega_L2", "omega_Gamma", "omega_B1", "omega_B2",
                "omega_I1", "omega_I2", "omega_obs"},
    "observation": {"points"},
    "evaluation": {"grid"},
    "output": {"directory", "history", "checkpoint", "report"},
    "sweep": {"table", "rows", "seeds"},
}
_TWO_PHASE_ONLY = {"rho1", "mu1", "rho2", "mu2", "paper_literal_solution"}
_FSI_ONLY = {"rho_f", "mu_f", "rho_s", "E", "nu"}


@dataclass
class SweepSettings:
    table: str | None = None
    rows: list[int] | None = None
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])


@dataclass
class ExperimentConfig:
    problem: Problem
    plan: SamplingPlan
    hidden: tuple[int, ...] = (50, 50, 50)
    train: TrainConfig = field(default_factory=TrainConfig)
    weights: LossWeights | None = None
    observation: tuple[tuple[float, float], ...] = ()
    grid: tuple[int, int, int] = DEFAULT_GRID
    output_dir: Path = Path("out")
    history_name: str = "history.csv"
    checkpoint_name: str = "checkpoint.txt"
    report_name: str = "report.json"
    sweep: SweepSettings = field(default_factory=SweepSettings)
    source: str | None = None

    def resolved_weights(self) -> LossWeights:
        return self.weights if self.weights is not None else default_weights(self.problem)


def _line_index(text: str):
    """Map (section, key) and section names to 1-based line numbers."""
    where, section = {}, None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]+)\]$", line)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), i)
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip()), i)
    return where


def _ints(text: str, sep=",") -> list[int]:
    return [int(v) for v in text.replace(" ", "").split(sep) if v]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _points(text: str):
    t = text.strip().lower()
    if t in ("", "none"):
        return ()
    if t == "default":
        return tuple(observation_points_default())
    pts = []
    for chunk in text.split(";"):
        if chunk.strip():
            x, y = (float(v) for v in chunk.split(","))
            pts.append((x, y))
    return tuple(pts)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep key case (E, omega_L1)
    lines = _line_index(text)

    def err(section, key, msg):
        ln = lines.get((section, key)) or lines.get((section, None))
        loc = f"{source}:{ln}" if ln else source
        return ConfigError(f"{loc}: {msg}")

    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    for sec in cp.sections():
        if sec not in _KEYS:
            raise err(sec, None, f"unknown section [{sec}]")
        for key in cp[sec]:
            if key not in _KEYS[sec]:
                raise err(sec, key, f"unknown key '{key}' in [{sec}]")

    def get(sec, key, conv, default):
        if not cp.has_option(sec, key):
            return default
        raw = cp.get(sec, key)
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            raise err(sec, key, f"bad value for {sec}.{key} = {raw!r}: {exc}") from None

    kind_text = get("problem", "kind", str, "two-phase")
    try:
        kind = ProblemKind.parse(kind_text)
    except ValueError as exc:
        raise err("problem", "kind", str(exc)) from None
    bad = _FSI_ONLY if kind is ProblemKind.TWO_PHASE else _TWO_PHASE_ONLY
    if cp.has_section("problem"):
        for key in cp["problem"]:
            if key in bad:
                raise err("problem", key, f"key '{key}' does not apply to {kind.value}")
    theory = get("problem", "theory_terms", _bool, True)
    try:
        if kind is ProblemKind.TWO_PHASE:
            problem = Problem.two_phase(
                get("problem", "rho1", float, 1.0), get("problem", "mu1", float, 1.0),
                get("problem", "rho2", float, 1.0), get("problem", "mu2", float, 1.0),
                paper_literal_solution=get("problem", "paper_literal_solution", _bool, False),
                theory_terms=theory)
        else:
            problem = Problem.fsi(
                kind, get("problem", "rho_f", float, 1.0), get("problem", "mu_f", float, 1.0),
                get("problem", "rho_s", float, 1e3), get("problem", "E", float, 1e6),
                get("problem", "nu", float, 0.3), theory_terms=theory)
    except ValueError as exc:
        raise err("problem", None, str(exc)) from None

    obs = get("observation", "points", _points, ())
    try:
        plan = SamplingPlan(
            get("sampling", "interior", str, "10x10x5"), get("sampling", "boundary", str, "4x4x5"),
            get("sampling", "interface", str, "4x5"), get("sampling", "initial", str, "4x4"),
            observation=obs, mode=get("sampling", "mode", str, "random"))
    except ValueError as exc:
        raise err("sampling", None, str(exc)) from None

    hidden = tuple(get("network", "hidden", _ints, [50, 50, 50]))
    if not hidden or any(h <= 0 for h in hidden):
        raise err("network", "hidden", "hidden widths must be positive integers")

    try:
        train = TrainConfig(
            lr=get("training", "lr", float, 1e-3), epochs=get("training", "epochs", int, 5000),
            beta1=get("training", "beta1", float, 0.9), beta2=get("training", "beta2", float, 0.999),
            eps=get("training", "eps", float, 1e-8), seed=get("training", "seed", int, 0),
            log_interval=get("training", "log_interval", int, 100),
            deterministic=get("training", "deterministic", _bool, True))
    except ValueError as exc:
        raise err("training", None, str(exc)) from None

    weights = None
    if cp.has_section("weights"):
        auto = get("weights", "auto", _bool, True)
        base = default_weights(problem) if auto else LossWeights()
        overrides = {k: get("weights", k, float, None) for k in _KEYS["weights"] - {"auto"}
                     if cp.has_option("weights", k)}
        try:
            vals = {f: getattr(base, f) for f in base.__dataclass_fields__}
            vals.update(overrides)
            weights = LossWeights(**vals)
        except ValueError as exc:
            raise err("weights", None, str(exc)) from None

    grid_text = get("evaluation", "grid", str, "61x61x11")
    try:
        grid = tuple(int(v) for v in re.split(r"\s*x\s*", grid_text.strip()))
        if len(grid) != 3 or min(grid) < 2:
            raise ValueError
    except ValueError:
        raise err("evaluation", "grid", f"grid must look like 61x61x11, got {grid_text!r}") from None

    sweep = SweepSettings(
        table=get("sweep", "table", str, None),
        rows=get("sweep", "rows", _ints, None),
        seeds=get("sweep", "seeds", _ints, [0, 1, 2]),
    )
    return ExperimentConfig(
        problem=problem, plan=plan, hidden=hidden, train=train, weights=weights, observation=obs,
        grid=grid, output_dir=Path(get("output", "directory", str, "out")),
        history_name=get("output", "history", str, "history.csv"),
        checkpoint_name=get("output", "checkpoint", str, "checkpoint.txt"),
        report_name=get("output", "report", str, "report.json"),
        sweep=sweep, source=source)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(p))


def default_seed(fallback: int = 0) -> int:
    """Seed from ``TWOPHASE_DNN_SEED`` if set, else ``fallback``."""
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return fallback
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None
