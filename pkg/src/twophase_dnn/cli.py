"""Command-line entry point: ``twophase-dnn {run,sweep,check,plot,residuals,samples}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import kernels
from .config import ConfigError, ExperimentConfig, default_seed, load_config
from .experiments import (SweepSpec, emit_plot, error_bound_terms, format_bound_terms,
                          read_sweep_csv, run_one, run_sweep, table_plans, write_snapshot)
from .geometry import Geometry, export_samples, generate_samples
from .jets import JetOverflowError, no_tape
from .network import load_checkpoint
from .physics import FieldJets, Problem, forcing, pde_residual
from .training import ExactEvaluator, NumericalFailure

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
log = logging.getLogger("twophase_dnn")


def _add_common(p: argparse.ArgumentParser, config_required=True):
    p.add_argument("-c", "--config", required=config_required, help="INI experiment file")
    p.add_argument("--seed", type=int, help="run seed (overrides TWOPHASE_DNN_SEED and the config)")
    p.add_argument("-o", "--out", help="output directory (overrides [output] directory)")
    p.add_argument("--epochs", type=int, help="override [training] epochs")
    det = p.add_mutually_exclusive_group()
    det.add_argument("--deterministic", dest="deterministic", action="store_true", default=None,
                     help="single-threaded BLAS, fixed reduction order")
    det.add_argument("--no-deterministic", dest="deterministic", action="store_false")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twophase-dnn", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="train one experiment and report its errors")
    _add_common(p)
    p.add_argument("--snapshot-t", type=float, action="append", default=[],
                   help="also write a field snapshot CSV at this time (repeatable)")

    p = sub.add_parser("sweep", help="reproduce a results table")
    _add_common(p)
    p.add_argument("--table", help="table1..table7 (overrides [sweep] table)")
    p.add_argument("--rows", help="comma-separated row indices (0-based)")
    p.add_argument("--seeds", help="comma-separated seeds")
    p.add_argument("--plot", action="store_true", help="also write sweep.svg")

    p = sub.add_parser("check", help="oracle, AD and quadrature-rate self-checks")
    p.add_argument("--quick", action="store_true", help="fewer oracle points")

    p = sub.add_parser("plot", help="convergence plot from a sweep CSV")
    p.add_argument("csv")
    p.add_argument("-o", "--output", required=True, help="SVG file to write")
    p.add_argument("--slope", type=float, default=0.25)
    p.add_argument("--title")

    p = sub.add_parser("residuals", help="dump residual components on a grid")
    _add_common(p)
    p.add_argument("--checkpoint", help="network checkpoint (default: exact fields)")
    p.add_argument("--t", type=float, default=0.5)
    p.add_argument("--n", type=int, default=31)
    p.add_argument("--output", help="file (default stdout)")

    p = sub.add_parser("samples", help="export the sampling points of a config")
    _add_common(p)
    p.add_argument("--output", required=True)
    return ap


def _resolve(cfg: ExperimentConfig, args) -> tuple[ExperimentConfig, int]:
    seed = args.seed if args.seed is not None else default_seed(cfg.train.seed)
    train = replace(cfg.train, seed=seed)
    if args.epochs is not None:
        train = replace(train, epochs=args.epochs)
    if args.deterministic is not None:
        train = replace(train, deterministic=args.deterministic)
    cfg = replace(cfg, train=train, plan=replace(cfg.plan, seed=seed))
    if args.out:
        cfg = replace(cfg, output_dir=Path(args.out))
    return cfg, seed


def cmd_run(cfg: ExperimentConfig, seed: int, args) -> int:
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    hist = out / cfg.history_name
    ckpt = out / cfg.checkpoint_name
    result, rep = run_one(cfg.problem, cfg.plan, seed, cfg.hidden, cfg.train, cfg.weights, cfg.grid,
                          history_path=hist, checkpoint_path=ckpt)
    report = rep.as_dict()
    report["problem"] = cfg.problem.kind.value
    report["plan"] = cfg.plan.label()
    report["bound_terms"] = [vars(t) for t in error_bound_terms(result.final, cfg.plan)]
    (out / cfg.report_name).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for t in args.snapshot_t:
        write_snapshot(result.nets, cfg.problem, t, out / f"snapshot_t{t:g}.csv")
    print(f"loss {result.final.total:.4e}  approx. error {rep.combined:.4e}  ({rep.wall_seconds:.1f} s)")
    for name, e in sorted(rep.per_field.items()):
        print(f"  {name:<5} {e:.4e}")
    for name, e in sorted(rep.diagnostics.items()):
        print(f"  {name} {e:.4e}")
    print(format_bound_terms(error_bound_terms(result.final, cfg.plan)))
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig, seed: int, args) -> int:
    table = args.table or cfg.sweep.table
    rows = [int(v) for v in args.rows.split(",")] if args.rows else cfg.sweep.rows
    seeds = [int(v) for v in args.seeds.split(",")] if args.seeds else cfg.sweep.seeds
    kw = dict(seeds=seeds, hidden=cfg.hidden, train=cfg.train, weights=cfg.weights, resolution=cfg.grid)
    if table:
        spec = SweepSpec.for_table(table, rows, **kw)
    else:
        plans = table_plans(rows) if rows else [cfg.plan]
        spec = SweepSpec(cfg.problem, plans, observation=cfg.observation, **kw)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.output_dir / "sweep.csv"

    def show(r):
        print(f"M_L={r.M_L:<6} M_B={r.M_B:<5} M_G={r.M_Gamma:<5} M_I={r.M_I:<5} seed={r.seed:<3} "
              f"error={r.approx_error:.4e} loss={r.loss_error:.4e} ({r.wall_seconds:.0f} s)", flush=True)

    result = run_sweep(spec, csv_path=path, progress=show)
    if args.plot:
        emit_plot(result, cfg.output_dir / "sweep.svg")
    return EXIT_NUMERIC if all(np.isnan(r.approx_error) for r in result) else EXIT_OK


def cmd_check(args) -> int:
    from .checks import run_all
    print(f"kernel backend: {kernels.BACKEND}")
    results = run_all(quick=args.quick)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


def cmd_plot(args) -> int:
    rows = read_sweep_csv(args.csv)
    emit_plot(rows, args.output, args.slope, args.title)
    return EXIT_OK


def cmd_residuals(cfg: ExperimentConfig, args) -> int:
    problem: Problem = cfg.problem
    nets = load_checkpoint(args.checkpoint) if args.checkpoint else [ExactEvaluator(problem, 1), ExactEvaluator(problem, 2)]
    geom = Geometry()
    xs = np.linspace(0, 3, args.n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    P = np.column_stack([X.ravel(), Y.ravel(), np.full(X.size, args.t)])
    lv = geom.level(P[:, 0], P[:, 1])
    lines = []
    with no_tape():
        for sub, mask in ((1, lv > 1e-12), (2, lv < -1e-12)):
            pts = P[mask]
            fields = FieldJets.from_output(nets[sub - 1].forward_jet(pts), problem.field_names(sub))
            r = pde_residual(problem, sub, fields, forcing(problem, sub, pts))
            lines.append("subdomain x y t " + " ".join(r.names()))
            for i in range(len(pts)):
                vals = " ".join(f"{r[n][i]:.6e}" for n in r.names())
                lines.append(f"{sub} {pts[i, 0]:.6f} {pts[i, 1]:.6f} {pts[i, 2]:.6f} {vals}")
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_samples(cfg: ExperimentConfig, args) -> int:
    export_samples(generate_samples(Geometry(), cfg.plan), args.output)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "check":
            return cmd_check(args)
        if args.verb == "plot":
            return cmd_plot(args)
        cfg, seed = _resolve(load_config(args.config), args)
        if args.verb == "run":
            return cmd_run(cfg, seed, args)
        if args.verb == "sweep":
            return cmd_sweep(cfg, seed, args)
        if args.verb == "residuals":
            return cmd_residuals(cfg, args)
        if args.verb == "samples":
            return cmd_samples(cfg, args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, JetOverflowError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
