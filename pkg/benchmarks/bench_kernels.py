"""Compare the compiled and numpy jet kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times the tanh jet forward/backward kernels on a 3x50 hidden-layer sized
batch and one full loss-and-gradient evaluation on the smallest two-phase
plan, once per backend.
"""
import argparse
import timeit

import numpy as np

from twophase_dnn import kernels
from twophase_dnn.geometry import Geometry, generate_samples
from twophase_dnn.experiments import table_plans
from twophase_dnn.physics import Problem
from twophase_dnn.training import build_networks, default_weights, loss_and_gradient, prepare_loss_data


def kernel_case(batch=700, width=50):
    rng = np.random.default_rng(0)
    c = rng.normal(size=(10, batch, width))
    g = rng.normal(size=(10, batch, width))
    out = kernels.tanh_forward(c)
    return {
        "tanh forward": lambda: kernels.tanh_forward(c),
        "tanh backward": lambda: kernels.tanh_backward(c, out, g),
    }


def epoch_case():
    pb = Problem.two_phase()
    data = prepare_loss_data(pb, generate_samples(Geometry(), table_plans([0])[0]))
    nets = build_networks(pb, (50, 50, 50), 0)
    w = default_weights(pb)
    return {"loss + gradient": lambda: loss_and_gradient(pb, data, nets, w)}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    try:
        kernels.use("cython")
        backends = ("numpy", "cython")
    except ImportError:
        backends = ("numpy",)
        print("compiled kernels not built; timing numpy only")
    timings = {}
    for b in backends:
        kernels.use(b)
        for name, fn in {**kernel_case(), **epoch_case()}.items():
            n = 20 if name.startswith("tanh") else 3
            best = min(timeit.repeat(fn, number=n, repeat=args.repeat)) / n
            timings[(name, b)] = best
    names = dict.fromkeys(k[0] for k in timings)
    print(f"{'case':<18}" + "".join(f"{b:>14}" for b in backends) + ("   speed-up" if len(backends) == 2 else ""))
    for name in names:
        row = [timings[(name, b)] for b in backends]
        line = f"{name:<18}" + "".join(f"{t * 1e3:>11.3f} ms" for t in row)
        if len(row) == 2:
            line += f"   {row[0] / row[1]:6.2f}x"
        print(line)


if __name__ == "__main__":
    main()
