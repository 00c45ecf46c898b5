"""Compare the compiled kernels with their numpy twins.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5] [--quick]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from graphonlab._kernels import backends


def cases(quick: bool):
    rng = np.random.default_rng(7)
    n_paths, n_ref, steps = (64, 256, 17) if quick else (128, 512, 33)
    X = rng.normal(size=(n_paths, steps, 1))
    Y = rng.normal(size=(n_ref, steps, 1))
    m = 128 if quick else 256
    C = rng.random((m, m))
    n_cut = 14 if quick else 18
    D = rng.uniform(-1, 1, size=(n_cut, n_cut))
    D = (D + D.T) / 2
    P = 512 if quick else 1024
    S = rng.normal(size=(P, 1))
    W = rng.random((P, P)) / P
    return [
        (f"sup_sq_cost {n_paths}x{n_ref}x{steps}", "sup_sq_cost", (X, Y)),
        (f"assignment {m}x{m}", "assignment", (C,)),
        (f"cut_norm_enum n={n_cut}", "cut_norm_enum", (D,)),
        (f"inf_to_one_enum n={n_cut}", "inf_to_one_enum", (D,)),
        (f"weighted_tanh_sum P={P}", "weighted_tanh_sum", (S, W, S)),
    ]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--quick", action="store_true")
    args = parser.parse_args(argv)
    found = backends()
    names = sorted(found, key=lambda k: k != "python")
    print(f"{'kernel':34s}" + "".join(f"{k:>12s}" for k in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fn, inputs in cases(args.quick):
        times = {}
        for name in names:
            f = getattr(found[name], fn)
            f(*inputs)
            times[name] = min(timeit.repeat(lambda: f(*inputs), number=1, repeat=args.repeat))
        row = f"{label:34s}" + "".join(f"{times[k] * 1e3:10.2f}ms" for k in names)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
