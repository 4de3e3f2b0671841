#!/usr/bin/env python3
"""Time the numba kernels against their numpy fallbacks.

Usage: python benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]

Both paths are imported side by side, so HDCLT_NO_NUMBA does not matter
here.  Each kernel is warmed up once (JIT compile) before timing, and the
two outputs are compared so a speedup never hides a wrong answer.
"""
import argparse
import time

import numpy as np

from hdclt import _kernels as K


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(scale, rng):
    n = int(200_000 * scale)
    a = rng.standard_normal((n, 64))
    x = np.sort(np.abs(rng.standard_normal(n)))
    y = np.sort(np.abs(rng.standard_normal(n)))
    hx = rng.random((int(2000 * scale), 256))
    hxi = rng.standard_normal(hx.shape)
    bx = rng.random((200, 64))
    bxi = rng.standard_normal(bx.shape)
    return [
        ("rowmax_abs", "rowmax_abs", (a,)),
        ("ecdf_sup_two_sample m=0", "ecdf_sup_two_sample", (x, y, 0.0)),
        ("ecdf_sup_two_sample m=2", "ecdf_sup_two_sample", (x, y, 2.0)),
        ("halfline_sup", "halfline_sup", (hx, hxi)),
        ("halfline_sup_brute n=64", "halfline_sup_brute", (bx, bxi)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0)
    args = ap.parse_args()

    if not K.HAVE_NUMBA:
        print("numba not importable; only the numpy path can run")
    rng = np.random.default_rng(20240101)
    print(f"{'kernel':<28}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}  agree")
    for label, name, fargs in cases(args.scale, rng):
        np_fn = getattr(K, name + "_numpy")
        t_np, out_np = best_of(np_fn, fargs, args.repeat)
        if K.HAVE_NUMBA:
            nb_fn = getattr(K, name + "_numba")
            nb_fn(*fargs)  # compile
            t_nb, out_nb = best_of(nb_fn, fargs, args.repeat)
            agree = np.allclose(np.asarray(out_np, dtype=float), np.asarray(out_nb, dtype=float), rtol=1e-12, atol=0)
            print(f"{label:<28}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>10.1f}  {agree}")
        else:
            print(f"{label:<28}{1e3 * t_np:>12.2f}{'-':>12}{'-':>10}  -")


if __name__ == "__main__":
    main()
