#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Runs each leaf kernel on large arrays plus one end-to-end field evaluation,
timing both implementations in-process (both are importable regardless of
the UCLAB_BACKEND flag).

    python3 benchmarks/bench_backends.py [--size 2000000] [--repeats 5]
"""

import argparse
import time

import numpy as np

import uclab._kernels as K


def timeit(fn, *args, repeats=5):
    fn(*args)  # warm-up (jit compile on the numba path)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=2_000_000)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    t = rng.uniform(-0.2, 1.2, args.size)
    x = rng.random(args.size)
    r = rng.uniform(1.0, 200.0, args.size)
    g = rng.uniform(-400.0, 300.0, args.size)
    w = rng.uniform(0.1, 2.0, args.size)

    rows = []
    cases = [
        ("smoothstep", (K._smoothstep_numpy, t), (getattr(K, "_smoothstep_loop"), t)),
        ("phase_profile", (K._phase_profile_numpy, x), (K._phase_profile_loop, x)),
        ("bump", (K._bump_numpy, t), (K._bump_loop, t)),
        ("mode_pieces", (K._mode_pieces_numpy, 250.0, 1j, r),
         (K._mode_pieces_loop, 250.0, 1j, r)),
        ("logsum_weighted", (K._logsum_weighted_numpy, g, w),
         (K._logsum_weighted_loop, g, w)),
    ]
    numba_ok = K._HAVE_NUMBA
    if numba_ok:
        from numba import njit

        compiled = {
            "smoothstep": njit(cache=True)(K._smoothstep_loop),
            "phase_profile": K.phase_profile if K.USE_NUMBA
            else njit(cache=True)(K._phase_profile_loop),
            "bump": njit(cache=True)(K._bump_loop),
            "mode_pieces": njit(cache=True)(K._mode_pieces_loop),
            "logsum_weighted": njit(cache=True)(K._logsum_weighted_loop),
        }

    print(f"array size: {args.size:,}; repeats: {args.repeats}; "
          f"active backend: {K.backend_name()}")
    print(f"{'kernel':<18} {'numpy [ms]':>12} {'numba [ms]':>12} {'speedup':>9}")
    for name, (np_fn, *np_args), (loop_fn, *loop_args) in cases:
        t_np = timeit(np_fn, *np_args, repeats=args.repeats)
        if numba_ok:
            t_nb = timeit(compiled[name], *loop_args, repeats=args.repeats)
            print(f"{name:<18} {t_np * 1e3:>12.2f} {t_nb * 1e3:>12.2f} "
                  f"{t_np / t_nb:>8.2f}x")
        else:
            print(f"{name:<18} {t_np * 1e3:>12.2f} {'n/a':>12} {'':>9}")

    # end-to-end: one batch of annulus field evaluations
    from uclab.meshkov import build_solution

    sol = build_solution("W", 1j, 1.5, 100.0, n_annuli=2)
    rr = rng.uniform(100.5, 136.0, 20000)
    pp = rng.uniform(0.0, 2 * np.pi, 20000)

    def field_eval():
        off = sol.log_magnitude(rr)
        sol.fields(rr, pp, offset=off)

    t_eval = timeit(field_eval, repeats=args.repeats)
    print(f"\nfield evaluation, 20k points (active backend): {t_eval * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
