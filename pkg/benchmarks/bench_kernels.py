"""Benchmark the compiled recurrence kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats N]

Times one forward+backward pass over a T-step sequence for each hidden size.
The compiled backend removes per-step Python dispatch, which dominates at
small H; at large H the numpy backend's BLAS matvec wins. Both backends are
exercised regardless of which one the package selected at import.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from vdparse.kernels import pyref

try:
    from vdparse.kernels import _core
except ImportError:
    _core = None

T = 40
HIDDEN = (32, 64, 128, 256, 512)


def run_lstm(backend, xp, h0, c0, U, dh, dc):
    h_seq, c_seq, gates, tanh_c = backend.lstm_forward(xp, h0, c0, U)
    backend.lstm_backward(dh, dc, U, h0, c0, h_seq, c_seq, gates, tanh_c)


def run_gru(backend, xp, h0, U, dh):
    h_seq, gates, uh_n = backend.gru_forward(xp, h0, U)
    backend.gru_backward(dh, U, h0, h_seq, gates, uh_n)


def time_case(fn, repeats):
    fn()  # warm up
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    if _core is None:
        print("compiled backend not built; run `pip install -e .` first")

    rng = np.random.default_rng(0)
    print(f"{'cell':5s} {'H':>5s} {'numpy (ms)':>12s} {'cython (ms)':>12s} {'speedup':>8s}")
    for cell in ("lstm", "gru"):
        gate_mult = 4 if cell == "lstm" else 3
        for H in HIDDEN:
            G = gate_mult * H
            xp = rng.normal(size=(T, G))
            h0 = rng.normal(size=H)
            c0 = rng.normal(size=H)
            U = rng.normal(size=(G, H)) / np.sqrt(H)
            dh = rng.normal(size=(T, H))
            dc = rng.normal(size=H)
            if cell == "lstm":
                make = lambda b: (lambda: run_lstm(b, xp, h0, c0, U, dh, dc))
            else:
                make = lambda b: (lambda: run_gru(b, xp, h0, U, dh))
            t_py = time_case(make(pyref), args.repeats)
            if _core is not None:
                t_cy = time_case(make(_core), args.repeats)
                print(f"{cell:5s} {H:5d} {t_py * 1e3:12.3f} {t_cy * 1e3:12.3f} "
                      f"{t_py / t_cy:7.1f}x")
            else:
                print(f"{cell:5s} {H:5d} {t_py * 1e3:12.3f} {'-':>12s} {'-':>8s}")


if __name__ == "__main__":
    main()
