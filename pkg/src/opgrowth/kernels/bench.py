"""Benchmark the compiled kernels against the numpy fallback.

Runs the two hot loops (front evolution and log-domain counting) over a
representative cone workload on every available backend, checks that the
backends agree, and reports per-layer throughput.
"""

from __future__ import annotations

import time

import numpy as np

from ..config import Box, p_threshold
from . import available_backends, get_impl

NEG_INF = float("-inf")


def _run_front(impl, d: int, n: int, seed: int, threshold: int):
    occ = np.ones((1,) * d, dtype=bool)
    lo = tuple([0] * d)
    ty = tuple([0] * d)
    for t in range(1, n + 1):
        lo_out = tuple(c - 1 for c in lo)
        shape_out = tuple(s + 2 for s in occ.shape)
        occ = impl.front_step(occ, lo, t, lo_out, shape_out, seed, threshold, 0, ty, 0)
        lo = lo_out
    return occ, lo


def _run_count(impl, d: int, n: int, seed: int, threshold: int):
    vals = np.zeros((1,) * d, dtype=np.float64)
    lo = tuple([0] * d)
    ty = tuple([0] * d)
    for t in range(1, n + 1):
        lo_out = tuple(c - 1 for c in lo)
        shape_out = tuple(s + 2 for s in vals.shape)
        vals = impl.count_step(vals, lo, t, lo_out, shape_out, seed, threshold, 0, ty, 0)
        lo = lo_out
    return vals, lo


def run_benchmark(d: int = 1, p: float = 0.8, n: int = 256, seed: int = 1,
                  repeats: int = 3) -> dict:
    """Time both backends on an n-layer cone; returns rows plus agreement flags."""
    threshold = p_threshold(p)
    rows = []
    results: dict[str, tuple] = {}
    for name in available_backends():
        impl = get_impl(name)
        for op, runner in (("front_step", _run_front), ("count_step", _run_count)):
            best = float("inf")
            out = None
            for _ in range(repeats):
                t0 = time.perf_counter()
                out = runner(impl, d, n, seed, threshold)
                best = min(best, time.perf_counter() - t0)
            results[f"{name}:{op}"] = out
            rows.append({
                "backend": name,
                "op": op,
                "d": d,
                "p": p,
                "layers": n,
                "best_seconds": best,
                "layers_per_second": n / best,
            })
    agreement = {}
    if len(available_backends()) == 2:
        f_c, f_p = results["compiled:front_step"][0], results["python:front_step"][0]
        agreement["front_equal"] = bool(np.array_equal(f_c, f_p))
        c_c, c_p = results["compiled:count_step"][0], results["python:count_step"][0]
        finite = np.isfinite(c_c) & np.isfinite(c_p)
        agreement["count_structure_equal"] = bool(
            np.array_equal(np.isfinite(c_c), np.isfinite(c_p))
        )
        agreement["count_max_abs_diff"] = float(
            np.max(np.abs(c_c[finite] - c_p[finite])) if finite.any() else 0.0
        )
    return {"rows": rows, "agreement": agreement, "window": Box.cube(d, n).shape}
