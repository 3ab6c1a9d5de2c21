"""Brute-force ground truth at desk scale.

Exhaustive step-sequence enumeration, exact expectations by summing over
all configurations of a tiny edge neighbourhood, and closed forms of the
deterministic all-open lattice.  Every route here is independent of the
dynamic-programming and kernel code paths it validates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

from scipy.optimize import brentq

from .config import LatticeParams, Site, TranslationVector, open_at, step_offsets
from .errors import PreconditionError, ResourceLimitError


@dataclass
class EnumerationResult:
    """Endpoint tallies from exhausting all (2d+1)^n step sequences."""

    n: int
    counts: dict[tuple[int, ...], int]
    total_examined: int

    def total_open(self) -> int:
        return sum(self.counts.values())


def enumerate_paths_count(params: LatticeParams, n: int,
                          env: TranslationVector | None = None,
                          guard: int = 10_000_000) -> EnumerationResult:
    """Walk every step sequence from the origin, keeping fully open ones.

    Prunes on the first closed edge, so the guard bounds the worst case
    (2d+1)^n, not the explored tree.
    """
    if n < 0:
        raise PreconditionError("n must be >= 0")
    n_dirs = 2 * params.d + 1
    total = n_dirs**n
    if total > guard:
        raise ResourceLimitError(f"(2d+1)^n = {total} exceeds the {guard} guard")
    offs = step_offsets(params.d)
    counts: dict[tuple[int, ...], int] = {}
    origin = tuple([0] * params.d)

    def walk(z: tuple[int, ...], depth: int) -> None:
        if depth == n:
            counts[z] = counts.get(z, 0) + 1
            return
        for dirn in range(n_dirs):
            if open_at(params, z, depth + 1, dirn, env):
                walk(tuple(a + b for a, b in zip(z, offs[dirn])), depth + 1)

    walk(origin, 0)
    return EnumerationResult(n, counts, total)


@dataclass
class TinyStats:
    """Exact laws from exhausting every configuration of a small cone."""

    n: int
    edge_count: int
    expected_count: float
    tau_law: dict[int, float]  # law of min(tau, n); mass at n covers tau >= n


def exact_tiny_stats(params: LatticeParams, n: int, guard_edges: int = 24) -> TinyStats:
    """Sum over all 2^E open/closed patterns of the depth-n cone from the origin.

    E[N_n] and the law of min(tau, n) follow with product Bernoulli weights;
    exact but exponential, hence the hard edge guard.
    """
    if n < 1:
        raise PreconditionError("n must be >= 1")
    d, p = params.d, params.p
    offs = step_offsets(d)
    n_dirs = len(offs)
    # cone edges: sources at l1-distance <= t-1 from the origin, layers 1..n
    edges: list[tuple[tuple[int, ...], int, int]] = []
    layer_sites = [tuple([0] * d)]
    for t in range(1, n + 1):
        nxt = set()
        for z in layer_sites:
            for dirn, off in enumerate(offs):
                edges.append((z, t, dirn))
                nxt.add(tuple(a + b for a, b in zip(z, off)))
        layer_sites = sorted(nxt)
    ne = len(edges)
    if ne > guard_edges:
        raise ResourceLimitError(f"{ne} cone edges exceed the {guard_edges} guard")
    index = {e: i for i, e in enumerate(edges)}
    expected = 0.0
    tau_law: dict[int, float] = {}
    for config in range(1 << ne):
        weight = 1.0
        for i in range(ne):
            weight *= p if (config >> i) & 1 else 1.0 - p
        if weight == 0.0:
            continue
        vals = {tuple([0] * d): 1}
        tau = None
        for t in range(1, n + 1):
            nxt: dict[tuple[int, ...], int] = {}
            for z, c in vals.items():
                for dirn, off in enumerate(offs):
                    if (config >> index[(z, t, dirn)]) & 1:
                        z2 = tuple(a + b for a, b in zip(z, off))
                        nxt[z2] = nxt.get(z2, 0) + c
            vals = nxt
            if not vals:
                tau = t
                break
        mt = n if tau is None else min(tau, n)
        tau_law[mt] = tau_law.get(mt, 0.0) + weight
        expected += weight * sum(vals.values())
    return TinyStats(n, ne, expected, tau_law)


def _step_log_mgf(lam: float) -> float:
    # log of the moment generating function of one uniform step in {-1,0,1}
    return math.log((1.0 + 2.0 * math.cosh(lam)) / 3.0)


def step_rate_function(t: float) -> float:
    """Legendre transform of the d=1 uniform step law at slope t (|t| < 1)."""
    if abs(t) >= 1.0:
        raise ValueError(f"slope must satisfy |t| < 1, got {t}")
    if t == 0.0:
        return 0.0
    # stationarity: 2 sinh(lam) / (1 + 2 cosh(lam)) = t, strictly increasing in lam
    lam = brentq(lambda u: 2.0 * math.sinh(u) / (1.0 + 2.0 * math.cosh(u)) - t, -60.0, 60.0)
    return lam * t - _step_log_mgf(lam)


def p1_reference(kind: str, argument):
    """Closed forms of the all-open lattice (p = 1).

    growth(t): per-layer log growth of d=1 counts at slope t, log 3 minus
    the step rate function.  shape(x): l1 norm.  sigma(x): max(l1, 1).
    """
    if kind == "growth":
        return math.log(3.0) - step_rate_function(float(argument))
    if kind == "shape":
        return float(sum(abs(c) for c in argument))
    if kind == "sigma":
        return max(sum(abs(c) for c in argument), 1)
    raise ValueError(f"kind must be growth, shape or sigma, got {kind!r}")


def origin_site(d: int) -> Site:
    return Site(tuple([0] * d), 0)
