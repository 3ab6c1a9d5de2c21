"""Essential hitting times, regenerating chains, and survival conditioning.

The essential hitting time of a target x is found by alternating two
stopping times: the next layer after v_k at which x is occupied by the
origin's cluster (u_{k+1}), and the extinction time of a cluster restarted
at that hit (v_{k+1}).  The loop stops at the first restart classified as
percolating; its hit layer regenerates the conditioned process.  Chaining
one hit of y with h hits of 0 under the induced re-anchorings yields the
regenerating times whose partial sums carry the subadditive estimates.

Percolation is proxied by surviving a configurable horizon throughout,
matching dynamics.survives; every record carries the caps it used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

from . import kernels
from .config import LatticeParams, Site, TranslationVector, split_seed
from .dynamics import DEFAULT_HORIZON, evolve_front, extinction_time, front_from_sites, survives
from .errors import InsufficientChainError, PreconditionError, SamplingError

UNCONDITIONED_STREAM = 0  # split_seed stream tags; keep replicas and attempts apart
CONDITIONED_STREAM = 1


@dataclass(frozen=True)
class HittingCaps:
    """Operational caps: the percolation proxy horizon, the number of
    restart rounds allowed, and the absolute layer budget of the search."""

    survival_horizon: int = DEFAULT_HORIZON
    iter_cap: int = 10_000
    layer_cap: int = 8192


@dataclass
class HittingRecord:
    """Outcome of the restart loop for one target.

    u_seq holds u_0..u_K and v_seq holds v_0..v_K with None marking the
    final restart classified as percolating.  status is "ok" when the loop
    succeeded, "died" when the origin cluster went extinct first, and
    "inconclusive" when a cap was hit.
    """

    x: tuple[int, ...]
    u_seq: list[int]
    v_seq: list[int | None]
    K: int | None
    sigma: int | None
    horizon: int
    status: str
    caps: HittingCaps = field(repr=False, default=HittingCaps())

    def to_dict(self) -> dict:
        return {
            "x": list(self.x),
            "u_seq": self.u_seq,
            "v_seq": self.v_seq,
            "K": self.K,
            "sigma": self.sigma,
            "horizon": self.horizon,
            "status": self.status,
        }


def essential_hitting(params: LatticeParams, x, caps: HittingCaps | None = None,
                      env: TranslationVector | None = None,
                      force_python: bool = False) -> HittingRecord:
    """Run the u/v restart loop for target x in the (re-anchored) environment.

    Returns a record with sigma = u_K on success; the caller is expected to
    feed environments whose origin cluster percolates (conditioned samples),
    and gets a "died" record otherwise.  The compiled backend runs the loop
    in C; force_python exercises the reference loop (they must agree).
    """
    caps = caps or HittingCaps()
    x = tuple(int(c) for c in x)
    d = params.d
    if len(x) != d:
        raise PreconditionError(f"target has {len(x)} coords, expected {d}")
    if not force_python and kernels.has_hitting_core():
        code, u_seq, v_seq = kernels.hitting_core(
            d, x, params.seed, params.threshold, env,
            caps.survival_horizon, caps.iter_cap, caps.layer_cap)
        if code == 0:
            return HittingRecord(x, u_seq, v_seq + [None], len(u_seq) - 1, u_seq[-1],
                                 caps.survival_horizon, "ok", caps)
        if code == 1:
            return HittingRecord(x, u_seq, v_seq, len(u_seq) - 1, u_seq[-1],
                                 caps.survival_horizon, "died", caps)
        return HittingRecord(x, u_seq, v_seq, None, None,
                             caps.survival_horizon, "inconclusive", caps)
    u_seq: list[int] = [0]
    v_seq: list[int | None] = [0]
    front = front_from_sites([Site(tuple([0] * d), 0)])
    t = 0
    k = 0
    while k < caps.iter_cap:
        v_k = v_seq[-1]
        # u_{k+1}: first layer after v_k where x is occupied again
        u_next = None
        if t > v_k and front.contains(x):
            u_next = t
        while u_next is None and t < caps.layer_cap:
            front = evolve_front(params, front, env=env)
            t += 1
            if front.is_empty:
                return HittingRecord(x, u_seq, v_seq, k, u_seq[-1], caps.survival_horizon,
                                     "died", caps)
            if t > v_k and front.contains(x):
                u_next = t
        if u_next is None:
            return HittingRecord(x, u_seq, v_seq, None, None, caps.survival_horizon,
                                 "inconclusive", caps)
        u_seq.append(u_next)
        # v_{k+1}: hit layer plus the lifetime of the cluster restarted there
        tau = extinction_time(params, Site(x, u_next), caps.survival_horizon, env=env)
        if tau is None:
            v_seq.append(None)
            return HittingRecord(x, u_seq, v_seq, k + 1, u_next, caps.survival_horizon,
                                 "ok", caps)
        v_seq.append(u_next + tau)
        k += 1
    return HittingRecord(x, u_seq, v_seq, None, None, caps.survival_horizon,
                         "inconclusive", caps)


@dataclass
class RegenTime:
    """One regenerating time: a hit of y followed by h re-anchored hits of 0."""

    y: tuple[int, ...]
    h: int
    s: int | None
    parts: list[int]
    anchor: TranslationVector | None
    status: str


def regen_time(params: LatticeParams, y, h: int, caps: HittingCaps | None = None,
               env: TranslationVector | None = None) -> RegenTime:
    """Compose sigma(y) with h successive sigma(0), each in the environment
    re-anchored at the previous regeneration point; the final anchor sits at
    (y, s) relative to the input environment."""
    if h < 1:
        raise PreconditionError("h must be >= 1")
    caps = caps or HittingCaps()
    y = tuple(int(c) for c in y)
    d = params.d
    zero = tuple([0] * d)
    cur = TranslationVector.identity(d) if env is None else env
    parts: list[int] = []
    for target in [y] + [zero] * h:
        rec = essential_hitting(params, target, caps, cur)
        if rec.status != "ok":
            return RegenTime(y, h, None, parts, None, rec.status)
        parts.append(rec.sigma)
        cur = cur.shifted(target, rec.sigma)
    return RegenTime(y, h, sum(parts), parts, cur, "ok")


@dataclass
class RegenChain:
    """Partial sums of i.i.d.-by-construction regenerating times.

    S[k-1] is the level of the k-th regenerating point (k y, S_k); on a
    fully successful chain reachability of every point from the origin is
    certified by a fresh front sweep when verify was requested.
    """

    y: tuple[int, ...]
    h: int
    s_vals: list[int]
    S: list[int]
    requested_links: int
    status: str
    verified: bool | None
    caps: HittingCaps = field(repr=False, default=HittingCaps())

    def points(self) -> list[tuple[tuple[int, ...], int]]:
        return [(tuple(c * (k + 1) for c in self.y), s) for k, s in enumerate(self.S)]

    def csv_rows(self) -> list[tuple[int, int, int]]:
        return [(k + 1, self.s_vals[k], self.S[k]) for k in range(len(self.S))]


def regen_sequence(params: LatticeParams, y, h: int, n_links: int,
                   caps: HittingCaps | None = None,
                   env: TranslationVector | None = None,
                   verify: bool = True) -> RegenChain:
    """Iterate regen_time n_links times under the induced re-anchorings."""
    if n_links < 1:
        raise PreconditionError("n_links must be >= 1")
    caps = caps or HittingCaps()
    y = tuple(int(c) for c in y)
    d = params.d
    cur = TranslationVector.identity(d) if env is None else env
    s_vals: list[int] = []
    sums: list[int] = []
    status = "ok"
    for _ in range(n_links):
        rt = regen_time(params, y, h, caps, cur)
        if rt.status != "ok":
            status = "truncated"
            break
        s_vals.append(rt.s)
        sums.append((sums[-1] if sums else 0) + rt.s)
        cur = cur.shifted(y, rt.s)
    verified = None
    if verify and sums:
        verified = _verify_chain(params, y, sums, env)
    return RegenChain(y, h, s_vals, sums, n_links, status, verified, caps)


def _verify_chain(params: LatticeParams, y: tuple[int, ...], sums: list[int],
                  env: TranslationVector | None) -> bool:
    """Fresh reachability certificate: (0,0) -> (k y, S_k) for every link."""
    d = params.d
    front = front_from_sites([Site(tuple([0] * d), 0)])
    targets = {s: tuple(c * (k + 1) for c in y) for k, s in enumerate(sums)}
    for t in range(1, sums[-1] + 1):
        front = evolve_front(params, front, env=env)
        if t in targets and not front.contains(targets[t]):
            return False
    return True


def first_passage_index(chain: RegenChain, n: int) -> int:
    """phi(n): smallest k with S_k >= n (S_0 = 0, so phi(n <= 0) = 0)."""
    if n <= 0:
        return 0
    for i, s in enumerate(chain.S):
        if s >= n:
            return i + 1
    raise InsufficientChainError(
        f"chain reaches level {chain.S[-1] if chain.S else 0} < {n}"
    )


@dataclass(frozen=True)
class ConditionedSample:
    """An accepted environment seed under the survival-conditioned law proxy."""

    seed: int
    slot: int
    attempts: int
    horizon: int


def conditioned_sample_for_slot(params: LatticeParams, slot: int, horizon: int,
                                attempt_budget: int = 1000) -> ConditionedSample:
    """First accepted seed of the slot's attempt stream (rejection sampling)."""
    d = params.d
    origin = Site(tuple([0] * d), 0)
    for j in range(attempt_budget):
        child = split_seed(params.seed, CONDITIONED_STREAM, slot, j)
        if survives(params.with_seed(child), origin, horizon):
            return ConditionedSample(child, slot, j + 1, horizon)
    raise SamplingError(
        f"slot {slot}: no accepted seed in {attempt_budget} attempts at p={params.p}"
    )


def conditioned_sampler(params: LatticeParams, horizon: int = DEFAULT_HORIZON,
                        budget: int = 100_000, min_rate: float = 1e-3,
                        rate_check_after: int = 1000) -> Iterator[ConditionedSample]:
    """Stream of accepted sub-seeds; aborts once the attempt budget is spent
    or the running acceptance rate collapses below min_rate."""
    tried = 0
    accepted = 0
    slot = 0
    d = params.d
    origin = Site(tuple([0] * d), 0)
    while True:
        j = 0
        while True:
            if tried >= budget:
                raise SamplingError(
                    f"attempt budget {budget} exhausted: {accepted}/{tried} accepted"
                )
            child = split_seed(params.seed, CONDITIONED_STREAM, slot, j)
            tried += 1
            ok = survives(params.with_seed(child), origin, horizon)
            if not ok and tried >= rate_check_after and accepted / tried < min_rate:
                raise SamplingError(
                    f"acceptance rate {accepted}/{tried} below {min_rate} at p={params.p}"
                )
            if ok:
                accepted += 1
                yield ConditionedSample(child, slot, j + 1, horizon)
                slot += 1
                break
            j += 1


def acceptance_rate(samples: list[ConditionedSample]) -> float:
    """Fraction of attempts accepted; estimates survival past the horizon."""
    tries = sum(s.attempts for s in samples)
    return len(samples) / tries if tries else math.nan


def write_chain_csv(chain: RegenChain, path: str) -> None:
    """Chain dump: one row (k, s_k, S_k) per link."""
    lines = ["k,s_k,S_k"] + [f"{k},{s},{S}" for k, s, S in chain.csv_rows()]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
