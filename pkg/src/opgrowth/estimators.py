"""Monte Carlo estimators for path-count growth, shape, and diagnostics.

Every estimator maps independent replica sub-seeds (an indexed split of the
master seed) to per-replica statistics and reduces them with mean / standard
error; replicas can run across a process pool without changing any output.
Growth estimates default to survival-filtered counts, which share the same
limit as the plain ones but suppress the upward noise of doomed branches.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .config import Box, LatticeParams, Site, split_seed
from .counting import (
    NEG_INF,
    count_final,
    default_survival_horizon,
    surviving_count,
)
from .dynamics import evolve_front, extinction_time, front_from_sites
from .errors import EmptySubsequenceError, FitError, PreconditionError, SamplingError
from .hitting import (
    UNCONDITIONED_STREAM,
    HittingCaps,
    conditioned_sample_for_slot,
    essential_hitting,
    regen_sequence,
)

# Supercritical defaults per dimension, calibrated from estimate_tau_tail
# survival fractions (see suggest_p); not taken from any external source.
DEFAULT_P = {1: 0.8, 2: 0.5, 3: 0.4}


def _pmap(fn, items: list, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        chunk = max(1, len(items) // (4 * threads))
        return list(pool.map(fn, items, chunksize=chunk))


def _mean_se(vals: list[float]) -> tuple[float, float]:
    arr = np.asarray(vals, dtype=float)
    if arr.size == 0:
        raise SamplingError("no usable replicas")
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


def pooled_se(*ses: float) -> float:
    return math.sqrt(sum(s * s for s in ses))


@dataclass
class GrowthEstimate:
    """Point estimate of an exponential growth rate (nats per layer)."""

    direction: tuple[float, ...]
    value: float
    stderr: float
    n_used: int
    replicas: int
    method: str
    extras: dict = field(default_factory=dict)

    def chi_bound(self, params: LatticeParams) -> float:
        """Annealed ceiling log((2d+1) p); values should sit at or below it."""
        return math.log((2 * params.d + 1) * params.p)

    def to_dict(self, params: LatticeParams | None = None) -> dict:
        out = {
            "direction": list(self.direction),
            "value": self.value,
            "stderr": self.stderr,
            "n": self.n_used,
            "replicas": self.replicas,
            "method": self.method,
            "extras": self.extras,
        }
        if params is not None:
            out["params"] = params.to_dict()
        return out


# ---------------------------------------------------------------------------
# flat-direction growth


def _alpha0_worker(args) -> float | None:
    d, p, seed, slot, n, m, surviving, mode, horizon, budget = args
    params = LatticeParams(d, p, seed)
    sample = conditioned_sample_for_slot(params, slot, horizon, budget)
    child = params.with_seed(sample.seed)
    if surviving:
        rep = surviving_count(child, n, m, mode=mode)
        log_total = rep.log_total
    else:
        log_total = count_final(child, n, mode=mode).log_total()
    if log_total == NEG_INF:
        return None
    return log_total / n


def estimate_alpha0(params: LatticeParams, n: int, replicas: int = 32,
                    m: int | None = None, surviving: bool = True,
                    mode: str = "log", horizon: int | None = None,
                    attempt_budget: int = 1000, threads: int = 1) -> GrowthEstimate:
    """Growth rate of the level-n path count on survival-conditioned replicas.

    Per replica: (1/n) log of the count of open paths to level n, endpoint
    survival-filtered at horizon m by default.  Conditioning at n + m makes
    the filtered count at least 1, so the estimate is always finite.
    """
    if n < 1:
        raise PreconditionError("n must be >= 1")
    m = default_survival_horizon(n) if m is None else m
    if horizon is None:
        horizon = n + m if surviving else n
    tasks = [(params.d, params.p, params.seed, slot, n, m, surviving, mode,
              horizon, attempt_budget) for slot in range(replicas)]
    vals = [v for v in _pmap(_alpha0_worker, tasks, threads) if v is not None]
    excluded = replicas - len(vals)
    value, se = _mean_se(vals)
    return GrowthEstimate(tuple([0.0] * params.d), value, se, n, len(vals),
                          "surviving" if surviving else "plain",
                          {"m": m if surviving else None, "horizon": horizon,
                           "excluded": excluded, "mode": mode})


# ---------------------------------------------------------------------------
# directional growth along regenerating chains


def _caps_tuple(caps: HittingCaps) -> tuple[int, int, int]:
    return (caps.survival_horizon, caps.iter_cap, caps.layer_cap)


def _alpha_dir_worker(args):
    d, p, seed, slot, y, h, n_links, ct, budget = args
    params = LatticeParams(d, p, seed)
    caps = HittingCaps(*ct)
    sample = conditioned_sample_for_slot(params, slot, caps.survival_horizon, budget)
    child = params.with_seed(sample.seed)
    chain = regen_sequence(child, y, h, n_links, caps, verify=False)
    if chain.status != "ok":
        return None
    s_n = chain.S[-1]
    target = tuple(c * n_links for c in y)
    log_n = count_final(child, s_n, mode="log").log_value_at(target)
    if log_n == NEG_INF:
        return None
    return log_n / s_n, s_n / n_links


def estimate_alpha_dir(params: LatticeParams, y, h: int, n_links: int,
                       replicas: int = 8, caps: HittingCaps | None = None,
                       attempt_budget: int = 1000, threads: int = 1) -> GrowthEstimate:
    """Growth rate along the regenerating points of the (y, h) encoding.

    Per replica: log count of open paths to the n-th regenerating point,
    divided by its level S_n.  The endpoint percolates by construction, so
    the count is positive on every successful chain.
    """
    caps = caps or HittingCaps()
    y = tuple(int(c) for c in y)
    tasks = [(params.d, params.p, params.seed, slot, y, h, n_links,
              _caps_tuple(caps), attempt_budget) for slot in range(replicas)]
    outs = [o for o in _pmap(_alpha_dir_worker, tasks, threads) if o is not None]
    excluded = replicas - len(outs)
    if not outs:
        raise SamplingError("every chain failed; raise caps or replicas")
    vals = [o[0] for o in outs]
    s_mean = float(np.mean([o[1] for o in outs]))
    value, se = _mean_se(vals)
    direction = tuple(c / s_mean for c in y)
    return GrowthEstimate(direction, value, se, n_links, len(outs), "regen-subsequence",
                          {"y": list(y), "h": h, "mean_s": s_mean,
                           "mean_level": s_mean * n_links, "excluded": excluded,
                           "horizon": caps.survival_horizon})


# ---------------------------------------------------------------------------
# shape estimation (sigma-based and hull-based)


@dataclass
class MuEstimate:
    """Time-constant estimate for one direction: inf_n of mean sigma(n x)/n."""

    direction: tuple[int, ...]
    value: float
    stderr: float
    n_used: int
    table: dict[int, tuple[float, float, int]]  # n -> (mean, se, used)
    excluded: int


@dataclass
class ShapeEstimate:
    """Directional time constants mu(x); positive homogeneous by construction."""

    directions: list[tuple[int, ...]]
    mu_values: list[float]
    stderrs: list[float]
    n_used: list[int]
    method: str
    sigma0_mean: float | None = None
    sigma0_stderr: float | None = None
    entries: list[MuEstimate] = field(default_factory=list)

    def mu_of(self, z) -> float:
        """Extend to integer multiples of measured directions by homogeneity."""
        z = tuple(int(c) for c in z)
        if all(c == 0 for c in z):
            return 0.0
        for x, mu in zip(self.directions, self.mu_values):
            ks = {c // a for c, a in zip(z, x) if a != 0}
            if len(ks) == 1:
                k = ks.pop()
                if k > 0 and tuple(k * a for a in x) == z:
                    return k * mu
        raise PreconditionError(f"{z} is not a positive multiple of a measured direction")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "directions": [list(x) for x in self.directions],
            "mu": self.mu_values,
            "stderr": self.stderrs,
            "n_used": self.n_used,
            "sigma0_mean": self.sigma0_mean,
            "sigma0_stderr": self.sigma0_stderr,
        }


def _mu_worker(args):
    d, p, seed, slot, x, ct, budget = args
    params = LatticeParams(d, p, seed)
    caps = HittingCaps(*ct)
    sample = conditioned_sample_for_slot(params, slot, caps.survival_horizon, budget)
    child = params.with_seed(sample.seed)
    rec = essential_hitting(child, x, caps)
    return rec.sigma if rec.status == "ok" else None


def estimate_mu(params: LatticeParams, x, n_list: list[int], replicas: int = 64,
                caps: HittingCaps | None = None, attempt_budget: int = 1000,
                threads: int = 1) -> MuEstimate:
    """Directional time constant via hitting times of n x, taking the inf
    over n of the per-level means (its defining characterization)."""
    caps = caps or HittingCaps()
    x = tuple(int(c) for c in x)
    table: dict[int, tuple[float, float, int]] = {}
    excluded = 0
    for n in n_list:
        target = tuple(n * c for c in x)
        tasks = [(params.d, params.p, params.seed, slot, target, _caps_tuple(caps),
                  attempt_budget) for slot in range(replicas)]
        sig = [s for s in _pmap(_mu_worker, tasks, threads) if s is not None]
        excluded += replicas - len(sig)
        mean, se = _mean_se([s / n for s in sig])
        table[n] = (mean, se, len(sig))
    n_best = min(table, key=lambda k: table[k][0])
    mean, se, _used = table[n_best]
    return MuEstimate(x, mean, se, n_best, table, excluded)


def estimate_shape(params: LatticeParams, directions: list | None = None,
                   n_list: list[int] | None = None, replicas: int = 64,
                   caps: HittingCaps | None = None, threads: int = 1) -> ShapeEstimate:
    """Sigma-based shape estimate over lattice directions, plus the mean
    hitting time of the origin itself (needed by the direction grid)."""
    caps = caps or HittingCaps()
    d = params.d
    if directions is None:
        directions = []
        for axis in range(d):
            e = [0] * d
            e[axis] = 1
            directions.append(tuple(e))
            directions.append(tuple(-c for c in e))
    n_list = n_list or [1, 2, 4]
    zero = tuple([0] * d)
    tasks = [(d, params.p, params.seed, slot, zero, _caps_tuple(caps), 1000)
             for slot in range(replicas)]
    sig0 = [s for s in _pmap(_mu_worker, tasks, threads) if s is not None]
    s0_mean, s0_se = _mean_se(sig0)
    entries = [estimate_mu(params, x, n_list, replicas, caps, threads=threads)
               for x in directions]
    return ShapeEstimate([e.direction for e in entries], [e.value for e in entries],
                         [e.stderr for e in entries], [e.n_used for e in entries],
                         "sigma", s0_mean, s0_se, entries)


def _hull_worker(args):
    d, p, seed, slot, n, horizon, budget = args
    params = LatticeParams(d, p, seed)
    sample = conditioned_sample_for_slot(params, slot, horizon, budget)
    child = params.with_seed(sample.seed)
    front = front_from_sites([Site(tuple([0] * d), 0)])
    hi = [0] * d
    lo = [0] * d
    for _ in range(n):
        front = evolve_front(child, front)
        b = front.bounds()
        if b is None:
            return None
        mins, maxs = b
        hi = [max(a, b_) for a, b_ in zip(hi, maxs)]
        lo = [min(a, b_) for a, b_ in zip(lo, mins)]
    return tuple(hi), tuple(-c for c in lo)


def estimate_mu_hull(params: LatticeParams, n: int = 64, replicas: int = 64,
                     horizon: int | None = None, threads: int = 1) -> ShapeEstimate:
    """Hull-based cross-check: mu(e_i) ~ n / (hull radius along e_i at level n)."""
    horizon = horizon or max(n, 64)
    tasks = [(params.d, params.p, params.seed, slot, n, horizon, 1000)
             for slot in range(replicas)]
    outs = [o for o in _pmap(_hull_worker, tasks, threads) if o is not None]
    if not outs:
        raise SamplingError("no surviving hulls")
    d = params.d
    directions, mus, ses, ns = [], [], [], []
    for axis in range(d):
        for sign, pick in ((1, 0), (-1, 1)):
            e = [0] * d
            e[axis] = sign
            radii = [o[pick][axis] for o in outs]
            vals = [n / r for r in radii if r > 0]
            mean, se = _mean_se(vals)
            directions.append(tuple(e))
            mus.append(mean)
            ses.append(se)
            ns.append(n)
    return ShapeEstimate(directions, mus, ses, ns, "hull")


# ---------------------------------------------------------------------------
# direction grid and profile


@dataclass(frozen=True)
class DirectionGridPoint:
    """One admissible rational direction z/l with its (y, h) chain encoding."""

    z: tuple[int, ...]
    l: int
    y: tuple[int, ...]
    h: int
    target: tuple[float, ...]
    est_s: float


def build_direction_grid(params: LatticeParams, resolution: int,
                         mu_ref: ShapeEstimate,
                         grid_scale: int = 2) -> tuple[list[DirectionGridPoint], list[dict]]:
    """Chain encodings whose regenerating points head toward z/l for every
    admissible reduced fraction with numerator a multiple of a measured
    direction: (y, h) = (n0 z, ceil(n0 (l - mu(z)) / mean sigma(0))).

    Returns (grid, skipped); candidates outside the estimated unit ball are
    skipped with a note.
    """
    if resolution < 1:
        raise PreconditionError("resolution must be >= 1")
    if mu_ref.sigma0_mean is None:
        raise PreconditionError("mu_ref must carry sigma0_mean (use estimate_shape)")
    s0 = mu_ref.sigma0_mean

    def even_mu(z):
        # the shape constant is even; averaging opposite directions halves the
        # noise and keeps opposite grid points exact mirrors of each other
        mu = mu_ref.mu_of(z)
        try:
            return 0.5 * (mu + mu_ref.mu_of(tuple(-c for c in z)))
        except PreconditionError:
            return mu

    d = params.d
    zero = tuple([0] * d)
    seen: set[tuple] = set()
    grid: list[DirectionGridPoint] = []
    skipped: list[dict] = []
    # the flat direction itself
    h0 = max(1, math.ceil(grid_scale * 1.0 / s0))
    grid.append(DirectionGridPoint(zero, 1, zero, h0, tuple([0.0] * d), h0 * s0))
    for x in mu_ref.directions:
        for k in range(1, resolution + 1):
            for l in range(1, resolution + 1):
                if math.gcd(k, l) != 1:
                    continue
                z = tuple(k * c for c in x)
                key = (tuple(c / l for c in z),)
                if key in seen:
                    continue
                seen.add(key)
                mu_z = even_mu(z)
                if mu_z >= l:
                    skipped.append({"z": list(z), "l": l, "mu": mu_z,
                                    "note": "outside estimated unit ball"})
                    continue
                y = tuple(grid_scale * c for c in z)
                h = max(1, math.ceil(grid_scale * (l - mu_z) / s0))
                est_s = grid_scale * mu_z + h * s0
                target = tuple(c / est_s for c in y)
                grid.append(DirectionGridPoint(z, l, y, h, target, est_s))
    return grid, skipped


@dataclass
class GrowthProfile:
    """Directional growth estimates over a grid, with symmetry / concavity /
    maximum-location diagnostics attached."""

    grid: list[DirectionGridPoint]
    estimates: list[GrowthEstimate | None]
    mu_ref: "ShapeEstimate | None"
    diagnostics: dict = field(default_factory=dict)

    def csv_rows(self) -> list[tuple]:
        rows = []
        for pt, est in zip(self.grid, self.estimates):
            if est is not None:
                rows.append(tuple(pt.target) + (est.value, est.stderr))
        return rows


def profile_diagnostics(grid: list[DirectionGridPoint],
                        estimates: list[GrowthEstimate | None],
                        se_factor: float = 3.0) -> dict:
    idx = [i for i, e in enumerate(estimates) if e is not None]
    diag: dict = {"symmetry": [], "concavity": [], "max_at_center": None, "violations": 0}
    # symmetry under x -> -x, paired by the exact rational direction z/l
    for a in idx:
        for b in idx:
            if a < b and grid[a].l == grid[b].l and \
                    tuple(-c for c in grid[a].z) == grid[b].z:
                gap = abs(estimates[a].value - estimates[b].value)
                tol = se_factor * pooled_se(estimates[a].stderr, estimates[b].stderr)
                ok = gap <= tol
                diag["symmetry"].append({"i": a, "j": b, "gap": gap, "tol": tol, "ok": ok})
                diag["violations"] += 0 if ok else 1
    # midpoint concavity over pairs with a distinct interior grid point
    targets = [np.asarray(grid[i].target) for i in idx]
    for ai in range(len(idx)):
        for bi in range(ai + 1, len(idx)):
            mid = (targets[ai] + targets[bi]) / 2.0
            dists = [float(np.linalg.norm(t - mid)) for t in targets]
            ki = int(np.argmin(dists))
            if ki in (ai, bi):
                continue
            a, b, k = idx[ai], idx[bi], idx[ki]
            lhs = estimates[k].value
            rhs = (estimates[a].value + estimates[b].value) / 2.0
            tol = se_factor * pooled_se(estimates[k].stderr,
                                        estimates[a].stderr / 2, estimates[b].stderr / 2)
            ok = lhs >= rhs - tol
            diag["concavity"].append({"i": a, "j": b, "mid": k, "lhs": lhs,
                                      "rhs": rhs, "tol": tol, "ok": ok})
            diag["violations"] += 0 if ok else 1
    # the maximum should sit at the grid point nearest the flat direction
    norms = [float(np.linalg.norm(grid[i].target)) for i in idx]
    center = idx[int(np.argmin(norms))]
    best = idx[int(np.argmax([estimates[i].value for i in idx]))]
    tol = se_factor * pooled_se(estimates[center].stderr, estimates[best].stderr)
    ok = estimates[center].value >= estimates[best].value - tol
    diag["max_at_center"] = {"center": center, "argmax": best,
                             "gap": estimates[best].value - estimates[center].value,
                             "tol": tol, "ok": ok}
    diag["violations"] += 0 if ok else 1
    return diag


def estimate_profile(params: LatticeParams, grid: list[DirectionGridPoint],
                     n_links: int = 48, replicas: int = 8,
                     caps: HittingCaps | None = None,
                     mu_ref: ShapeEstimate | None = None,
                     threads: int = 1) -> GrowthProfile:
    """Directional estimate per grid point plus profile-level diagnostics;
    per-point sampling failures leave a None and the profile stays partial."""
    if not grid:
        raise PreconditionError("grid must be nonempty")
    caps = caps or HittingCaps()
    estimates: list[GrowthEstimate | None] = []
    for pt in grid:
        try:
            estimates.append(estimate_alpha_dir(params, pt.y, pt.h, n_links,
                                                replicas, caps, threads=threads))
        except SamplingError:
            estimates.append(None)
    diag = profile_diagnostics(grid, estimates)
    return GrowthProfile(list(grid), estimates, mu_ref, diag)


# ---------------------------------------------------------------------------
# reachable-subsequence estimate


def _subseq_worker(args):
    d, p, seed, slot, y, h, n_max, horizon, budget = args
    params = LatticeParams(d, p, seed)
    sample = conditioned_sample_for_slot(params, slot, horizon, budget)
    child = params.with_seed(sample.seed)
    # front sweep marks the reachable indices; rolling count reads them off
    front = front_from_sites([Site(tuple([0] * d), 0)])
    box = Box.cube(d, 0)
    vals = np.full(box.shape, NEG_INF)
    vals[box.index(tuple([0] * d))] = 0.0
    last = None
    kept = 0
    for t in range(1, n_max * h + 1):
        front = evolve_front(child, front)
        box2 = Box.cube(d, t)
        vals = kernels.count_step(vals, box, t, box2, child.seed, child.threshold)
        box = box2
        if t % h == 0:
            k = t // h
            target = tuple(k * c for c in y)
            if front.contains(target):
                kept += 1
                lv = float(vals[box.index(target)])
                last = (k, lv / (k * h))
    if last is None:
        return None
    return last[1], last[0], kept


def directional_subsequence_estimate(params: LatticeParams, y, h: int, n_max: int,
                                     replicas: int = 16, horizon: int | None = None,
                                     attempt_budget: int = 1000,
                                     threads: int = 1) -> GrowthEstimate:
    """Growth along the indices k with (0,0) -> k (y, h), read at the last
    reachable index: (1/(k h)) log of the count at k (y, h)."""
    if n_max < 1 or h < 1:
        raise PreconditionError("n_max and h must be >= 1")
    y = tuple(int(c) for c in y)
    horizon = horizon or n_max * h
    tasks = [(params.d, params.p, params.seed, slot, y, h, n_max, horizon,
              attempt_budget) for slot in range(replicas)]
    outs = [o for o in _pmap(_subseq_worker, tasks, threads) if o is not None]
    if not outs:
        raise EmptySubsequenceError(
            f"no replica ever reached a multiple of ({y}, {h}) up to {n_max}"
        )
    vals = [o[0] for o in outs]
    value, se = _mean_se(vals)
    mean_last = float(np.mean([o[1] for o in outs]))
    kept_frac = float(np.mean([o[2] / n_max for o in outs]))
    return GrowthEstimate(tuple(c / h for c in y), value, se, n_max, len(outs),
                          "reachable-subsequence",
                          {"y": list(y), "h": h, "mean_last_index": mean_last,
                           "kept_fraction": kept_frac, "horizon": horizon,
                           "excluded": replicas - len(outs)})


# ---------------------------------------------------------------------------
# martingale tracking


@dataclass
class MartingaleTrace:
    """Per-replica log of the count normalized by its annealed mean."""

    levels: list[int]
    log_w: np.ndarray  # (replicas, levels)
    params: LatticeParams

    def w(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_w)

    def median_log_w(self) -> np.ndarray:
        return np.median(self.log_w, axis=0)

    def summary(self) -> dict:
        med = self.median_log_w()
        return {"levels": self.levels,
                "median_log_w": [float(v) for v in med],
                "replicas": int(self.log_w.shape[0])}


def _martingale_worker(args):
    d, p, seed, rep, levels = args
    params = LatticeParams(d, p, seed)
    child = params.with_seed(split_seed(seed, UNCONDITIONED_STREAM, rep))
    n_max = max(levels)
    box = Box.cube(d, 0)
    vals = np.full(box.shape, NEG_INF)
    vals[box.index(tuple([0] * d))] = 0.0
    want = set(levels)
    out = {}
    if 0 in want:
        out[0] = 0.0
    log_mean_step = math.log((2 * d + 1) * p)
    for t in range(1, n_max + 1):
        box2 = Box.cube(d, t)
        vals = kernels.count_step(vals, box, t, box2, child.seed, child.threshold)
        box = box2
        m = float(np.max(vals))
        if m == NEG_INF:
            # extinct: the normalized count is 0 from here on
            for t2 in want:
                if t2 >= t:
                    out[t2] = NEG_INF
            break
        if t in want:
            out[t] = m + math.log(float(np.sum(np.exp(vals - m)))) - t * log_mean_step
    return [out[t] for t in levels]


def track_martingale(params: LatticeParams, n_max: int, replicas: int,
                     levels: list[int] | None = None,
                     threads: int = 1) -> MartingaleTrace:
    """Unconditioned replicas of the count over its annealed mean ((2d+1)p)^n.

    Stored in the log domain; a dead cluster contributes -inf from its
    extinction level on (the normalized count is 0 there).
    """
    if params.p <= 0.0:
        raise PreconditionError("the normalized count needs p > 0")
    levels = list(range(n_max + 1)) if levels is None else sorted(set(levels))
    tasks = [(params.d, params.p, params.seed, rep, levels) for rep in range(replicas)]
    rows = _pmap(_martingale_worker, tasks, threads)
    return MartingaleTrace(levels, np.asarray(rows, dtype=float), params)


# ---------------------------------------------------------------------------
# extinction-time tail


@dataclass
class TauTailEstimate:
    """Empirical extinction-tail table with a fitted exponential envelope."""

    a_fit: float
    b_fit: float
    levels: list[int]
    tail: list[float]      # P(level <= tau < cap)
    counts: list[int]
    survival_fraction: float
    replicas: int
    cap: int

    def to_dict(self) -> dict:
        return {"a_fit": self.a_fit, "b_fit": self.b_fit, "levels": self.levels,
                "tail": self.tail, "counts": self.counts,
                "survival_fraction": self.survival_fraction,
                "replicas": self.replicas, "cap": self.cap}


def _tau_worker(args):
    d, p, seed, rep, cap = args
    params = LatticeParams(d, p, seed)
    child = params.with_seed(split_seed(seed, UNCONDITIONED_STREAM, rep))
    t = extinction_time(child, Site(tuple([0] * d), 0), cap)
    return -1 if t is None else t


def estimate_tau_tail(params: LatticeParams, replicas: int = 2000, t_max: int = 128,
                      min_count: int = 4, threads: int = 1) -> TauTailEstimate:
    """Empirical P(n <= tau < cap) with a least-squares exponential fit.

    Also reports the surviving fraction, the working estimate of the
    percolation probability used to calibrate default p per dimension.
    """
    tasks = [(params.d, params.p, params.seed, rep, t_max) for rep in range(replicas)]
    taus = _pmap(_tau_worker, tasks, threads)
    finite = sorted(t for t in taus if t >= 0)
    survivors = sum(1 for t in taus if t < 0)
    if not finite or survivors == 0:
        raise FitError(
            f"degenerate tail: {len(finite)} extinctions, {survivors} survivors"
        )
    levels = list(range(1, max(finite) + 1))
    counts = [sum(1 for t in finite if t >= lv) for lv in levels]
    tail = [c / replicas for c in counts]
    pts = [(lv, math.log(tl)) for lv, c, tl in zip(levels, counts, tail) if c >= min_count]
    if len(pts) < 3:
        raise FitError(f"only {len(pts)} usable tail points (min_count={min_count})")
    xs = np.array([p_[0] for p_ in pts])
    ys = np.array([p_[1] for p_ in pts])
    slope, intercept = np.polyfit(xs, ys, 1)
    return TauTailEstimate(math.exp(intercept), -float(slope), levels, tail, counts,
                           survivors / replicas, replicas, t_max)


def suggest_p(d: int, seed: int = 0, grid: list[float] | None = None,
              replicas: int = 300, cap: int = 128,
              target_survival: float = 0.5) -> dict:
    """Smallest grid p whose origin cluster survives the cap with the target
    frequency; the source of the DEFAULT_P table."""
    grid = grid or [0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.70, 0.80]
    table = {}
    chosen = None
    for p in grid:
        params = LatticeParams(d, p, seed)
        alive = 0
        for rep in range(replicas):
            child = params.with_seed(split_seed(seed, UNCONDITIONED_STREAM, rep))
            if extinction_time(child, Site(tuple([0] * d), 0), cap) is None:
                alive += 1
        table[p] = alive / replicas
        if chosen is None and table[p] >= target_survival:
            chosen = p
    return {"d": d, "chosen": chosen, "table": table, "cap": cap, "replicas": replicas}
