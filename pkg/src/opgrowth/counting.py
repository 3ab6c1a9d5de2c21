"""Open-path counting by forward dynamic programming.

Two arithmetic modes share one recursion: exact (arbitrary-precision
integers in a sparse dict, for validation at small depth) and log
(float64 layers accumulated with per-site max-shifted log-sum-exp, stable
to thousands of layers).  Final-layer counts can be filtered by endpoint
survival and summed over regions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .config import Box, LatticeParams, Site, TranslationVector, open_at, step_offsets
from .dynamics import survival_mask
from .errors import (
    PreconditionError,
    ResourceLimitError,
    UndefinedRatioError,
    WindowError,
)

NEG_INF = float("-inf")


def _logsumexp(a: np.ndarray) -> float:
    if a.size == 0:
        return NEG_INF
    m = float(np.max(a))
    if m == NEG_INF:
        return NEG_INF
    return m + float(np.log(np.sum(np.exp(a - m))))


@dataclass
class CountLayer:
    """Per-site open-path counts at one layer.

    Exact mode keeps a sparse {site: int} map; log mode keeps a float64
    array over the window where absent/zero counts are -inf.
    """

    t: int
    mode: str
    box: Box
    values: dict | np.ndarray

    def log_value_at(self, z: Sequence[int]) -> float:
        z = tuple(int(c) for c in z)
        if self.mode == "exact":
            c = self.values.get(z, 0)
            return math.log(c) if c > 0 else NEG_INF
        if not self.box.contains(z):
            return NEG_INF
        return float(self.values[self.box.index(z)])

    def value_at(self, z: Sequence[int]):
        z = tuple(int(c) for c in z)
        if self.mode == "exact":
            return self.values.get(z, 0)
        return self.log_value_at(z)

    def support(self) -> set[tuple[int, ...]]:
        if self.mode == "exact":
            return {z for z, c in self.values.items() if c > 0}
        idx = np.argwhere(np.isfinite(self.values))
        return {tuple(int(c + lo) for c, lo in zip(row, self.box.lo)) for row in idx}

    def log_total(self) -> float:
        if self.mode == "exact":
            tot = sum(self.values.values())
            return math.log(tot) if tot > 0 else NEG_INF
        return _logsumexp(np.asarray(self.values).reshape(-1))

    def total(self) -> int | None:
        if self.mode == "exact":
            return sum(self.values.values())
        return None


@dataclass(frozen=True)
class RegionSpec:
    """Decidable endpoint region: everything, one point, an integer box, or
    a real box scaled by the layer index (closed: boundary points count)."""

    kind: str
    point: tuple[int, ...] | None = None
    box: Box | None = None
    scaled_lo: tuple[float, ...] | None = None
    scaled_hi: tuple[float, ...] | None = None

    @classmethod
    def all(cls) -> "RegionSpec":
        return cls("all")

    @classmethod
    def at(cls, z: Sequence[int]) -> "RegionSpec":
        return cls("point", point=tuple(int(c) for c in z))

    @classmethod
    def in_box(cls, box: Box) -> "RegionSpec":
        return cls("box", box=box)

    @classmethod
    def scaled(cls, lo: Sequence[float], hi: Sequence[float]) -> "RegionSpec":
        lo = tuple(float(c) for c in lo)
        hi = tuple(float(c) for c in hi)
        if any(a > b for a, b in zip(lo, hi)):
            raise PreconditionError("scaled region must have lo <= hi per axis")
        return cls("scaled", scaled_lo=lo, scaled_hi=hi)

    def contains(self, z: Sequence[int], n: int) -> bool:
        if self.kind == "all":
            return True
        if self.kind == "point":
            return tuple(z) == self.point
        if self.kind == "box":
            return self.box.contains(z)
        if n == 0:
            return all(c == 0 for c in z) and all(
                a <= 0.0 <= b for a, b in zip(self.scaled_lo, self.scaled_hi)
            )
        return all(a * n <= c <= b * n for a, c, b in zip(self.scaled_lo, z, self.scaled_hi))

    def mask(self, box: Box, n: int) -> np.ndarray:
        if self.kind == "all":
            return np.ones(box.shape, dtype=bool)
        out = np.ones(box.shape, dtype=bool)
        for i in range(box.d):
            coords = np.arange(box.lo[i], box.hi[i] + 1)
            if self.kind == "point":
                ax = coords == self.point[i]
            elif self.kind == "box":
                ax = (coords >= self.box.lo[i]) & (coords <= self.box.hi[i])
            elif n == 0:
                ax = (coords == 0) & (self.scaled_lo[i] <= 0.0 <= self.scaled_hi[i])
            else:
                ax = (coords >= self.scaled_lo[i] * n) & (coords <= self.scaled_hi[i] * n)
            shape = [1] * box.d
            shape[i] = -1
            out &= ax.reshape(shape)
        return out

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.point is not None:
            d["point"] = list(self.point)
        if self.box is not None:
            d["box"] = {"lo": list(self.box.lo), "hi": list(self.box.hi)}
        if self.scaled_lo is not None:
            d["scaled_lo"] = list(self.scaled_lo)
            d["scaled_hi"] = list(self.scaled_hi)
        return d


@dataclass
class CountReport:
    """Regional sum of final-layer counts, exact or in the log domain."""

    n: int
    region: RegionSpec
    mode: str
    total: int | None
    log_total: float
    survival_horizon: int | None
    params: LatticeParams

    def linear_total(self) -> float:
        if self.total is not None:
            return float(self.total)
        return math.exp(self.log_total) if self.log_total > NEG_INF else 0.0

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "region": self.region.to_dict(),
            "mode": self.mode,
            "total": self.total,
            "log_total": None if self.log_total == NEG_INF else self.log_total,
            "survival_horizon": self.survival_horizon,
            "seed": self.params.seed,
            "params": self.params.to_dict(),
        }


def _start_site(params: LatticeParams, start: Site | None) -> Site:
    return Site(tuple([0] * params.d), 0) if start is None else start


def _layer_box(start: Site, k: int, window: Box | None, d: int) -> Box:
    box = Box.cube(d, k, center=start.z)
    if window is not None:
        inter = box.intersect(window)
        if inter is None:
            raise WindowError("window does not meet the counting cone")
        box = inter
    return box.check_addressable()


def _exact_layer(params: LatticeParams, vals: dict, t_img: int,
                 env: TranslationVector | None, window: Box | None) -> dict:
    offs = step_offsets(params.d)
    nxt: dict = {}
    for z, c in vals.items():
        if c == 0:
            continue
        for dirn, off in enumerate(offs):
            if open_at(params, z, t_img, dirn, env):
                z2 = tuple(a + b for a, b in zip(z, off))
                if window is not None and not window.contains(z2):
                    continue
                nxt[z2] = nxt.get(z2, 0) + c
    return nxt


def count_final(params: LatticeParams, n: int, mode: str = "log",
                start: Site | None = None, env: TranslationVector | None = None,
                window: Box | None = None, guard_sites: int = 5_000_000) -> CountLayer:
    """Final-layer counts only (rolling layers; memory stays one window)."""
    if n < 0:
        raise PreconditionError("n must be >= 0")
    if mode not in ("exact", "log"):
        raise ValueError(f"mode must be exact or log, got {mode!r}")
    start = _start_site(params, start)
    if _layer_box(start, n, window, params.d).size > guard_sites:
        raise ResourceLimitError(
            f"final window exceeds {guard_sites} sites; pass a window or raise the guard"
        )
    if mode == "exact":
        vals: dict = {start.z: 1}
        for k in range(1, n + 1):
            vals = _exact_layer(params, vals, start.t + k, env, window)
        return CountLayer(start.t + n, "exact", _layer_box(start, n, window, params.d), vals)
    box = _layer_box(start, 0, window, params.d)
    arr = np.full(box.shape, NEG_INF)
    arr[box.index(start.z)] = 0.0
    for k in range(1, n + 1):
        box2 = _layer_box(start, k, window, params.d)
        arr = kernels.count_step(arr, box, start.t + k, box2,
                                 params.seed, params.threshold, env)
        box = box2
    return CountLayer(start.t + n, "log", box, arr)


def count_forward(params: LatticeParams, n: int, mode: str = "log",
                  start: Site | None = None, env: TranslationVector | None = None,
                  window: Box | None = None, guard_sites: int = 5_000_000,
                  guard_total: int = 20_000_000) -> list[CountLayer]:
    """All count layers t = 0..n.

    Layer 0 is a unit count at the start site; layer t+1 at z' sums the
    layer-t counts over the 2d+1 inflow edges that are open.
    """
    if n < 0:
        raise PreconditionError("n must be >= 0")
    if mode not in ("exact", "log"):
        raise ValueError(f"mode must be exact or log, got {mode!r}")
    start = _start_site(params, start)
    total_sites = sum(_layer_box(start, k, window, params.d).size for k in range(n + 1))
    if total_sites > guard_total:
        raise ResourceLimitError(
            f"retaining {total_sites} sites exceeds {guard_total}; "
            "use count_final or pass a window"
        )
    if _layer_box(start, n, window, params.d).size > guard_sites:
        raise ResourceLimitError("final window exceeds the per-layer site guard")
    layers: list[CountLayer] = []
    if mode == "exact":
        vals: dict = {start.z: 1}
        layers.append(CountLayer(start.t, "exact", _layer_box(start, 0, window, params.d), vals))
        for k in range(1, n + 1):
            vals = _exact_layer(params, vals, start.t + k, env, window)
            layers.append(CountLayer(start.t + k, "exact",
                                     _layer_box(start, k, window, params.d), dict(vals)))
        return layers
    box = _layer_box(start, 0, window, params.d)
    arr = np.full(box.shape, NEG_INF)
    arr[box.index(start.z)] = 0.0
    layers.append(CountLayer(start.t, "log", box, arr))
    for k in range(1, n + 1):
        box2 = _layer_box(start, k, window, params.d)
        arr = kernels.count_step(arr, box, start.t + k, box2,
                                 params.seed, params.threshold, env)
        box = box2
        layers.append(CountLayer(start.t + k, "log", box, arr))
    return layers


def count_region(layers: list[CountLayer] | CountLayer,
                 region: RegionSpec, params: LatticeParams,
                 n: int | None = None,
                 survival_horizon: int | None = None) -> CountReport:
    """Sum the final-layer counts over a region (scaled regions scale by n)."""
    layer = layers[-1] if isinstance(layers, list) else layers
    n = layer.t if n is None else n
    if layer.mode == "exact":
        tot = sum(c for z, c in layer.values.items() if region.contains(z, n))
        log_tot = math.log(tot) if tot > 0 else NEG_INF
        return CountReport(n, region, "exact", tot, log_tot, survival_horizon, params)
    mask = region.mask(layer.box, n)
    vals = np.asarray(layer.values)[mask]
    return CountReport(n, region, "log", None, _logsumexp(vals), survival_horizon, params)


def _apply_survival(params: LatticeParams, layer: CountLayer, m: int,
                    env: TranslationVector | None) -> CountLayer:
    alive = survival_mask(params, layer.box, layer.t, m, env=env)
    if layer.mode == "exact":
        kept = {z: c for z, c in layer.values.items()
                if layer.box.contains(z) and alive[layer.box.index(z)]}
        return CountLayer(layer.t, "exact", layer.box, kept)
    vals = np.where(alive, layer.values, NEG_INF)
    return CountLayer(layer.t, "log", layer.box, vals)


def surviving_count(params: LatticeParams, n: int, m: int,
                    region: RegionSpec | None = None, mode: str = "log",
                    start: Site | None = None, env: TranslationVector | None = None,
                    window: Box | None = None) -> CountReport:
    """Counts restricted to paths whose endpoint stays alive m more layers.

    Implemented by masking the final layer with a backward survival sweep
    before the regional sum, so one DP serves every region.
    """
    if m < 1:
        raise PreconditionError("survival horizon m must be >= 1")
    region = RegionSpec.all() if region is None else region
    layer = count_final(params, n, mode=mode, start=start, env=env, window=window)
    masked = _apply_survival(params, layer, m, env)
    return count_region(masked, region, params, n=n, survival_horizon=m)


def default_survival_horizon(n: int) -> int:
    """Endpoint-survival horizon used by the growth estimators: ceil(n / 4)."""
    return max(1, math.ceil(0.25 * n))


def concat_check(params: LatticeParams, a: Site, b: Site, c: Site,
                 env: TranslationVector | None = None) -> bool:
    """Verify N(a,c) >= N(a,b) * N(b,c) on this configuration (exact counts)."""
    if not a.t < b.t < c.t:
        raise PreconditionError("sites must be strictly increasing in time")
    n_ab = count_final(params, b.t - a.t, "exact", start=a, env=env).values.get(b.z, 0)
    n_bc = count_final(params, c.t - b.t, "exact", start=b, env=env).values.get(c.z, 0)
    n_ac = count_final(params, c.t - a.t, "exact", start=a, env=env).values.get(c.z, 0)
    return n_ac >= n_ab * n_bc


def ldp_ratio(params: LatticeParams, n: int, region: RegionSpec,
              m: int | None = None, start: Site | None = None,
              env: TranslationVector | None = None) -> float:
    """(1/n) * (log count into the region - log total count) at layer n.

    With m set, both counts are endpoint-survival filtered at horizon m.
    Returns -inf when the region misses every counted endpoint; raises when
    the total itself is zero.
    """
    if n < 1:
        raise PreconditionError("n must be >= 1")
    layer = count_final(params, n, mode="log", start=start, env=env)
    if m is not None:
        layer = _apply_survival(params, layer, m, env)
    log_all = layer.log_total()
    if log_all == NEG_INF:
        raise UndefinedRatioError("total path count at level n is zero")
    log_reg = count_region(layer, region, params, n=n).log_total
    if log_reg == NEG_INF:
        return NEG_INF
    return (log_reg - log_all) / n
