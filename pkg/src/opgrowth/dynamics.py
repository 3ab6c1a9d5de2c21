"""Front evolution, extinction times, and coupled zones over finite windows.

Occupied sets are boolean layers over axis-aligned boxes that grow with the
light cone.  Everything runs in an optionally re-anchored environment
(forward or time-reversed), so clusters can be restarted anywhere without
touching the underlying seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .config import Box, LatticeParams, Site, TranslationVector
from .errors import PreconditionError, WindowError

DEFAULT_HORIZON = 256  # layers a cluster must stay alive to count as percolating

_BITS_MAGIC = b"OPGB"


@dataclass
class Front:
    """Occupied spatial set at one layer, stored over a window box."""

    t: int
    box: Box
    bits: np.ndarray

    def __post_init__(self) -> None:
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.shape != self.box.shape:
            raise WindowError(
                f"bits shape {self.bits.shape} != window shape {self.box.shape}"
            )

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    @property
    def is_empty(self) -> bool:
        return not self.bits.any()

    def occupied(self) -> set[tuple[int, ...]]:
        idx = np.argwhere(self.bits)
        return {tuple(int(c + lo) for c, lo in zip(row, self.box.lo)) for row in idx}

    def contains(self, z: Sequence[int]) -> bool:
        return self.box.contains(z) and bool(self.bits[self.box.index(z)])

    def bounds(self) -> tuple[tuple[int, ...], tuple[int, ...]] | None:
        """Per-axis (min, max) of the occupied set, or None when empty."""
        if self.is_empty:
            return None
        idx = np.argwhere(self.bits)
        mins = tuple(int(m + lo) for m, lo in zip(idx.min(axis=0), self.box.lo))
        maxs = tuple(int(m + lo) for m, lo in zip(idx.max(axis=0), self.box.lo))
        return mins, maxs

    def restricted(self, box: Box) -> "Front":
        out = np.zeros(box.shape, dtype=bool)
        common = self.box.intersect(box)
        if common is not None:
            src = tuple(
                slice(a - lo, b - lo + 1) for a, b, lo in zip(common.lo, common.hi, self.box.lo)
            )
            dst = tuple(
                slice(a - lo, b - lo + 1) for a, b, lo in zip(common.lo, common.hi, box.lo)
            )
            out[dst] = self.bits[src]
        return Front(self.t, box, out)


def front_from_sites(sites: Iterable[Site] | Iterable[tuple[int, ...]], t: int | None = None,
                     box: Box | None = None) -> Front:
    """Build a layer from explicit sites; all must share one layer."""
    pts = []
    for s in sites:
        if isinstance(s, Site):
            if t is None:
                t = s.t
            elif s.t != t:
                raise PreconditionError("start sites must share one layer")
            pts.append(s.z)
        else:
            pts.append(tuple(int(c) for c in s))
    if not pts:
        raise PreconditionError("start set must be nonempty")
    if t is None:
        t = 0
    d = len(pts[0])
    if box is None:
        lo = tuple(min(p[i] for p in pts) for i in range(d))
        hi = tuple(max(p[i] for p in pts) for i in range(d))
        box = Box(lo, hi)
    bits = np.zeros(box.shape, dtype=bool)
    for p in pts:
        bits[box.index(p)] = True
    return Front(t, box, bits)


def evolve_front(params: LatticeParams, front: Front,
                 env: TranslationVector | None = None,
                 clip: Box | None = None) -> Front:
    """One layer of the reachability dynamics.

    A site is occupied at t+1 iff one of its 2d+1 inflow edges is open and
    its source was occupied.  The window inflates by one per axis unless a
    clip box restricts it (restriction = dynamics on the clipped subgraph).
    """
    box_out = front.box.inflate(1)
    if clip is not None:
        inter = box_out.intersect(clip)
        if inter is None:
            raise WindowError("clip box does not meet the evolved window")
        box_out = inter
    box_out.check_addressable()
    bits = kernels.front_step(front.bits, front.box, front.t + 1, box_out,
                              params.seed, params.threshold, env)
    return Front(front.t + 1, box_out, bits)


@dataclass
class ClusterTrace:
    """Fronts of one cluster for t = 0..t_max plus its extinction layer.

    tau is the first empty layer; None means the cluster was still alive at
    the cap (recorded in t_max) and is treated as percolating.
    """

    fronts: list[Front]
    t_max: int
    tau: int | None

    @property
    def survived(self) -> bool:
        return self.tau is None

    def hull(self) -> Front:
        """Union of all fronts, on the final window."""
        box = self.fronts[-1].box
        bits = np.zeros(box.shape, dtype=bool)
        acc = Front(self.fronts[-1].t, box, bits)
        for f in self.fronts:
            acc.bits |= f.restricted(box).bits
        return acc


def run_cluster(params: LatticeParams, start: Iterable[Site] | Front, t_max: int,
                env: TranslationVector | None = None,
                clip: Box | None = None) -> ClusterTrace:
    """Evolve a start set for t_max layers, recording every front.

    Extinction is absorbing: once a layer is empty, all later layers are
    stored empty without touching the environment.
    """
    front = start if isinstance(start, Front) else front_from_sites(start)
    fronts = [front]
    tau = None if not front.is_empty else front.t
    for _ in range(t_max):
        if tau is not None:
            fronts.append(Front(front.t + 1, front.box, np.zeros(front.box.shape, bool)))
            front = fronts[-1]
            continue
        front = evolve_front(params, front, env=env, clip=clip)
        fronts.append(front)
        if front.is_empty:
            tau = front.t - fronts[0].t
    return ClusterTrace(fronts, t_max, tau)


def extinction_time(params: LatticeParams, site: Site, cap: int,
                    env: TranslationVector | None = None) -> int | None:
    """Relative extinction layer of the cluster of `site`, or None if alive at cap."""
    k = kernels.cluster_lifetime(params.d, site.z, site.t, cap,
                                 params.seed, params.threshold, env)
    return None if k < 0 else k


def survives(params: LatticeParams, site: Site, horizon: int,
             env: TranslationVector | None = None) -> bool:
    """Truncated percolation proxy: cluster of `site` nonempty after `horizon` layers."""
    if horizon < 1:
        raise PreconditionError("horizon must be >= 1")
    return extinction_time(params, site, horizon, env=env) is None


def full_front(params: LatticeParams, target_window: Box, t0: int, t: int,
               env: TranslationVector | None = None) -> Front:
    """Everywhere-started front at layer t, exact on target_window.

    Starts layer t0 fully occupied on target_window inflated by t - t0;
    sources outside cannot reach the window by layer t, so the restriction
    is exact despite the finite initialization.
    """
    if t < t0:
        raise PreconditionError(f"t must be >= t0, got t={t} < t0={t0}")
    box0 = target_window.inflate(t - t0).check_addressable()
    front = Front(t0, box0, np.ones(box0.shape, dtype=bool))
    for _ in range(t - t0):
        front = evolve_front(params, front, env=env, clip=box0)
    return front.restricted(target_window)


def survival_mask(params: LatticeParams, box: Box, t: int, m: int,
                  env: TranslationVector | None = None) -> np.ndarray:
    """For every z in box: does (z, t) reach layer t + m by an open path?

    Single backward sweep over the edges of layers t+1 .. t+m; equals
    survives((z, t), m) pointwise at a fraction of the cost.
    """
    if m < 0:
        raise PreconditionError("m must be >= 0")
    cur_box = box.inflate(m).check_addressable()
    reach = np.ones(cur_box.shape, dtype=bool)
    for k in range(m, 0, -1):
        out_box = box.inflate(k - 1)
        reach = kernels.backward_step(reach, cur_box, t + k, out_box,
                                      params.seed, params.threshold, env)
        cur_box = out_box
    return reach


@dataclass
class CoupledZoneReport:
    """Sites of a window where the single-source and everywhere-started
    processes agree at every layer n..n+m (in the anchored environment)."""

    anchor: Site
    orientation: str
    n: int
    m: int
    window: Box
    zone: np.ndarray = field(repr=False)

    def zone_sites(self) -> set[tuple[int, ...]]:
        idx = np.argwhere(self.zone)
        return {tuple(int(c + lo) for c, lo in zip(row, self.window.lo)) for row in idx}


def coupled_zone(params: LatticeParams, anchor: Site, n: int, m: int, window: Box,
                 orientation: str = "forward") -> CoupledZoneReport:
    """Agreement zone between the anchor-started and everywhere-started fronts.

    Both processes run in the environment re-anchored so the anchor is the
    image origin (looking up for forward, down for reversed); the zone is
    the set of window sites where membership coincides for all layers in
    [n, n+m].
    """
    if n < 0 or m < 0:
        raise PreconditionError("n and m must be >= 0")
    if orientation not in ("forward", "reversed"):
        raise ValueError(f"orientation must be forward or reversed, got {orientation!r}")
    env = TranslationVector(anchor.z, anchor.t, reversed=(orientation == "reversed"))
    d = params.d
    box_all = window.inflate(n + m).check_addressable()
    one = front_from_sites([Site(tuple([0] * d), 0)])
    allf = Front(0, box_all, np.ones(box_all.shape, dtype=bool))
    zone = np.ones(window.shape, dtype=bool)
    if n == 0:
        zone &= one.restricted(window).bits == allf.restricted(window).bits
    for k in range(1, n + m + 1):
        one = evolve_front(params, one, env=env)
        allf = evolve_front(params, allf, env=env, clip=box_all)
        if k >= n:
            zone &= one.restricted(window).bits == allf.restricted(window).bits
    return CoupledZoneReport(anchor, orientation, n, m, window, zone)


def write_trace_csv(trace: ClusterTrace, path: str) -> None:
    """CSV dump: one row per layer with count and per-axis occupied bounds."""
    d = trace.fronts[0].box.d
    cols = ["t", "count"]
    cols += [f"min_z{i + 1}" for i in range(d)] + [f"max_z{i + 1}" for i in range(d)]
    lines = [",".join(cols)]
    for f in trace.fronts:
        b = f.bounds()
        if b is None:
            row = [str(f.t), "0"] + [""] * (2 * d)
        else:
            mins, maxs = b
            row = [str(f.t), str(f.count)] + [str(c) for c in mins] + [str(c) for c in maxs]
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_trace_bits(trace: ClusterTrace, path: str) -> None:
    """Binary bitset dump: magic, version, d, layer count, then per layer the
    window bounds header (t, lo, shape as int64) and row-major packed bits."""
    d = trace.fronts[0].box.d
    with open(path, "wb") as fh:
        fh.write(_BITS_MAGIC)
        fh.write(struct.pack("<III", 1, d, len(trace.fronts)))
        for f in trace.fronts:
            packed = np.packbits(f.bits.reshape(-1)).tobytes()
            fh.write(struct.pack("<q", f.t))
            fh.write(struct.pack(f"<{d}q", *f.box.lo))
            fh.write(struct.pack(f"<{d}q", *f.box.shape))
            fh.write(struct.pack("<I", len(packed)))
            fh.write(packed)


def read_trace_bits(path: str) -> list[Front]:
    with open(path, "rb") as fh:
        if fh.read(4) != _BITS_MAGIC:
            raise ValueError("not an opgrowth bitset dump")
        version, d, n_layers = struct.unpack("<III", fh.read(12))
        if version != 1:
            raise ValueError(f"unsupported bitset dump version {version}")
        fronts = []
        for _ in range(n_layers):
            (t,) = struct.unpack("<q", fh.read(8))
            lo = struct.unpack(f"<{d}q", fh.read(8 * d))
            shape = struct.unpack(f"<{d}q", fh.read(8 * d))
            (nbytes,) = struct.unpack("<I", fh.read(4))
            raw = np.frombuffer(fh.read(nbytes), dtype=np.uint8)
            size = int(np.prod(shape))
            bits = np.unpackbits(raw)[:size].astype(bool).reshape(shape)
            hi = tuple(a + s - 1 for a, s in zip(lo, shape))
            fronts.append(Front(t, Box(lo, hi), bits))
    return fronts
