"""Lattice geometry and the seeded edge environment.

Sites live on Z^d x N and every site (z, t) owns 2d+1 forward edges into
layer t+1, one per step offset in {0, +-e_1, ..., +-e_d}.  Whether an edge
is open is a pure function of (seed, edge address), realized by a
counter-based keyed hash, so the whole environment needs no storage, can
be replayed, and stays coupled monotonically across p.

Hash contract (fixed; test vectors in tests/test_config.py and README):

    zfield_i = z_i mod 2^21                 (21-bit two's complement field)
    zpack    = sum_i zfield_i << (21 * i)   (axis 0 in the lowest bits)
    w        = ((t << 3) | dir) mod 2^64
    key      = fin(fin(w ^ fin(seed)) ^ zpack)   (fin = SplitMix64 finalizer)
    uniform  = key / 2^64

The seed is folded in before the finalizer cascade: a post-hoc
"seed XOR hash(address)" would make every seed's environment an XOR
translate of a single one, perfectly coupling edges across replica seeds
and wrecking all cross-replica statistics.

An edge is open iff key < ceil(p * 2^64); the integer comparison is the
exact form of "uniform < p" and is what every backend implements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Iterator, Sequence

from .errors import AddressError, BoundaryError, WindowError

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15  # SplitMix64 stream increment
COORD_BITS = 21
COORD_LIMIT = 1 << 20  # |z_i| <= 2^20 per axis, fits the packed 21-bit field
SUPPORTED_DIMS = (1, 2, 3)


def mix64(x: int) -> int:
    """SplitMix64 finalizer on a 64-bit word."""
    x &= MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & MASK64
    x ^= x >> 31
    return x


def split_seed(seed: int, *indices: int) -> int:
    """Derive a child seed by an indexed split of the SplitMix64 family.

    Each index advances the stream by (index + 1) * GAMMA and finalizes, so
    split_seed(s, i) and split_seed(s, i, j) give independent-quality keys
    for replica / attempt indexing.
    """
    s = seed & MASK64
    for ix in indices:
        s = mix64((s + GAMMA * (ix + 1)) & MASK64)
    return s


def p_threshold(p: float) -> int:
    """ceil(p * 2^64), computed exactly (scaling a float by 2^64 is exact)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    return math.ceil(p * (1 << 64))


def step_offsets(d: int) -> tuple[tuple[int, ...], ...]:
    """Offsets indexed by dir: 0 is the zero step, then +e_a, -e_a per axis."""
    offs = [tuple([0] * d)]
    for axis in range(d):
        for sign in (1, -1):
            v = [0] * d
            v[axis] = sign
            offs.append(tuple(v))
    return tuple(offs)


@dataclass(frozen=True)
class LatticeParams:
    """Model parameters: dimension d, edge probability p, environment seed."""

    d: int
    p: float
    seed: int
    threshold: int = field(init=False, repr=False, compare=False)
    seed_mix: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.d not in SUPPORTED_DIMS:
            raise ValueError(f"d must be one of {SUPPORTED_DIMS}, got {self.d}")
        object.__setattr__(self, "threshold", p_threshold(self.p))
        object.__setattr__(self, "seed", self.seed & MASK64)
        object.__setattr__(self, "seed_mix", mix64(self.seed))

    @property
    def n_dirs(self) -> int:
        return 2 * self.d + 1

    def offsets(self) -> tuple[tuple[int, ...], ...]:
        return step_offsets(self.d)

    def with_p(self, p: float) -> "LatticeParams":
        return LatticeParams(self.d, p, self.seed)

    def with_seed(self, seed: int) -> "LatticeParams":
        return LatticeParams(self.d, self.p, seed)

    def to_dict(self) -> dict:
        return {"d": self.d, "p": self.p, "seed": self.seed}


@dataclass(frozen=True)
class Site:
    """A lattice site (z, t) with z in Z^d and layer t >= 0."""

    z: tuple[int, ...]
    t: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "z", tuple(int(c) for c in self.z))
        if self.t < 0:
            raise BoundaryError(f"layer must be >= 0, got {self.t}")


@dataclass(frozen=True)
class EdgeAddress:
    """Edge from (z, t-1) to (z + offset(dir), t), addressed by its source.

    dir indexes step_offsets(d); t is the *target* layer (>= 1).
    """

    z: tuple[int, ...]
    t: int
    dir: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "z", tuple(int(c) for c in self.z))

    def target(self) -> Site:
        off = step_offsets(len(self.z))[self.dir]
        return Site(tuple(a + b for a, b in zip(self.z, off)), self.t)


@dataclass(frozen=True)
class TranslationVector:
    """Spatial shift y with time shift h, as a forward or reversed re-anchor.

    Forward moves the origin of the addressed environment to (y, h).
    Reversed re-anchors at (y, h) looking *down* in time: image paths
    correspond to time-reversed paths of the source environment.
    """

    y: tuple[int, ...]
    h: int
    reversed: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "y", tuple(int(c) for c in self.y))
        if not self.reversed and self.h < 0:
            raise AddressError("forward translations require h >= 0")

    @classmethod
    def identity(cls, d: int) -> "TranslationVector":
        return cls(tuple([0] * d), 0, False)

    def is_identity(self) -> bool:
        return not self.reversed and self.h == 0 and all(c == 0 for c in self.y)

    def shifted(self, dz: Sequence[int], dt: int) -> "TranslationVector":
        """Compose with a further forward anchor (dz, dt) in image coordinates."""
        if dt < 0:
            raise AddressError("anchor time shift must be >= 0")
        if not self.reversed:
            return TranslationVector(
                tuple(a + b for a, b in zip(self.y, dz)), self.h + dt, False
            )
        return TranslationVector(
            tuple(a - b for a, b in zip(self.y, dz)), self.h - dt, True
        )

    def map_site(self, site: Site) -> Site:
        """Source-environment site that an image site reads."""
        if not self.reversed:
            return Site(tuple(a + b for a, b in zip(site.z, self.y)), site.t + self.h)
        return Site(tuple(a - b for a, b in zip(self.y, site.z)), self.h - site.t)


def validate_edge(d: int, edge: EdgeAddress) -> None:
    if len(edge.z) != d:
        raise AddressError(f"edge has {len(edge.z)} spatial coords, expected {d}")
    if not 0 <= edge.dir < 2 * d + 1:
        raise AddressError(f"dir must be in [0, {2 * d}], got {edge.dir}")
    if edge.t < 1:
        raise AddressError(f"edge target layer must be >= 1, got {edge.t}")
    for c in edge.z:
        if abs(c) > COORD_LIMIT:
            raise WindowError(f"coordinate {c} exceeds |z| <= {COORD_LIMIT}")


def edge_key(params: LatticeParams, edge: EdgeAddress) -> int:
    """64-bit hash key of an edge; open edges are exactly those with key < threshold."""
    validate_edge(params.d, edge)
    zpack = 0
    for i, c in enumerate(edge.z):
        zpack |= (c & ((1 << COORD_BITS) - 1)) << (COORD_BITS * i)
    w = ((edge.t << 3) | edge.dir) & MASK64
    return mix64(mix64(w ^ params.seed_mix) ^ zpack)


def edge_uniform(params: LatticeParams, edge: EdgeAddress) -> float:
    """Uniform variate of an edge in [0, 1), as the double nearest key / 2^64."""
    return edge_key(params, edge) / 2.0**64


def edge_is_open(params: LatticeParams, edge: EdgeAddress) -> bool:
    """Exact integer form of edge_uniform(params, edge) < p; monotone in p."""
    return edge_key(params, edge) < params.threshold


def open_at(
    params: LatticeParams,
    z: tuple[int, ...],
    t: int,
    dirn: int,
    tv: TranslationVector | None = None,
) -> bool:
    """Openness of the image edge (z, t, dirn) under an optional re-anchoring.

    Scalar reference path used by the oracle and by kernel cross-checks; the
    compiled and numpy backends must agree with it bit for bit.
    """
    if tv is None or tv.is_identity():
        return edge_is_open(params, EdgeAddress(z, t, dirn))
    if not tv.reversed:
        src = tuple(a + b for a, b in zip(z, tv.y))
        return edge_is_open(params, EdgeAddress(src, t + tv.h, dirn))
    off = step_offsets(params.d)[dirn]
    src = tuple(y - a - o for y, a, o in zip(tv.y, z, off))
    return edge_is_open(params, EdgeAddress(src, tv.h - t + 1, dirn))


def stencil(site: Site, direction: str = "forward", d: int | None = None) -> list[Site]:
    """The 2d+1 neighbours of a site one layer up (forward) or down (backward)."""
    dd = len(site.z) if d is None else d
    offs = step_offsets(dd)
    if direction == "forward":
        return [Site(tuple(a + b for a, b in zip(site.z, o)), site.t + 1) for o in offs]
    if direction == "backward":
        if site.t == 0:
            raise BoundaryError("no layer below t = 0")
        return [Site(tuple(a - b for a, b in zip(site.z, o)), site.t - 1) for o in offs]
    raise ValueError(f"direction must be forward or backward, got {direction!r}")


def remap(edge: EdgeAddress, tv: TranslationVector) -> EdgeAddress:
    """Source-environment address read by an image edge under tv.

    Forward: (z, t, dir) -> (z + y, t + h, dir).  Reversed: the image is
    anchored at (y, h) looking down, so (z, t, dir) -> (y - z - offset(dir),
    h - t + 1, dir); applying the same reversed tv twice is the identity.
    """
    d = len(edge.z)
    if not 0 <= edge.dir < 2 * d + 1:
        raise AddressError(f"dir must be in [0, {2 * d}], got {edge.dir}")
    if not tv.reversed:
        out = EdgeAddress(
            tuple(a + b for a, b in zip(edge.z, tv.y)), edge.t + tv.h, edge.dir
        )
    else:
        off = step_offsets(d)[edge.dir]
        out = EdgeAddress(
            tuple(y - a - o for y, a, o in zip(tv.y, edge.z, off)),
            tv.h - edge.t + 1,
            edge.dir,
        )
    if out.t < 1:
        raise AddressError(
            f"remapped edge layer {out.t} is out of range (image layer {edge.t})"
        )
    return out


@dataclass(frozen=True)
class Box:
    """Axis-aligned integer box, inclusive on both ends; the window type."""

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", tuple(int(c) for c in self.lo))
        object.__setattr__(self, "hi", tuple(int(c) for c in self.hi))
        if len(self.lo) != len(self.hi):
            raise WindowError("box lo/hi dimension mismatch")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise WindowError(f"empty box {self.lo}..{self.hi}")

    @classmethod
    def cube(cls, d: int, radius: int, center: Sequence[int] | None = None) -> "Box":
        c = tuple([0] * d) if center is None else tuple(center)
        return cls(tuple(a - radius for a in c), tuple(a + radius for a in c))

    @property
    def d(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(b - a + 1 for a, b in zip(self.lo, self.hi))

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def contains(self, z: Sequence[int]) -> bool:
        return all(a <= c <= b for a, c, b in zip(self.lo, z, self.hi))

    def index(self, z: Sequence[int]) -> tuple[int, ...]:
        if not self.contains(z):
            raise WindowError(f"{tuple(z)} outside box {self.lo}..{self.hi}")
        return tuple(c - a for c, a in zip(z, self.lo))

    def inflate(self, r: int) -> "Box":
        return Box(tuple(a - r for a in self.lo), tuple(b + r for b in self.hi))

    def intersect(self, other: "Box") -> "Box | None":
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        if any(a > b for a, b in zip(lo, hi)):
            return None
        return Box(lo, hi)

    def sites(self) -> Iterator[tuple[int, ...]]:
        return product(*(range(a, b + 1) for a, b in zip(self.lo, self.hi)))

    def check_addressable(self) -> "Box":
        if any(abs(c) > COORD_LIMIT for c in self.lo + self.hi):
            raise WindowError(
                f"box {self.lo}..{self.hi} exceeds the |z| <= {COORD_LIMIT} address range"
            )
        return self
