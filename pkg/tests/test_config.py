"""Edge environment: hash contract, addressing, translations."""

import math
import random

import pytest

from opgrowth.config import (
    COORD_LIMIT,
    Box,
    EdgeAddress,
    LatticeParams,
    Site,
    TranslationVector,
    edge_is_open,
    edge_key,
    edge_uniform,
    mix64,
    open_at,
    remap,
    split_seed,
    stencil,
    step_offsets,
)
from opgrowth.errors import AddressError, BoundaryError, WindowError

# frozen contract vectors: (d, seed, z, t, dir, key)
HASH_VECTORS = [
    (1, 0, (0,), 1, 0, 721373886964523290),
    (1, 0, (0,), 1, 1, 16130647274078768347),
    (1, 0, (0,), 1, 2, 945578761529566964),
    (1, 1, (0,), 1, 0, 2764754150590408987),
    (1, 12345, (-3,), 7, 2, 2828242943514868404),
    (1, 9223372036854775808, (1000,), 999, 1, 4132393459770108213),
    (2, 42, (5, -5), 10, 3, 11465268278718577701),
    (2, 42, (5, -5), 10, 4, 1465926266622117002),
    (3, 7, (-1, 2, -3), 4, 6, 3976474204071310545),
    (3, 987654321, (1048576, -1048576, 0), 123456, 5, 11610980527552806780),
]


@pytest.mark.parametrize("d,seed,z,t,dirn,key", HASH_VECTORS)
def test_hash_vectors(d, seed, z, t, dirn, key):
    params = LatticeParams(d, 0.5, seed)
    edge = EdgeAddress(z, t, dirn)
    assert edge_key(params, edge) == key
    assert edge_uniform(params, edge) == key / 2.0**64


def test_determinism():
    params = LatticeParams(1, 0.37, 99)
    e = EdgeAddress((4,), 17, 1)
    assert edge_uniform(params, e) == edge_uniform(params, e)
    assert edge_is_open(params, e) == edge_is_open(params, e)


def test_uniform_mean():
    # empirical mean of 1e6 distinct-edge uniforms vs 1/2 at 3 sigma
    params = LatticeParams(1, 0.5, 20240607)
    n = 10**6
    total = 0.0
    for t in range(1, 334):
        for z in range(-500, 501):
            for dirn in range(3):
                total += edge_key(params, EdgeAddress((z,), t, dirn)) / 2.0**64
    n = 333 * 1001 * 3
    mean = total / n
    assert abs(mean - 0.5) < 3.0 / math.sqrt(12 * n)


def test_open_frequency():
    params = LatticeParams(1, 0.7, 31415)
    n = 0
    opens = 0
    for t in range(1, 334):
        for z in range(-500, 501):
            for dirn in range(3):
                opens += edge_is_open(params, EdgeAddress((z,), t, dirn))
                n += 1
    se = math.sqrt(0.7 * 0.3 / n)
    assert abs(opens / n - 0.7) < 3 * se


def test_seed_sensitivity():
    # values under two seeds differ on (almost) every probe
    a = LatticeParams(1, 0.5, 1)
    b = LatticeParams(1, 0.5, 2)
    rng = random.Random(0)
    differ = 0
    probes = 10**4
    for _ in range(probes):
        e = EdgeAddress((rng.randint(-1000, 1000),), rng.randint(1, 10**6), rng.randint(0, 2))
        differ += edge_uniform(a, e) != edge_uniform(b, e)
    assert differ >= 0.999 * probes


def test_p_limits():
    e = EdgeAddress((3,), 5, 2)
    assert not edge_is_open(LatticeParams(1, 0.0, 7), e)
    assert edge_is_open(LatticeParams(1, 1.0, 7), e)


def test_monotone_in_p():
    rng = random.Random(1)
    ps = [0.1, 0.3, 0.5, 0.7, 0.9]
    for _ in range(500):
        e = EdgeAddress((rng.randint(-50, 50),), rng.randint(1, 1000), rng.randint(0, 2))
        states = [edge_is_open(LatticeParams(1, p, 123), e) for p in ps]
        # once open, stays open as p grows
        assert states == sorted(states)


def test_bad_addresses():
    params = LatticeParams(1, 0.5, 0)
    with pytest.raises(AddressError):
        edge_key(params, EdgeAddress((0,), 1, 3))
    with pytest.raises(AddressError):
        edge_key(params, EdgeAddress((0,), 0, 0))
    with pytest.raises(WindowError):
        edge_key(params, EdgeAddress((COORD_LIMIT + 1,), 1, 0))


def test_stencil_d1():
    assert [s.z for s in stencil(Site((0,), 5), "forward")] == [(0,), (1,), (-1,)]
    assert all(s.t == 6 for s in stencil(Site((0,), 5), "forward"))
    assert {s.z for s in stencil(Site((0,), 5), "forward")} == {(-1,), (0,), (1,)}


def test_stencil_d2_count_and_backward():
    fwd = stencil(Site((0, 0), 3), "forward")
    assert len(fwd) == 5
    back = stencil(Site((2, -1), 3), "backward")
    assert all(s.t == 2 for s in back)
    with pytest.raises(BoundaryError):
        stencil(Site((0, 0), 0), "backward")


def test_stencil_closure():
    # forward then backward stencils recover the start among candidates
    start = Site((4, -2), 7)
    for s in stencil(start, "forward"):
        assert start.z in {b.z for b in stencil(s, "backward")}


def test_remap_identity_and_group_law():
    rng = random.Random(2)
    ident = TranslationVector.identity(2)
    for _ in range(200):
        e = EdgeAddress((rng.randint(-40, 40), rng.randint(-40, 40)),
                        rng.randint(1, 500), rng.randint(0, 4))
        assert remap(e, ident) == e
        tv1 = TranslationVector((rng.randint(-5, 5), rng.randint(-5, 5)), rng.randint(0, 9))
        tv2 = TranslationVector((rng.randint(-5, 5), rng.randint(-5, 5)), rng.randint(0, 9))
        combined = TranslationVector(tuple(a + b for a, b in zip(tv1.y, tv2.y)),
                                     tv1.h + tv2.h)
        assert remap(remap(e, tv1), tv2) == remap(e, combined)


def test_remap_reversed_involution():
    rng = random.Random(3)
    for _ in range(1000):
        d = rng.choice([1, 2])
        e = EdgeAddress(tuple(rng.randint(-30, 30) for _ in range(d)),
                        rng.randint(1, 50), rng.randint(0, 2 * d))
        tv = TranslationVector(tuple(rng.randint(-10, 10) for _ in range(d)),
                               rng.randint(60, 200), reversed=True)
        assert remap(remap(e, tv), tv) == e


def test_remap_reversed_out_of_range():
    tv = TranslationVector((0,), 3, reversed=True)
    with pytest.raises(AddressError):
        remap(EdgeAddress((0,), 5, 0), tv)  # 3 - 5 + 1 < 1


def test_reversed_paths_correspond():
    # an image path is open iff its time-reversed source path is open
    params = LatticeParams(1, 0.5, 404)
    rng = random.Random(4)
    offs = step_offsets(1)
    for _ in range(100):
        h = rng.randint(6, 20)
        y = rng.randint(-5, 5)
        tv = TranslationVector((y,), h, reversed=True)
        n = rng.randint(1, 5)
        dirs = [rng.randint(0, 2) for _ in range(n)]
        sites = [(0,)]
        for dn in dirs:
            sites.append((sites[-1][0] + offs[dn][0],))
        image_open = all(
            open_at(params, sites[i], i + 1, dirs[i], tv) for i in range(n)
        )
        # source path: from (y - sites[n], h - n) climbing to (y - sites[0], h)
        src_open = all(
            edge_is_open(params, remap(EdgeAddress(sites[i], i + 1, dirs[i]), tv))
            for i in range(n)
        )
        assert image_open == src_open
        # and the remapped edges really form a contiguous ascending source path
        mapped = [remap(EdgeAddress(sites[i], i + 1, dirs[i]), tv) for i in range(n)]
        for lower, upper in zip(mapped[1:], mapped[:-1]):
            assert lower.target().z == upper.z
            assert lower.target().t == upper.t - 1


def test_translation_shift_composition():
    tv = TranslationVector((3,), 10)
    assert tv.shifted((2,), 4) == TranslationVector((5,), 14)
    rv = TranslationVector((3,), 10, reversed=True)
    assert rv.shifted((2,), 4) == TranslationVector((1,), 6, reversed=True)
    assert rv.map_site(Site((1,), 2)) == Site((2,), 8)


def test_split_seed_distinct():
    seeds = {split_seed(7, 0, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert split_seed(7, 0, 1) != split_seed(7, 1, 0)
    assert mix64(1) not in (0, 1)


def test_box_ops():
    box = Box((-2, 0), (2, 3))
    assert box.shape == (5, 4)
    assert box.size == 20
    assert box.contains((0, 2))
    assert not box.contains((3, 2))
    assert box.index((-2, 0)) == (0, 0)
    assert box.inflate(1) == Box((-3, -1), (3, 4))
    assert box.intersect(Box((1, 1), (9, 9))) == Box((1, 1), (2, 3))
    assert box.intersect(Box((10, 10), (11, 11))) is None
    assert len(list(Box.cube(1, 2).sites())) == 5
    with pytest.raises(WindowError):
        Box((1,), (0,))
    with pytest.raises(WindowError):
        Box((0,), (COORD_LIMIT + 5,)).check_addressable()


def test_params_validation():
    with pytest.raises(ValueError):
        LatticeParams(4, 0.5, 0)
    with pytest.raises(ValueError):
        LatticeParams(1, 1.5, 0)
    p = LatticeParams(2, 0.25, 5)
    assert p.n_dirs == 5
    assert p.threshold == math.ceil(0.25 * 2**64)
    assert p.with_p(0.5).seed == p.seed
