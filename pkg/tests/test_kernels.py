"""Backend parity and kernel-vs-scalar cross checks."""

import random

import numpy as np
import pytest

from opgrowth import kernels
from opgrowth.config import Box, LatticeParams, TranslationVector, open_at, step_offsets
from opgrowth.errors import AddressError
from opgrowth.kernels.bench import run_benchmark

BACKENDS = kernels.available_backends()


def _rand_tv(rng, d):
    kind = rng.randint(0, 2)
    if kind == 0:
        return None
    if kind == 1:
        return TranslationVector(tuple(rng.randint(-6, 6) for _ in range(d)),
                                 rng.randint(0, 12))
    return TranslationVector(tuple(rng.randint(-6, 6) for _ in range(d)),
                             rng.randint(40, 80), reversed=True)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_open_block_matches_scalar(d):
    rng = random.Random(d)
    params = LatticeParams(d, 0.55, 1000 + d)
    box = Box.cube(d, 3)
    for _ in range(6):
        t = rng.randint(1, 20)
        dirn = rng.randint(0, 2 * d)
        tv = _rand_tv(rng, d)
        want = np.zeros(box.shape, dtype=bool)
        for z in box.sites():
            want[box.index(z)] = open_at(params, z, t, dirn, tv)
        for name in BACKENDS:
            impl = kernels.get_impl(name)
            tmode, ty, th = kernels._tv_args(d, tv)
            got = impl.open_block(box.lo, box.shape, t, dirn, params.seed,
                                  params.threshold, tmode, ty, th)
            assert np.array_equal(got, want), (name, d, t, dirn, tv)


@pytest.mark.parametrize("d", [1, 2])
def test_front_step_matches_bruteforce(d):
    # kernel layer evolution vs direct edge-by-edge evaluation
    rng = random.Random(10 + d)
    params = LatticeParams(d, 0.5, 77 + d)
    offs = step_offsets(d)
    box_in = Box.cube(d, 3)
    box_out = Box.cube(d, 4)
    for trial in range(8):
        occ = np.zeros(box_in.shape, dtype=bool)
        for z in box_in.sites():
            occ[box_in.index(z)] = rng.random() < 0.4
        t = rng.randint(1, 30)
        tv = _rand_tv(rng, d)
        want = np.zeros(box_out.shape, dtype=bool)
        for z in box_out.sites():
            hit = False
            for dirn, off in enumerate(offs):
                src = tuple(a - b for a, b in zip(z, off))
                if box_in.contains(src) and occ[box_in.index(src)]:
                    if open_at(params, src, t, dirn, tv):
                        hit = True
                        break
            want[box_out.index(z)] = hit
        got = kernels.front_step(occ, box_in, t, box_out, params.seed,
                                 params.threshold, tv)
        assert np.array_equal(got, want), (d, trial)


@pytest.mark.parametrize("d", [1, 2])
def test_backward_step_matches_bruteforce(d):
    rng = random.Random(20 + d)
    params = LatticeParams(d, 0.5, 88 + d)
    offs = step_offsets(d)
    box_in = Box.cube(d, 4)
    box_out = Box.cube(d, 3)
    for trial in range(8):
        reach = np.zeros(box_in.shape, dtype=bool)
        for z in box_in.sites():
            reach[box_in.index(z)] = rng.random() < 0.4
        t = rng.randint(1, 30)
        tv = _rand_tv(rng, d)
        want = np.zeros(box_out.shape, dtype=bool)
        for z in box_out.sites():
            hit = False
            for dirn, off in enumerate(offs):
                tgt = tuple(a + b for a, b in zip(z, off))
                if box_in.contains(tgt) and reach[box_in.index(tgt)]:
                    if open_at(params, z, t, dirn, tv):
                        hit = True
                        break
            want[box_out.index(z)] = hit
        got = kernels.backward_step(reach, box_in, t, box_out, params.seed,
                                    params.threshold, tv)
        assert np.array_equal(got, want), (d, trial)


@pytest.mark.parametrize("d", [1, 2])
def test_count_step_backend_parity(d):
    rng = random.Random(30 + d)
    params = LatticeParams(d, 0.6, 99 + d)
    box_in = Box.cube(d, 3)
    box_out = Box.cube(d, 4)
    for _ in range(6):
        vals = np.full(box_in.shape, -np.inf)
        for z in box_in.sites():
            if rng.random() < 0.5:
                vals[box_in.index(z)] = rng.uniform(-5, 5)
        t = rng.randint(1, 30)
        tv = _rand_tv(rng, d)
        tmode, ty, th = kernels._tv_args(d, tv)
        outs = []
        for name in BACKENDS:
            impl = kernels.get_impl(name)
            outs.append(impl.count_step(vals, box_in.lo, t, box_out.lo, box_out.shape,
                                        params.seed, params.threshold, tmode, ty, th))
        ref = outs[0]
        for other in outs[1:]:
            assert np.array_equal(np.isfinite(ref), np.isfinite(other))
            fin = np.isfinite(ref)
            assert np.allclose(ref[fin], other[fin], rtol=1e-12, atol=1e-12)


def test_cluster_lifetime_backend_parity():
    params = LatticeParams(1, 0.55, 7)
    from opgrowth.config import split_seed
    for i in range(200):
        child = params.with_seed(split_seed(params.seed, 0, i))
        vals = {kernels.get_impl(n).cluster_lifetime(1, (0,), 0, 24, child.seed,
                                                     child.threshold, 0, (0,), 0)
                for n in BACKENDS}
        assert len(vals) == 1


def test_layer_validation():
    params = LatticeParams(1, 0.5, 0)
    box = Box.cube(1, 2)
    occ = np.zeros(box.shape, dtype=bool)
    tv = TranslationVector((0,), 4, reversed=True)
    with pytest.raises(AddressError):
        kernels.front_step(occ, box, 9, box, params.seed, params.threshold, tv)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")
def test_benchmark_agreement():
    out = run_benchmark(d=1, p=0.7, n=48, seed=3, repeats=1)
    assert out["agreement"]["front_equal"]
    assert out["agreement"]["count_structure_equal"]
    assert out["agreement"]["count_max_abs_diff"] < 1e-11
    assert {row["backend"] for row in out["rows"]} == {"compiled", "python"}
