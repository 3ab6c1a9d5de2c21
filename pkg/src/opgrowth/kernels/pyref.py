"""Vectorized numpy backend for the layer-stepping kernels.

Reference implementation of the same contract as the compiled extension:
every operation evaluates the keyed hash of config.py over whole coordinate
blocks with uint64 arithmetic.  Selected automatically when the compiled
module is unavailable (or forced via OPGROWTH_BACKEND=python).
"""

from __future__ import annotations

import numpy as np

from ..config import COORD_BITS, MASK64, mix64, step_offsets

NEG_INF = float("-inf")

_U = np.uint64


def _fin(x: np.ndarray) -> np.ndarray:
    x = x ^ (x >> _U(30))
    x = x * _U(0xBF58476D1CE4E5B9)
    x = x ^ (x >> _U(27))
    x = x * _U(0x94D049BB133111EB)
    x = x ^ (x >> _U(31))
    return x


def _zpack(coords: list[np.ndarray], d: int) -> np.ndarray:
    """Pack per-axis int64 coordinate vectors into broadcast uint64 blocks."""
    mask = _U((1 << COORD_BITS) - 1)
    acc = None
    for i in range(d):
        shape = [1] * d
        shape[i] = -1
        field = (coords[i].astype(np.uint64) & mask) << _U(COORD_BITS * i)
        field = field.reshape(shape)
        acc = field if acc is None else acc | field
    return acc


def open_block(lo, shape, t_img, dirn, seed, threshold, tmode, ty, th, offsets=None):
    """Openness of image edges (z, t_img, dirn) for z over a coordinate box."""
    d = len(lo)
    if threshold <= 0:
        return np.zeros(shape, dtype=bool)
    if threshold >= 1 << 64:
        return np.ones(shape, dtype=bool)
    offs = step_offsets(d) if offsets is None else offsets
    delta = offs[dirn]
    coords = []
    if tmode == 0:
        t_eff = t_img
        for i in range(d):
            coords.append(np.arange(lo[i], lo[i] + shape[i], dtype=np.int64))
    elif tmode == 1:
        t_eff = t_img + th
        for i in range(d):
            coords.append(np.arange(lo[i] + ty[i], lo[i] + ty[i] + shape[i], dtype=np.int64))
    else:
        t_eff = th - t_img + 1
        for i in range(d):
            base = ty[i] - delta[i]
            coords.append(base - np.arange(lo[i], lo[i] + shape[i], dtype=np.int64))
    inner = mix64((((t_eff << 3) | dirn) ^ mix64(seed)) & MASK64)
    keys = _fin(_U(inner) ^ _zpack(coords, d))
    return (keys <= _U(threshold - 1)) & np.ones(shape, dtype=bool)


def _overlap(lo_in, shape_in, lo_out, shape_out, delta):
    """Per-axis slices pairing source sites z with image sites z + delta."""
    d = len(lo_in)
    sl_in, sl_out, lo_src, shp = [], [], [], []
    for i in range(d):
        a = max(lo_in[i], lo_out[i] - delta[i])
        b = min(lo_in[i] + shape_in[i] - 1, lo_out[i] + shape_out[i] - 1 - delta[i])
        if a > b:
            return None
        sl_in.append(slice(a - lo_in[i], b - lo_in[i] + 1))
        sl_out.append(slice(a + delta[i] - lo_out[i], b + delta[i] - lo_out[i] + 1))
        lo_src.append(a)
        shp.append(b - a + 1)
    return tuple(sl_in), tuple(sl_out), tuple(lo_src), tuple(shp)


def front_step(occ_in, lo_in, t_img, lo_out, shape_out, seed, threshold, tmode, ty, th):
    """Occupancy one layer up: out[z'] = OR_dir occ[z'-off] & open(z'-off, t_img, dir)."""
    d = len(lo_in)
    offs = step_offsets(d)
    out = np.zeros(shape_out, dtype=bool)
    for dirn, delta in enumerate(offs):
        ov = _overlap(lo_in, occ_in.shape, lo_out, shape_out, delta)
        if ov is None:
            continue
        sl_in, sl_out, lo_src, shp = ov
        src = occ_in[sl_in]
        if not src.any():
            continue
        mask = open_block(lo_src, shp, t_img, dirn, seed, threshold, tmode, ty, th, offs)
        out[sl_out] |= src & mask
    return out


def backward_step(reach_in, lo_in, t_img, lo_out, shape_out, seed, threshold, tmode, ty, th):
    """Reachability one layer down: out[z] = OR_dir open(z, t_img, dir) & reach[z+off]."""
    d = len(lo_in)
    offs = step_offsets(d)
    out = np.zeros(shape_out, dtype=bool)
    for dirn, delta in enumerate(offs):
        # here the edge source is the *out* site; pair out z with in z + delta
        ov = _overlap(lo_out, shape_out, lo_in, reach_in.shape, delta)
        if ov is None:
            continue
        sl_out, sl_in, lo_src, shp = ov
        src = reach_in[sl_in]
        if not src.any():
            continue
        mask = open_block(lo_src, shp, t_img, dirn, seed, threshold, tmode, ty, th, offs)
        out[sl_out] |= src & mask
    return out


def cluster_lifetime(d, z0, t0, horizon, seed, threshold, tmode, ty, th):
    """Relative extinction layer of the cluster of (z0, t0), or -1 if it is
    still alive after `horizon` layers (growing cone, early exit on death)."""
    occ = np.ones((1,) * d, dtype=bool)
    lo = tuple(z0)
    for k in range(1, horizon + 1):
        lo_out = tuple(c - 1 for c in lo)
        shape_out = tuple(s + 2 for s in occ.shape)
        occ = front_step(occ, lo, t0 + k, lo_out, shape_out, seed, threshold, tmode, ty, th)
        lo = lo_out
        if not occ.any():
            return k
    return -1


def count_step(vals_in, lo_in, t_img, lo_out, shape_out, seed, threshold, tmode, ty, th):
    """Log-domain count layer: per site, max-shifted log-sum-exp of open inflows."""
    d = len(lo_in)
    offs = step_offsets(d)
    n_dirs = len(offs)
    stack = np.full((n_dirs,) + tuple(shape_out), NEG_INF)
    for dirn, delta in enumerate(offs):
        ov = _overlap(lo_in, vals_in.shape, lo_out, shape_out, delta)
        if ov is None:
            continue
        sl_in, sl_out, lo_src, shp = ov
        src = vals_in[sl_in]
        mask = open_block(lo_src, shp, t_img, dirn, seed, threshold, tmode, ty, th, offs)
        stack[(dirn,) + sl_out] = np.where(mask, src, NEG_INF)
    m = np.max(stack, axis=0)
    out = np.full(shape_out, NEG_INF)
    alive = m > NEG_INF
    if alive.any():
        with np.errstate(invalid="ignore"):
            s = np.sum(np.exp(stack - m), axis=0, where=stack > NEG_INF)
        out[alive] = m[alive] + np.log(s[alive])
    return out
