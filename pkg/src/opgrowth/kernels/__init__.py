"""Layer-stepping kernels with a compiled core and a numpy fallback.

The hot inner loops (front evolution, backward reachability, log-domain
count layers) run in the Cython extension ``_fast`` when it was built;
otherwise the vectorized numpy reference ``pyref`` is used.  Both
implement the identical hash/threshold contract of config.py, and the
test suite checks them against each other and against the scalar path.

Set OPGROWTH_BACKEND=python (or =compiled) to force a backend.
"""

from __future__ import annotations

import os

import numpy as np

from ..config import COORD_LIMIT, Box, TranslationVector
from ..errors import AddressError, WindowError
from . import pyref

try:
    from . import _fast
except ImportError:  # extension not built; fall back to numpy
    _fast = None

_FORCED = os.environ.get("OPGROWTH_BACKEND", "").strip().lower()
if _FORCED == "python":
    _impl = pyref
    BACKEND = "python"
elif _FORCED == "compiled":
    if _fast is None:
        raise ImportError(
            "OPGROWTH_BACKEND=compiled but the opgrowth.kernels._fast extension "
            "is not built; install with `pip install -e . --no-build-isolation`"
        )
    _impl = _fast
    BACKEND = "compiled"
else:
    _impl = _fast if _fast is not None else pyref
    BACKEND = "compiled" if _fast is not None else "python"


def backend_name() -> str:
    return BACKEND


def available_backends() -> list[str]:
    return ["compiled", "python"] if _fast is not None else ["python"]


def get_impl(name: str):
    if name == "python":
        return pyref
    if name == "compiled":
        if _fast is None:
            raise ImportError("compiled backend not built")
        return _fast
    raise ValueError(f"unknown backend {name!r}")


def _tv_args(d: int, tv: TranslationVector | None) -> tuple[int, tuple[int, ...], int]:
    if tv is None or tv.is_identity():
        return 0, tuple([0] * d), 0
    return (2 if tv.reversed else 1), tv.y, tv.h


def _check(d: int, t_img: int, tmode: int, ty: tuple[int, ...], th: int, *boxes: Box) -> None:
    if tmode == 2:
        t_eff = th - t_img + 1
    elif tmode == 1:
        t_eff = t_img + th
    else:
        t_eff = t_img
    if t_eff < 1:
        raise AddressError(
            f"translated edge layer {t_eff} out of range (image layer {t_img})"
        )
    for box in boxes:
        for i in range(d):
            if tmode == 2:
                cands = (ty[i] - box.lo[i] + 1, ty[i] - box.hi[i] - 1)
            else:
                cands = (box.lo[i] + ty[i], box.hi[i] + ty[i])
            if max(abs(c) for c in cands) > COORD_LIMIT:
                raise WindowError(
                    f"translated coordinates on axis {i} exceed |z| <= {COORD_LIMIT}"
                )


def front_step(occ_in, box_in: Box, t_img: int, box_out: Box, seed: int,
               threshold: int, tv: TranslationVector | None = None):
    """Occupancy at layer t_img from occupancy at t_img - 1.

    out[z'] is set iff some source z' - offset(dir) is occupied in occ_in and
    the image edge (z' - offset(dir), t_img, dir) is open.
    """
    d = box_in.d
    tmode, ty, th = _tv_args(d, tv)
    _check(d, t_img, tmode, ty, th, box_in)
    return _impl.front_step(np.asarray(occ_in), box_in.lo, t_img, box_out.lo,
                            box_out.shape, seed, threshold, tmode, ty, th)


def backward_step(reach_in, box_in: Box, t_img: int, box_out: Box, seed: int,
                  threshold: int, tv: TranslationVector | None = None):
    """Reachability pulled one layer down through the edges into layer t_img.

    out[z] is set iff some open image edge (z, t_img, dir) lands on a set
    site of reach_in.
    """
    d = box_in.d
    tmode, ty, th = _tv_args(d, tv)
    _check(d, t_img, tmode, ty, th, box_out)
    return _impl.backward_step(np.asarray(reach_in), box_in.lo, t_img, box_out.lo,
                               box_out.shape, seed, threshold, tmode, ty, th)


def count_step(vals_in, box_in: Box, t_img: int, box_out: Box, seed: int,
               threshold: int, tv: TranslationVector | None = None):
    """Log-domain path-count layer at t_img from the layer below."""
    d = box_in.d
    tmode, ty, th = _tv_args(d, tv)
    _check(d, t_img, tmode, ty, th, box_in)
    return _impl.count_step(np.asarray(vals_in, dtype=np.float64), box_in.lo, t_img,
                            box_out.lo, box_out.shape, seed, threshold, tmode, ty, th)


def cluster_lifetime(d: int, z0, t0: int, horizon: int, seed: int, threshold: int,
                     tv: TranslationVector | None = None) -> int:
    """Relative extinction layer of the cluster of image site (z0, t0), or -1
    if it survives `horizon` layers.  The whole run stays inside the backend."""
    z0 = tuple(int(c) for c in z0)
    tmode, ty, th = _tv_args(d, tv)
    _check(d, t0 + 1, tmode, ty, th,
           Box(tuple(c - horizon for c in z0), tuple(c + horizon for c in z0)))
    if tmode == 2 and th - (t0 + horizon) + 1 < 1:
        raise AddressError(
            f"reversed horizon run needs t0 + horizon <= h, got {t0}+{horizon} > {th}"
        )
    return int(_impl.cluster_lifetime(d, z0, t0, horizon, seed, threshold, tmode, ty, th))


def has_hitting_core() -> bool:
    return hasattr(_impl, "hitting_core")


def hitting_core(d: int, x, seed: int, threshold: int, tv: TranslationVector | None,
                 horizon: int, iter_cap: int, layer_cap: int):
    """Compiled essential-hitting loop; see opgrowth.hitting for the contract."""
    x = tuple(int(c) for c in x)
    tmode, ty, th = _tv_args(d, tv)
    span = layer_cap + 1
    _check(d, 1, tmode, ty, th, Box(tuple(-span for _ in range(d)),
                                    tuple(span for _ in range(d))))
    if tmode == 2 and th - (layer_cap + horizon) + 1 < 1:
        raise AddressError(
            "reversed environment too shallow for the hitting caps: "
            f"layer_cap + horizon = {layer_cap + horizon} > h = {th}"
        )
    return _impl.hitting_core(d, x, seed, threshold, tmode, ty, th,
                              horizon, iter_cap, layer_cap)


def open_block(box: Box, t_img: int, dirn: int, seed: int, threshold: int,
               tv: TranslationVector | None = None):
    """Open/closed mask of the image edges (z, t_img, dirn) for z over box."""
    d = box.d
    if not 0 <= dirn < 2 * d + 1:
        raise AddressError(f"dir must be in [0, {2 * d}], got {dirn}")
    tmode, ty, th = _tv_args(d, tv)
    _check(d, t_img, tmode, ty, th, box)
    return _impl.open_block(box.lo, box.shape, t_img, dirn, seed, threshold, tmode, ty, th)
