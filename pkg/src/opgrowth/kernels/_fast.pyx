# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled layer-stepping kernels.

Same contract as kernels.pyref: per-edge keys are SplitMix64-finalized
hashes of the (translated) source address, an edge is open iff its key is
below the integer threshold, and count layers accumulate in the log domain
with a per-site max shift.
"""

from libc.math cimport exp, log, INFINITY

import numpy as np

ctypedef unsigned long long u64
ctypedef long long i64

cdef double NEG_INF = -INFINITY
cdef u64 COORD_MASK = 0x1FFFFFULL


cdef inline u64 _fin(u64 x) noexcept nogil:
    x ^= x >> 30
    x *= 0xBF58476D1CE4E5B9ULL
    x ^= x >> 27
    x *= 0x94D049BB133111EBULL
    x ^= x >> 31
    return x


cdef inline u64 _edge_key(u64 seed_fin, i64 t_eff, i64* zeff, int d, int dirn) noexcept nogil:
    cdef u64 zp = 0
    cdef int i
    for i in range(d):
        zp |= ((<u64> zeff[i]) & COORD_MASK) << (21 * i)
    cdef u64 w = ((<u64> t_eff) << 3) | (<u64> dirn)
    return _fin(_fin(w ^ seed_fin) ^ zp)


cdef inline void _fill_offsets(int d, i64* off) noexcept nogil:
    # off[dirn * 3 + axis]; dir 0 = zero step, then +e_a, -e_a per axis
    cdef int dirn, i
    for dirn in range(2 * d + 1):
        for i in range(3):
            off[dirn * 3 + i] = 0
    for i in range(d):
        off[(2 * i + 1) * 3 + i] = 1
        off[(2 * i + 2) * 3 + i] = -1


cdef inline void _src_address(int tmode, int d, i64 t_img, i64* zsrc, i64* delta,
                              i64* ty, i64 th, i64* t_eff, i64* zeff) noexcept nogil:
    cdef int i
    if tmode == 0:
        t_eff[0] = t_img
        for i in range(d):
            zeff[i] = zsrc[i]
    elif tmode == 1:
        t_eff[0] = t_img + th
        for i in range(d):
            zeff[i] = zsrc[i] + ty[i]
    else:
        t_eff[0] = th - t_img + 1
        for i in range(d):
            zeff[i] = ty[i] - zsrc[i] - delta[i]


cdef inline void _prep(tuple lo, tuple shape, i64* lo_c, i64* shape_c, int d):
    cdef int i
    for i in range(d):
        lo_c[i] = lo[i]
        shape_c[i] = shape[i]


cdef inline int _openness(object threshold):
    if threshold <= 0:
        return 0
    if threshold >= (1 << 64):
        return 2
    return 1


def open_block(lo, shape, t_img, dirn, seed, threshold, tmode, ty, th):
    cdef int d = len(lo)
    cdef i64 lo_c[3]
    cdef i64 shape_c[3]
    cdef i64 ty_c[3]
    cdef i64 off[21]
    cdef i64 zsrc[3]
    cdef i64 zeff[3]
    cdef i64 t_eff
    _prep(lo, shape, lo_c, shape_c, d)
    _prep(tuple(ty), tuple(ty), ty_c, ty_c, d)
    _fill_offsets(d, off)
    cdef int opn = _openness(threshold)
    cdef u64 thr_m1 = <u64> (threshold - 1) if opn == 1 else 0
    cdef u64 seed_c = _fin(<u64> (seed & ((1 << 64) - 1)))
    cdef i64 th_c = th
    cdef i64 t_img_c = t_img
    cdef int tmode_c = tmode
    cdef int dirn_c = dirn
    cdef Py_ssize_t n = 1
    cdef int i
    for i in range(d):
        n *= shape_c[i]
    out_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] out = out_arr
    cdef Py_ssize_t lin
    cdef i64 rem
    with nogil:
        for lin in range(n):
            rem = lin
            for i in range(d - 1, -1, -1):
                zsrc[i] = lo_c[i] + rem % shape_c[i]
                rem //= shape_c[i]
            if opn == 0:
                out[lin] = 0
            elif opn == 2:
                out[lin] = 1
            else:
                _src_address(tmode_c, d, t_img_c, zsrc, &off[dirn_c * 3], ty_c, th_c, &t_eff, zeff)
                out[lin] = _edge_key(seed_c, t_eff, zeff, d, dirn_c) <= thr_m1
    return out_arr.reshape(tuple(shape)).view(np.bool_)


def front_step(occ_in, lo_in, t_img, lo_out, shape_out, seed, threshold, tmode, ty, th):
    cdef int d = len(lo_in)
    occ_flat = np.ascontiguousarray(occ_in, dtype=np.uint8).reshape(-1)
    cdef unsigned char[::1] occ = occ_flat
    cdef i64 lo_i[3]
    cdef i64 sh_i[3]
    cdef i64 lo_o[3]
    cdef i64 sh_o[3]
    cdef i64 ty_c[3]
    cdef i64 off[21]
    _prep(tuple(lo_in), tuple(occ_in.shape), lo_i, sh_i, d)
    _prep(tuple(lo_out), tuple(shape_out), lo_o, sh_o, d)
    _prep(tuple(ty), tuple(ty), ty_c, ty_c, d)
    _fill_offsets(d, off)
    cdef int opn = _openness(threshold)
    cdef u64 thr_m1 = <u64> (threshold - 1) if opn == 1 else 0
    cdef u64 seed_c = _fin(<u64> (seed & ((1 << 64) - 1)))
    cdef i64 th_c = th, t_img_c = t_img
    cdef int tmode_c = tmode, ndirs = 2 * d + 1
    cdef Py_ssize_t n_out = 1
    cdef int i
    for i in range(d):
        n_out *= sh_o[i]
    out_arr = np.zeros(n_out, dtype=np.uint8)
    cdef unsigned char[::1] out = out_arr
    cdef Py_ssize_t lin, ii
    cdef i64 rem, c, t_eff
    cdef i64 zout[3]
    cdef i64 zsrc[3]
    cdef i64 zeff[3]
    cdef int dirn, ok, res
    with nogil:
        for lin in range(n_out):
            rem = lin
            for i in range(d - 1, -1, -1):
                zout[i] = lo_o[i] + rem % sh_o[i]
                rem //= sh_o[i]
            res = 0
            if opn != 0:
                for dirn in range(ndirs):
                    ok = 1
                    ii = 0
                    for i in range(d):
                        zsrc[i] = zout[i] - off[dirn * 3 + i]
                        c = zsrc[i] - lo_i[i]
                        if c < 0 or c >= sh_i[i]:
                            ok = 0
                            break
                        ii = ii * sh_i[i] + c
                    if not ok or not occ[ii]:
                        continue
                    if opn == 2:
                        res = 1
                        break
                    _src_address(tmode_c, d, t_img_c, zsrc, &off[dirn * 3], ty_c, th_c, &t_eff, zeff)
                    if _edge_key(seed_c, t_eff, zeff, d, dirn) <= thr_m1:
                        res = 1
                        break
            out[lin] = res
    return out_arr.reshape(tuple(shape_out)).view(np.bool_)


def backward_step(reach_in, lo_in, t_img, lo_out, shape_out, seed, threshold, tmode, ty, th):
    cdef int d = len(lo_in)
    reach_flat = np.ascontiguousarray(reach_in, dtype=np.uint8).reshape(-1)
    cdef unsigned char[::1] reach = reach_flat
    cdef i64 lo_i[3]
    cdef i64 sh_i[3]
    cdef i64 lo_o[3]
    cdef i64 sh_o[3]
    cdef i64 ty_c[3]
    cdef i64 off[21]
    _prep(tuple(lo_in), tuple(reach_in.shape), lo_i, sh_i, d)
    _prep(tuple(lo_out), tuple(shape_out), lo_o, sh_o, d)
    _prep(tuple(ty), tuple(ty), ty_c, ty_c, d)
    _fill_offsets(d, off)
    cdef int opn = _openness(threshold)
    cdef u64 thr_m1 = <u64> (threshold - 1) if opn == 1 else 0
    cdef u64 seed_c = _fin(<u64> (seed & ((1 << 64) - 1)))
    cdef i64 th_c = th, t_img_c = t_img
    cdef int tmode_c = tmode, ndirs = 2 * d + 1
    cdef Py_ssize_t n_out = 1
    cdef int i
    for i in range(d):
        n_out *= sh_o[i]
    out_arr = np.zeros(n_out, dtype=np.uint8)
    cdef unsigned char[::1] out = out_arr
    cdef Py_ssize_t lin, ii
    cdef i64 rem, c, t_eff
    cdef i64 zout[3]
    cdef i64 ztgt[3]
    cdef i64 zeff[3]
    cdef int dirn, ok, res
    with nogil:
        for lin in range(n_out):
            rem = lin
            for i in range(d - 1, -1, -1):
                zout[i] = lo_o[i] + rem % sh_o[i]
                rem //= sh_o[i]
            res = 0
            if opn != 0:
                for dirn in range(ndirs):
                    ok = 1
                    ii = 0
                    for i in range(d):
                        ztgt[i] = zout[i] + off[dirn * 3 + i]
                        c = ztgt[i] - lo_i[i]
                        if c < 0 or c >= sh_i[i]:
                            ok = 0
                            break
                        ii = ii * sh_i[i] + c
                    if not ok or not reach[ii]:
                        continue
                    if opn == 2:
                        res = 1
                        break
                    # edge source is the out site itself
                    _src_address(tmode_c, d, t_img_c, zout, &off[dirn * 3], ty_c, th_c, &t_eff, zeff)
                    if _edge_key(seed_c, t_eff, zeff, d, dirn) <= thr_m1:
                        res = 1
                        break
            out[lin] = res
    return out_arr.reshape(tuple(shape_out)).view(np.bool_)


cdef int _front_layer(int d, int ndirs, i64* off, unsigned char* a, unsigned char* b,
                      i64 side, i64 margin, i64* center_z, i64* blo, i64* bhi,
                      i64 t_img, u64 seed_fin, u64 thr_m1, int opn,
                      int tmode, i64* ty, i64 th) noexcept nogil:
    """One gather layer between two origin-centered buffers.

    a holds layer t_img - 1 over the active box [blo, bhi] (coordinates
    relative to center_z; buffer index = rel + margin per axis).  Writes
    layer t_img into b over [blo-1, bhi+1], updates blo/bhi to the new
    active box, and returns 1 iff anything is alive.
    """
    cdef i64 nlo[3]
    cdef i64 nhi[3]
    cdef i64 cur[3]
    cdef i64 zsrc[3]
    cdef i64 zeff[3]
    cdef i64 t_eff
    cdef Py_ssize_t ii
    cdef int i, j, dirn, ok, res, any_alive = 0
    for i in range(d):
        nlo[i] = blo[i] - 1
        nhi[i] = bhi[i] + 1
        cur[i] = nlo[i]
    while True:
        res = 0
        if opn != 0:
            for dirn in range(ndirs):
                ok = 1
                ii = 0
                for i in range(d):
                    zsrc[i] = cur[i] - off[dirn * 3 + i]
                    if zsrc[i] < blo[i] or zsrc[i] > bhi[i]:
                        ok = 0
                        break
                    ii = ii * side + (zsrc[i] + margin)
                if not ok or not a[ii]:
                    continue
                if opn == 2:
                    res = 1
                    break
                for i in range(d):
                    zsrc[i] = center_z[i] + cur[i] - off[dirn * 3 + i]
                _src_address(tmode, d, t_img, zsrc, &off[dirn * 3], ty, th, &t_eff, zeff)
                if _edge_key(seed_fin, t_eff, zeff, d, dirn) <= thr_m1:
                    res = 1
                    break
        ii = 0
        for i in range(d):
            ii = ii * side + (cur[i] + margin)
        b[ii] = res
        if res:
            if not any_alive:
                any_alive = 1
                for i in range(d):
                    nlo[i] = cur[i]
                    nhi[i] = cur[i]
            else:
                for i in range(d):
                    if cur[i] < nlo[i]:
                        nlo[i] = cur[i]
                    if cur[i] > nhi[i]:
                        nhi[i] = cur[i]
        j = d - 1
        while j >= 0:
            cur[j] += 1
            if cur[j] <= bhi[j] + 1:
                break
            cur[j] = blo[j] - 1
            j -= 1
        if j < 0:
            break
    for i in range(d):
        blo[i] = nlo[i]
        bhi[i] = nhi[i]
    return any_alive


cdef i64 _lifetime_core(int d, int ndirs, i64* off, i64* z0, i64 t0, i64 H,
                        u64 seed_fin, u64 thr_m1, int opn,
                        int tmode, i64* ty, i64 th,
                        unsigned char* a, unsigned char* b) noexcept nogil:
    """Extinction layer of the cluster of (z0, t0), or -1 if alive after H.

    Scratch buffers a/b must hold (2H+1)^d cells; stale contents are fine
    because reads never leave the tracked active box.
    """
    cdef i64 side = 2 * H + 1
    cdef i64 blo[3]
    cdef i64 bhi[3]
    cdef Py_ssize_t center = 0
    cdef int i
    cdef i64 k
    cdef unsigned char* tmp
    for i in range(d):
        blo[i] = 0
        bhi[i] = 0
        center = center * side + H
    a[center] = 1
    for k in range(1, H + 1):
        if not _front_layer(d, ndirs, off, a, b, side, H, z0, blo, bhi,
                            t0 + k, seed_fin, thr_m1, opn, tmode, ty, th):
            return k
        tmp = a
        a = b
        b = tmp
    return -1


def cluster_lifetime(d_in, z0, t0, horizon, seed, threshold, tmode, ty, th):
    """Evolve the cluster of one site for up to `horizon` layers entirely in C.

    Returns the relative layer at which the front died, or -1 if it is
    still alive after `horizon` layers.
    """
    cdef int d = d_in
    cdef i64 H = horizon
    cdef i64 z0_c[3]
    cdef i64 ty_c[3]
    cdef i64 off[21]
    cdef i64 side = 2 * H + 1
    cdef int i
    for i in range(d):
        z0_c[i] = z0[i]
    _prep(tuple(ty), tuple(ty), ty_c, ty_c, d)
    _fill_offsets(d, off)
    cdef int opn = _openness(threshold)
    if opn == 0:
        return 1 if H >= 1 else -1
    cdef u64 thr_m1 = <u64> (threshold - 1) if opn == 1 else 0
    cdef u64 seed_c = _fin(<u64> (seed & ((1 << 64) - 1)))
    cdef i64 th_c = th, t0_c = t0
    cdef int tmode_c = tmode
    cdef Py_ssize_t n_buf = 1
    for i in range(d):
        n_buf *= side
    a_arr = np.zeros(n_buf, dtype=np.uint8)
    b_arr = np.zeros(n_buf, dtype=np.uint8)
    cdef unsigned char[::1] a = a_arr
    cdef unsigned char[::1] b = b_arr
    cdef i64 res
    with nogil:
        res = _lifetime_core(d, 2 * d + 1, off, z0_c, t0_c, H, seed_c, thr_m1, opn,
                             tmode_c, ty_c, th_c, &a[0], &b[0])
    return int(res)


def hitting_core(d_in, x, seed, threshold, tmode, ty, th, horizon, iter_cap, layer_cap):
    """Full essential-hitting restart loop in C.

    Returns (status, u_seq, v_seq) with status 0 = ok (last v classified
    infinite), 1 = origin cluster died, 2 = a cap was hit; v_seq lists only
    the finite values (v_0 = 0 and the dead-restart returns).
    """
    cdef int d = d_in
    cdef i64 x_c[3]
    cdef i64 ty_c[3]
    cdef i64 zero[3]
    cdef i64 off[21]
    cdef int i
    for i in range(d):
        x_c[i] = x[i]
        zero[i] = 0
    _prep(tuple(ty), tuple(ty), ty_c, ty_c, d)
    _fill_offsets(d, off)
    cdef int opn = _openness(threshold)
    cdef u64 thr_m1 = <u64> (threshold - 1) if opn == 1 else 0
    cdef u64 seed_c = _fin(<u64> (seed & ((1 << 64) - 1)))
    cdef i64 th_c = th, H = horizon, lcap = layer_cap
    cdef int tmode_c = tmode, ndirs = 2 * d + 1
    # scratch for restart lifetimes
    cdef i64 side_h = 2 * H + 1
    cdef Py_ssize_t n_scratch = 1
    for i in range(d):
        n_scratch *= side_h
    sa_arr = np.zeros(n_scratch, dtype=np.uint8)
    sb_arr = np.zeros(n_scratch, dtype=np.uint8)
    cdef unsigned char[::1] sa = sa_arr
    cdef unsigned char[::1] sb = sb_arr
    # origin front buffers, grown on demand
    cdef i64 margin = 64
    if margin > lcap:
        margin = lcap
    cdef i64 need = 0
    for i in range(d):
        if x_c[i] > need:
            need = x_c[i]
        if -x_c[i] > need:
            need = -x_c[i]
    while margin < need + 1 and margin < lcap:
        margin *= 2
    cdef i64 side = 2 * margin + 1
    cdef Py_ssize_t n_front = 1
    for i in range(d):
        n_front *= side
    fa_arr = np.zeros(n_front, dtype=np.uint8)
    fb_arr = np.zeros(n_front, dtype=np.uint8)
    cdef unsigned char[::1] fa = fa_arr
    cdef unsigned char[::1] fb = fb_arr
    cdef i64 blo[3]
    cdef i64 bhi[3]
    cdef Py_ssize_t center = 0
    for i in range(d):
        blo[i] = 0
        bhi[i] = 0
        center = center * side + margin
    fa[center] = 1
    u_seq = [0]
    v_seq = [0]
    cdef i64 t = 0, v_k = 0, u_next, tau
    cdef Py_ssize_t ix
    cdef int k = 0, alive, inside
    cdef i64 old_margin, old_side
    while k < iter_cap:
        v_k = v_seq[len(v_seq) - 1]
        u_next = -1
        if t > v_k:
            inside = 1
            ix = 0
            for i in range(d):
                if x_c[i] < blo[i] or x_c[i] > bhi[i]:
                    inside = 0
                    break
                ix = ix * side + (x_c[i] + margin)
            if inside and fa[ix]:
                u_next = t
        while u_next < 0 and t < lcap:
            if t + 1 > margin - 1:
                # grow origin buffers (double the margin, recopy active box)
                old_margin = margin
                old_side = side
                margin = margin * 2
                if margin > lcap + 1:
                    margin = lcap + 1
                side = 2 * margin + 1
                n_front = 1
                for i in range(d):
                    n_front *= side
                fa2_arr = np.zeros(n_front, dtype=np.uint8)
                fb2_arr = np.zeros(n_front, dtype=np.uint8)
                _copy_box(d, &fa[0], old_side, old_margin, fa2_arr, side, margin, blo, bhi)
                fa_arr, fb_arr = fa2_arr, fb2_arr
                fa = fa_arr
                fb = fb_arr
                center = 0
                for i in range(d):
                    center = center * side + margin
            t += 1
            with nogil:
                alive = _front_layer(d, ndirs, off, &fa[0], &fb[0], side, margin, zero,
                                     blo, bhi, t, seed_c, thr_m1, opn, tmode_c, ty_c, th_c)
            fa_arr, fb_arr = fb_arr, fa_arr
            fa = fa_arr
            fb = fb_arr
            if not alive:
                return 1, u_seq, v_seq
            if t > v_k:
                inside = 1
                ix = 0
                for i in range(d):
                    if x_c[i] < blo[i] or x_c[i] > bhi[i]:
                        inside = 0
                        break
                    ix = ix * side + (x_c[i] + margin)
                if inside and fa[ix]:
                    u_next = t
        if u_next < 0:
            return 2, u_seq, v_seq
        u_seq.append(int(u_next))
        with nogil:
            tau = _lifetime_core(d, ndirs, off, x_c, u_next, H, seed_c, thr_m1, opn,
                                 tmode_c, ty_c, th_c, &sa[0], &sb[0])
        if tau < 0:
            return 0, u_seq, v_seq
        v_seq.append(int(u_next + tau))
        k += 1
    return 2, u_seq, v_seq


cdef void _copy_box(int d, unsigned char* src, i64 src_side, i64 src_margin,
                    unsigned char[::1] dst, i64 dst_side, i64 dst_margin,
                    i64* blo, i64* bhi):
    cdef i64 cur[3]
    cdef Py_ssize_t si, di
    cdef int i, j
    for i in range(d):
        cur[i] = blo[i]
    while True:
        si = 0
        di = 0
        for i in range(d):
            si = si * src_side + (cur[i] + src_margin)
            di = di * dst_side + (cur[i] + dst_margin)
        dst[di] = src[si]
        j = d - 1
        while j >= 0:
            cur[j] += 1
            if cur[j] <= bhi[j]:
                break
            cur[j] = blo[j]
            j -= 1
        if j < 0:
            break


def count_step(vals_in, lo_in, t_img, lo_out, shape_out, seed, threshold, tmode, ty, th):
    cdef int d = len(lo_in)
    vals_flat = np.ascontiguousarray(vals_in, dtype=np.float64).reshape(-1)
    cdef double[::1] vals = vals_flat
    cdef i64 lo_i[3]
    cdef i64 sh_i[3]
    cdef i64 lo_o[3]
    cdef i64 sh_o[3]
    cdef i64 ty_c[3]
    cdef i64 off[21]
    _prep(tuple(lo_in), tuple(vals_in.shape), lo_i, sh_i, d)
    _prep(tuple(lo_out), tuple(shape_out), lo_o, sh_o, d)
    _prep(tuple(ty), tuple(ty), ty_c, ty_c, d)
    _fill_offsets(d, off)
    cdef int opn = _openness(threshold)
    cdef u64 thr_m1 = <u64> (threshold - 1) if opn == 1 else 0
    cdef u64 seed_c = _fin(<u64> (seed & ((1 << 64) - 1)))
    cdef i64 th_c = th, t_img_c = t_img
    cdef int tmode_c = tmode, ndirs = 2 * d + 1
    cdef Py_ssize_t n_out = 1
    cdef int i
    for i in range(d):
        n_out *= sh_o[i]
    out_arr = np.full(n_out, NEG_INF, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t lin, ii
    cdef i64 rem, c, t_eff
    cdef i64 zout[3]
    cdef i64 zsrc[3]
    cdef i64 zeff[3]
    cdef double contrib[7]
    cdef double v, m, s
    cdef int dirn, ok, nc, k
    with nogil:
        for lin in range(n_out):
            rem = lin
            for i in range(d - 1, -1, -1):
                zout[i] = lo_o[i] + rem % sh_o[i]
                rem //= sh_o[i]
            nc = 0
            if opn != 0:
                for dirn in range(ndirs):
                    ok = 1
                    ii = 0
                    for i in range(d):
                        zsrc[i] = zout[i] - off[dirn * 3 + i]
                        c = zsrc[i] - lo_i[i]
                        if c < 0 or c >= sh_i[i]:
                            ok = 0
                            break
                        ii = ii * sh_i[i] + c
                    if not ok:
                        continue
                    v = vals[ii]
                    if v == NEG_INF:
                        continue
                    if opn == 1:
                        _src_address(tmode_c, d, t_img_c, zsrc, &off[dirn * 3], ty_c, th_c, &t_eff, zeff)
                        if _edge_key(seed_c, t_eff, zeff, d, dirn) > thr_m1:
                            continue
                    contrib[nc] = v
                    nc += 1
            if nc > 0:
                m = contrib[0]
                for k in range(1, nc):
                    if contrib[k] > m:
                        m = contrib[k]
                s = 0.0
                for k in range(nc):
                    s += exp(contrib[k] - m)
                out[lin] = m + log(s)
    return out_arr.reshape(tuple(shape_out))
