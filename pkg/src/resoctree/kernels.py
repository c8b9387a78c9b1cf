"""Numba ray-casting kernels.

One frame kernel serves four render modes that share the exact same
sampling, transfer-function, and compositing arithmetic:

  MODE_RESIDENCY  residency-octree-guided renderer (skipping, substitution)
  MODE_REFERENCE  in-core oracle: page-table lookups only, no skipping
  MODE_PAGETABLE  baseline: page tables only, whole-brick empty skipping
  MODE_CLASSIC    baseline: one-to-one node/brick octree, per-channel restarts

Sharing the code path makes the residency renderer bit-identical to the
reference under full cache residency.
"""

import math

import numpy as np
from numba import njit

MODE_RESIDENCY = 0
MODE_REFERENCE = 1
MODE_PAGETABLE = 2
MODE_CLASSIC = 3

K_ZERO = 0     # channel known fully transparent here
K_CONST = 1    # channel homogeneous here: render a constant
K_SAMPLE = 2   # channel sampled from the brick cache
K_MISSU = 3    # node unmapped: nothing resident, skippable with a request
K_MISSP = 4    # brick probe missed: advance one sample only

ST_UNMAPPED = 0
ST_MAPPED = 1
ST_EMPTY = 2

CLAMP_HI = 1.0 - 1e-9


@njit(cache=True, inline="always")
def _lerp(a, b, t):
    return a + (b - a) * t


@njit(cache=True)
def lod_level(t, t0, lo, hi):
    ratio = t / t0
    if ratio < 1.0:
        lev = 0
    else:
        lev = int(math.floor(math.log2(ratio)))
    if lev < lo:
        lev = lo
    if lev > hi:
        lev = hi
    return lev


@njit(cache=True)
def traversal_depth(step, max_depth):
    if step >= 1.0:
        return 0
    d = int(math.floor(math.log2(1.0 / step)))
    if d < 0:
        d = 0
    if d > max_depth:
        d = max_depth
    return d


@njit(cache=True)
def ray_box_unit(ox, oy, oz, dx, dy, dz):
    """Intersection of a ray with [0,1]^3; returns (tnear, tfar)."""
    tmin = -1e30
    tmax = 1e30
    for a in range(3):
        if a == 0:
            o, d = ox, dx
        elif a == 1:
            o, d = oy, dy
        else:
            o, d = oz, dz
        if abs(d) < 1e-12:
            if o < 0.0 or o > 1.0:
                return 1.0, -1.0
        else:
            inv = 1.0 / d
            t0 = (0.0 - o) * inv
            t1 = (1.0 - o) * inv
            if t0 > t1:
                t0, t1 = t1, t0
            if t0 > tmin:
                tmin = t0
            if t1 < tmax:
                tmax = t1
    return tmin, tmax


@njit(cache=True)
def _box_exit(ox, oy, oz, dx, dy, dz, lx, ly, lz, hx, hy, hz):
    """Largest t at which the ray is still inside the box."""
    te = 1e30
    for a in range(3):
        if a == 0:
            o, d, lo, hi = ox, dx, lx, hx
        elif a == 1:
            o, d, lo, hi = oy, dy, ly, hy
        else:
            o, d, lo, hi = oz, dz, lz, hz
        if d > 1e-12:
            t = (hi - o) / d
        elif d < -1e-12:
            t = (lo - o) / d
        else:
            continue
        if t < te:
            te = t
    return te


@njit(cache=True)
def tf_eval(tf_x, tf_rgba, n, ci, v):
    if v < tf_x[ci, 0] or v > tf_x[ci, n - 1]:
        return 0.0, 0.0, 0.0, 0.0
    for i in range(n - 1):
        x0 = tf_x[ci, i]
        x1 = tf_x[ci, i + 1]
        if x0 <= v <= x1:
            t = 0.0 if x1 == x0 else (v - x0) / (x1 - x0)
            r = _lerp(tf_rgba[ci, i, 0], tf_rgba[ci, i + 1, 0], t)
            g = _lerp(tf_rgba[ci, i, 1], tf_rgba[ci, i + 1, 1], t)
            b = _lerp(tf_rgba[ci, i, 2], tf_rgba[ci, i + 1, 2], t)
            a = _lerp(tf_rgba[ci, i, 3], tf_rgba[ci, i + 1, 3], t)
            return r, g, b, a
    return 0.0, 0.0, 0.0, 0.0


@njit(cache=True)
def trilinear_brick(cache, slot_lin, lx, ly, lz, bx, by, bz):
    """Trilinear sample of one cached brick, clamped to the brick interior.

    lx/ly/lz are voxel-unit coordinates relative to the brick origin.
    """
    fx = lx - 0.5
    fy = ly - 0.5
    fz = lz - 0.5
    if fx < 0.0:
        fx = 0.0
    if fy < 0.0:
        fy = 0.0
    if fz < 0.0:
        fz = 0.0
    if fx > bx - 1.0:
        fx = bx - 1.0
    if fy > by - 1.0:
        fy = by - 1.0
    if fz > bz - 1.0:
        fz = bz - 1.0
    x0 = int(fx)
    y0 = int(fy)
    z0 = int(fz)
    x1 = x0 + 1 if x0 + 1 < bx else bx - 1
    y1 = y0 + 1 if y0 + 1 < by else by - 1
    z1 = z0 + 1 if z0 + 1 < bz else bz - 1
    tx = fx - x0
    ty = fy - y0
    tz = fz - z0
    c00 = _lerp(float(cache[slot_lin, z0, y0, x0]),
                float(cache[slot_lin, z0, y0, x1]), tx)
    c10 = _lerp(float(cache[slot_lin, z0, y1, x0]),
                float(cache[slot_lin, z0, y1, x1]), tx)
    c01 = _lerp(float(cache[slot_lin, z1, y0, x0]),
                float(cache[slot_lin, z1, y0, x1]), tx)
    c11 = _lerp(float(cache[slot_lin, z1, y1, x0]),
                float(cache[slot_lin, z1, y1, x1]), tx)
    return _lerp(_lerp(c00, c10, ty), _lerp(c01, c11, ty), tz)


@njit(cache=True, inline="always")
def _brick_axis(p, dim, b, grid):
    c = int(p * dim / b)
    if c < 0:
        c = 0
    if c > grid - 1:
        c = grid - 1
    return c


@njit(cache=True)
def _entry_index(pt_offsets, grids, k, slot, lev, bx, by, bz):
    gx = grids[lev, 0]
    gy = grids[lev, 1]
    return pt_offsets[slot * k + lev] + (bz * gy + by) * gx + bx


@njit(cache=True)
def _gb_index(gb_offsets, grids, k, slot, lev, bx, by, bz):
    gx = grids[lev, 0]
    gy = grids[lev, 1]
    return gb_offsets[slot * k + lev] + (bz * gy + by) * gx + bx


@njit(cache=True)
def _is_empty_meta(tf_f, tf_op, ci, mn, mx):
    f = tf_f[ci, mn]
    if f > mx:
        return True
    return f == mx and tf_op[ci, mx] == 0.0


@njit(cache=True)
def raycast_frame(mode,
                  origins, dirs,
                  # channels (importance order)
                  ch_slot, ch_lo, ch_hi,
                  tf_x, tf_rgba, tf_np,
                  tf_f, tf_op,
                  # config
                  base_step, t0, early_alpha, eps_h, start_level,
                  depth_d, k, m,
                  # octree
                  lvl_off, words,
                  # paging
                  dims, grids, bsize,
                  pt_offsets, pt_status, pt_slot, cache,
                  gb_offsets,
                  # classic-octree baseline data (dummies unless MODE_CLASSIC)
                  cls_min, cls_max, cls_depth, cls_lvl_off,
                  # reference data for skip verification (dummies unless check)
                  check_skips, ref_pt_status, ref_pt_slot, ref_cache,
                  # outputs
                  image,
                  brick_req, brick_req_n, meta_req, meta_req_n,
                  seen_brick, seen_meta,
                  required, pix_required,
                  hist, counters):
    npix = origins.shape[0]
    n_ch = ch_slot.shape[0]
    bx = bsize[0]
    by = bsize[1]
    bz = bsize[2]

    desired = np.empty(n_ch, dtype=np.int64)
    out_kind = np.empty(n_ch, dtype=np.int64)
    out_val = np.empty(n_ch, dtype=np.float64)
    out_slot = np.empty(n_ch, dtype=np.int64)
    out_level = np.empty(n_ch, dtype=np.int64)
    prev_brick = np.empty(n_ch, dtype=np.int64)

    steps_total = 0
    evaluated = 0
    skipped = 0
    violations = 0

    for pix in range(npix):
        ox = origins[pix, 0]
        oy = origins[pix, 1]
        oz = origins[pix, 2]
        dx = dirs[pix, 0]
        dy = dirs[pix, 1]
        dz = dirs[pix, 2]
        tnear, tfar = ray_box_unit(ox, oy, oz, dx, dy, dz)
        accR = 0.0
        accG = 0.0
        accB = 0.0
        accA = 0.0
        t = tnear if tnear > 0.0 else 0.0
        for ci in range(n_ch):
            prev_brick[ci] = -1
        prev_depth = start_level

        while t < tfar and accA < early_alpha:
            px = ox + t * dx
            py = oy + t * dy
            pz = oz + t * dz
            if px < 0.0:
                px = 0.0
            if py < 0.0:
                py = 0.0
            if pz < 0.0:
                pz = 0.0
            if px > CLAMP_HI:
                px = CLAMP_HI
            if py > CLAMP_HI:
                py = CLAMP_HI
            if pz > CLAMP_HI:
                pz = CLAMP_HI

            maxlev = 0
            for ci in range(n_ch):
                lev = lod_level(t, t0, ch_lo[ci], ch_hi[ci])
                desired[ci] = lev
                if lev > maxlev:
                    maxlev = lev
            step = base_step * (1 << maxlev)
            dt_ = traversal_depth(step, depth_d)

            skippable = False
            skip_exit = -1.0
            end_depth = prev_depth

            # ---------------- resolve the sample per mode ----------------
            if mode == MODE_REFERENCE:
                for ci in range(n_ch):
                    lev = desired[ci]
                    cbx = _brick_axis(px, dims[lev, 0], bx, grids[lev, 0])
                    cby = _brick_axis(py, dims[lev, 1], by, grids[lev, 1])
                    cbz = _brick_axis(pz, dims[lev, 2], bz, grids[lev, 2])
                    e = _entry_index(pt_offsets, grids, k, ch_slot[ci], lev,
                                     cbx, cby, cbz)
                    if pt_status[e] == ST_MAPPED:
                        out_kind[ci] = K_SAMPLE
                        out_slot[ci] = pt_slot[e]
                        out_level[ci] = lev
                    else:
                        out_kind[ci] = K_MISSP

            elif mode == MODE_PAGETABLE:
                all_empty = True
                skip_exit = 1e30
                for ci in range(n_ch):
                    lev = desired[ci]
                    cbx = _brick_axis(px, dims[lev, 0], bx, grids[lev, 0])
                    cby = _brick_axis(py, dims[lev, 1], by, grids[lev, 1])
                    cbz = _brick_axis(pz, dims[lev, 2], bz, grids[lev, 2])
                    e = _entry_index(pt_offsets, grids, k, ch_slot[ci], lev,
                                     cbx, cby, cbz)
                    st = pt_status[e]
                    if st == ST_MAPPED:
                        out_kind[ci] = K_SAMPLE
                        out_slot[ci] = pt_slot[e]
                        out_level[ci] = lev
                        all_empty = False
                    elif st == ST_EMPTY:
                        out_kind[ci] = K_ZERO
                        ex = _box_exit(
                            ox, oy, oz, dx, dy, dz,
                            cbx * bx / float(dims[lev, 0]),
                            cby * by / float(dims[lev, 1]),
                            cbz * bz / float(dims[lev, 2]),
                            (cbx + 1) * bx / float(dims[lev, 0]),
                            (cby + 1) * by / float(dims[lev, 1]),
                            (cbz + 1) * bz / float(dims[lev, 2]))
                        if ex < skip_exit:
                            skip_exit = ex
                    else:
                        out_kind[ci] = K_MISSP
                        bid = ((ch_slot[ci] * k + lev) << 24) \
                            | (cbz << 16) | (cby << 8) | cbx
                        gb = _gb_index(gb_offsets, grids, k, ch_slot[ci], lev,
                                       cbx, cby, cbz)
                        if seen_brick[gb] == 0:
                            seen_brick[gb] = 1
                            nn = brick_req_n[0]
                            if nn < brick_req.shape[0]:
                                brick_req[nn] = bid
                                brick_req_n[0] = nn + 1
                        all_empty = False
                skippable = all_empty

            elif mode == MODE_CLASSIC:
                all_empty = True
                deep_d = -1
                dix = 0
                diy = 0
                diz = 0
                for ci in range(n_ch):
                    lev = desired[ci]
                    d_target = cls_depth - lev
                    if d_target < 0:
                        d_target = 0
                    d = 0
                    last_slot = -1
                    last_lev = -1
                    while True:
                        steps_total += 1
                        side = 1 << d
                        ix = int(px * side)
                        iy = int(py * side)
                        iz = int(pz * side)
                        nidx = cls_lvl_off[d] + (iz * side + iy) * side + ix
                        mn = cls_min[nidx, ch_slot[ci]]
                        mx = cls_max[nidx, ch_slot[ci]]
                        if _is_empty_meta(tf_f, tf_op, ci, mn, mx):
                            out_kind[ci] = K_ZERO
                            if d > deep_d:
                                deep_d = d
                                dix = ix
                                diy = iy
                                diz = iz
                            break
                        lev_d = cls_depth - d
                        e = _entry_index(pt_offsets, grids, k, ch_slot[ci],
                                         lev_d, ix, iy, iz)
                        gb = _gb_index(gb_offsets, grids, k, ch_slot[ci],
                                       lev_d, ix, iy, iz)
                        required[gb] = 1
                        if pt_status[e] != ST_MAPPED:
                            bid = ((ch_slot[ci] * k + lev_d) << 24) \
                                | (iz << 16) | (iy << 8) | ix
                            if seen_brick[gb] == 0:
                                seen_brick[gb] = 1
                                nn = brick_req_n[0]
                                if nn < brick_req.shape[0]:
                                    brick_req[nn] = bid
                                    brick_req_n[0] = nn + 1
                            # descent blocked: fall back to deepest resident
                            if last_slot >= 0:
                                out_kind[ci] = K_SAMPLE
                                out_slot[ci] = last_slot
                                out_level[ci] = last_lev
                            else:
                                out_kind[ci] = K_MISSP
                            all_empty = False
                            break
                        last_slot = pt_slot[e]
                        last_lev = lev_d
                        if d == d_target:
                            out_kind[ci] = K_SAMPLE
                            out_slot[ci] = last_slot
                            out_level[ci] = last_lev
                            all_empty = False
                            break
                        d += 1
                if all_empty and deep_d >= 0:
                    skippable = True
                    s = 1.0 / (1 << deep_d)
                    skip_exit = _box_exit(ox, oy, oz, dx, dy, dz,
                                          dix * s, diy * s, diz * s,
                                          (dix + 1) * s, (diy + 1) * s,
                                          (diz + 1) * s)

            else:  # MODE_RESIDENCY
                d = prev_depth - 1
                if d < 0:
                    d = 0
                if start_level < d:
                    d = start_level
                if d > dt_:
                    d = dt_
                ci = 0
                all_cz = True
                ix = 0
                iy = 0
                iz = 0
                while ci < n_ch:
                    side = 1 << d
                    ix = int(px * side)
                    iy = int(py * side)
                    iz = int(pz * side)
                    nidx = lvl_off[d] + (iz * side + iy) * side + ix
                    steps_total += 1
                    w = np.int64(words[nidx, ch_slot[ci]])
                    mn = (w >> 16) & 0xFF
                    mx = (w >> 24) & 0xFF
                    mask = w & 0xFFFF
                    valid = not (mn == 255 and mx == 0)
                    if not valid:
                        mid = nidx * m + ch_slot[ci]
                        if seen_meta[mid] == 0:
                            seen_meta[mid] = 1
                            nn = meta_req_n[0]
                            if nn < meta_req.shape[0]:
                                meta_req[nn] = mid
                                meta_req_n[0] = nn + 1
                    else:
                        if _is_empty_meta(tf_f, tf_op, ci, mn, mx):
                            out_kind[ci] = K_ZERO
                            ci += 1
                            continue
                        if mx - mn <= eps_h:
                            out_kind[ci] = K_CONST
                            out_val[ci] = float(mn)
                            ci += 1
                            continue
                    if mask == 0:
                        out_kind[ci] = K_MISSU
                        lev = desired[ci]
                        cbx = _brick_axis(px, dims[lev, 0], bx, grids[lev, 0])
                        cby = _brick_axis(py, dims[lev, 1], by, grids[lev, 1])
                        cbz = _brick_axis(pz, dims[lev, 2], bz, grids[lev, 2])
                        bid = ((ch_slot[ci] * k + lev) << 24) \
                            | (cbz << 16) | (cby << 8) | cbx
                        gb = _gb_index(gb_offsets, grids, k, ch_slot[ci], lev,
                                       cbx, cby, cbz)
                        if seen_brick[gb] == 0:
                            seen_brick[gb] = 1
                            nn = brick_req_n[0]
                            if nn < brick_req.shape[0]:
                                brick_req[nn] = bid
                                brick_req_n[0] = nn + 1
                        ci += 1
                        continue
                    if d < dt_:
                        d += 1
                        continue
                    # at traversal depth: fetch the brick, or an alternative
                    lev = desired[ci]
                    cbx = _brick_axis(px, dims[lev, 0], bx, grids[lev, 0])
                    cby = _brick_axis(py, dims[lev, 1], by, grids[lev, 1])
                    cbz = _brick_axis(pz, dims[lev, 2], bz, grids[lev, 2])
                    e = _entry_index(pt_offsets, grids, k, ch_slot[ci], lev,
                                     cbx, cby, cbz)
                    if pt_status[e] == ST_MAPPED:
                        out_kind[ci] = K_SAMPLE
                        out_slot[ci] = pt_slot[e]
                        out_level[ci] = lev
                        all_cz = False
                    else:
                        bid = ((ch_slot[ci] * k + lev) << 24) \
                            | (cbz << 16) | (cby << 8) | cbx
                        gb = _gb_index(gb_offsets, grids, k, ch_slot[ci], lev,
                                       cbx, cby, cbz)
                        if seen_brick[gb] == 0:
                            seen_brick[gb] = 1
                            nn = brick_req_n[0]
                            if nn < brick_req.shape[0]:
                                brick_req[nn] = bid
                                brick_req_n[0] = nn + 1
                        # alternative resolution resident in this node,
                        # nearest level first, coarser preferred on ties
                        found = False
                        for delta in range(1, k):
                            for sgn in range(2):
                                cand = lev + delta if sgn == 0 else lev - delta
                                if cand < 0 or cand >= k:
                                    continue
                                if not (mask >> cand) & 1:
                                    continue
                                abx = _brick_axis(px, dims[cand, 0], bx,
                                                  grids[cand, 0])
                                aby = _brick_axis(py, dims[cand, 1], by,
                                                  grids[cand, 1])
                                abz = _brick_axis(pz, dims[cand, 2], bz,
                                                  grids[cand, 2])
                                e2 = _entry_index(pt_offsets, grids, k,
                                                  ch_slot[ci], cand,
                                                  abx, aby, abz)
                                if pt_status[e2] == ST_MAPPED:
                                    out_kind[ci] = K_SAMPLE
                                    out_slot[ci] = pt_slot[e2]
                                    out_level[ci] = cand
                                    found = True
                                    break
                            if found:
                                break
                        if found:
                            all_cz = False
                        else:
                            out_kind[ci] = K_MISSP
                            all_cz = False
                    ci += 1
                end_depth = d
                if all_cz:
                    skippable = True
                    s = 1.0 / (1 << d)
                    skip_exit = _box_exit(ox, oy, oz, dx, dy, dz,
                                          ix * s, iy * s, iz * s,
                                          (ix + 1) * s, (iy + 1) * s,
                                          (iz + 1) * s)

            # ---------------- composite / advance ----------------
            if skippable:
                any_const = False
                for ci in range(n_ch):
                    if out_kind[ci] == K_CONST:
                        any_const = True
                limit = skip_exit if skip_exit < tfar else tfar
                while t < limit and accA < early_alpha:
                    if any_const:
                        srcR = 0.0
                        srcG = 0.0
                        srcB = 0.0
                        trans = 1.0
                        for ci in range(n_ch):
                            if out_kind[ci] != K_CONST:
                                continue
                            r, g, b, a = tf_eval(tf_x, tf_rgba, tf_np[ci], ci,
                                                 out_val[ci])
                            srcR += r * a
                            srcG += g * a
                            srcB += b * a
                            trans *= (1.0 - a)
                        alpha = 1.0 - trans
                        if alpha > 0.0:
                            ratio = step / base_step
                            corr = 1.0 - (1.0 - alpha) ** ratio
                            scale = corr / alpha
                            wgt = 1.0 - accA
                            accR += wgt * srcR * scale
                            accG += wgt * srcG * scale
                            accB += wgt * srcB * scale
                            accA += wgt * corr
                        evaluated += 1
                    else:
                        skipped += 1
                        if check_skips != 0:
                            # dense soundness check: the reference opacity of
                            # every skipped channel must be exactly zero
                            qx = ox + t * dx
                            qy = oy + t * dy
                            qz = oz + t * dz
                            if qx < 0.0:
                                qx = 0.0
                            if qy < 0.0:
                                qy = 0.0
                            if qz < 0.0:
                                qz = 0.0
                            if qx > CLAMP_HI:
                                qx = CLAMP_HI
                            if qy > CLAMP_HI:
                                qy = CLAMP_HI
                            if qz > CLAMP_HI:
                                qz = CLAMP_HI
                            for ci in range(n_ch):
                                if out_kind[ci] != K_ZERO:
                                    continue
                                lev = lod_level(t, t0, ch_lo[ci], ch_hi[ci])
                                rv = _ref_value(ref_pt_status, ref_pt_slot,
                                                ref_cache, pt_offsets, grids,
                                                dims, bsize, k, ch_slot[ci],
                                                lev, qx, qy, qz)
                                if rv >= 0.0:
                                    _, _, _, a = tf_eval(tf_x, tf_rgba,
                                                         tf_np[ci], ci, rv)
                                    if a > 0.0:
                                        violations += 1
                    # recompute the step exactly as the reference would
                    maxlev = 0
                    for ci in range(n_ch):
                        lev = lod_level(t, t0, ch_lo[ci], ch_hi[ci])
                        if lev > maxlev:
                            maxlev = lev
                    step = base_step * (1 << maxlev)
                    t += step
                prev_depth = end_depth
                continue

            # single-sample evaluation
            srcR = 0.0
            srcG = 0.0
            srcB = 0.0
            trans = 1.0
            for ci in range(n_ch):
                kind = out_kind[ci]
                if kind == K_ZERO:
                    if check_skips != 0:
                        lev = lod_level(t, t0, ch_lo[ci], ch_hi[ci])
                        rv = _ref_value(ref_pt_status, ref_pt_slot, ref_cache,
                                        pt_offsets, grids, dims, bsize, k,
                                        ch_slot[ci], lev, px, py, pz)
                        if rv >= 0.0:
                            _, _, _, a0 = tf_eval(tf_x, tf_rgba, tf_np[ci],
                                                  ci, rv)
                            if a0 > 0.0:
                                violations += 1
                    continue
                if kind == K_MISSU or kind == K_MISSP:
                    continue
                if kind == K_CONST:
                    v = out_val[ci]
                else:
                    lev = out_level[ci]
                    cbx = _brick_axis(px, dims[lev, 0], bx, grids[lev, 0])
                    cby = _brick_axis(py, dims[lev, 1], by, grids[lev, 1])
                    cbz = _brick_axis(pz, dims[lev, 2], bz, grids[lev, 2])
                    lx = px * dims[lev, 0] - cbx * bx
                    ly = py * dims[lev, 1] - cby * by
                    lz = pz * dims[lev, 2] - cbz * bz
                    v = trilinear_brick(cache, out_slot[ci], lx, ly, lz,
                                        bx, by, bz)
                    gb = _gb_index(gb_offsets, grids, k, ch_slot[ci], lev,
                                   cbx, cby, cbz)
                    required[gb] = 1
                    hist[ci, lev] += 1
                    if gb != prev_brick[ci]:
                        prev_brick[ci] = gb
                        pix_required[pix] += 1
                r, g, b, a = tf_eval(tf_x, tf_rgba, tf_np[ci], ci, v)
                srcR += r * a
                srcG += g * a
                srcB += b * a
                trans *= (1.0 - a)
            alpha = 1.0 - trans
            if alpha > 0.0:
                ratio = step / base_step
                corr = 1.0 - (1.0 - alpha) ** ratio
                scale = corr / alpha
                wgt = 1.0 - accA
                accR += wgt * srcR * scale
                accG += wgt * srcG * scale
                accB += wgt * srcB * scale
                accA += wgt * corr
            evaluated += 1
            t += step
            prev_depth = end_depth

        image[pix, 0] = accR
        image[pix, 1] = accG
        image[pix, 2] = accB
        image[pix, 3] = accA

    counters[0] = steps_total
    counters[1] = evaluated
    counters[2] = skipped
    counters[3] = violations


@njit(cache=True)
def _ref_value(ref_pt_status, ref_pt_slot, ref_cache, pt_offsets, grids,
               dims, bsize, k, slot, lev, px, py, pz):
    """Trilinear value from the fully-resident reference paging, or -1."""
    bx = bsize[0]
    by = bsize[1]
    bz = bsize[2]
    cbx = _brick_axis(px, dims[lev, 0], bx, grids[lev, 0])
    cby = _brick_axis(py, dims[lev, 1], by, grids[lev, 1])
    cbz = _brick_axis(pz, dims[lev, 2], bz, grids[lev, 2])
    e = _entry_index(pt_offsets, grids, k, slot, lev, cbx, cby, cbz)
    if ref_pt_status[e] != ST_MAPPED:
        return -1.0
    lx = px * dims[lev, 0] - cbx * bx
    ly = py * dims[lev, 1] - cby * by
    lz = pz * dims[lev, 2] - cbz * bz
    return trilinear_brick(ref_cache, ref_pt_slot[e], lx, ly, lz, bx, by, bz)
