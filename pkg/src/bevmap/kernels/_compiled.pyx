# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: PPHT line extraction, LSD region growing, ray casting.

Each function mirrors its counterpart in bevmap/kernels/_fallback.py
operation-for-operation; the two backends must stay bit-identical on
identical inputs.
"""

import math

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, cos, fabs, floor, fmod, sin, sqrt
from libc.string cimport memcpy

cnp.import_array()

cdef unsigned long long RNG_MULT = 0x2545F4914F6CDD1DULL
cdef unsigned long long RNG_GAMMA = 0x9E3779B97F4A7C15ULL

cdef double PI = 3.141592653589793
cdef double TWO_PI = 6.283185307179586


cdef inline unsigned long long rng_init(unsigned long long seed) nogil:
    cdef unsigned long long state = seed ^ RNG_GAMMA
    if state == 0:
        state = RNG_GAMMA
    return state


cdef inline unsigned long long rng_step(unsigned long long state) nogil:
    cdef unsigned long long x = state
    x ^= x >> 12
    x ^= x << 25
    x ^= x >> 27
    return x


cdef inline unsigned long long rng_value(unsigned long long state) nogil:
    return (state * RNG_MULT) >> 33


def hough_ppht(
    cnp.uint8_t[:, ::1] mask,
    double rho_res_px,
    int n_theta,
    int votes_threshold,
    double min_len_px,
    int max_gap_px,
    unsigned long long seed,
    int max_segments=4096,
):
    """Progressive probabilistic Hough transform over a binary pixel mask.

    `mask` (uint8, H x W) is mutated: pixels consumed by an extracted run are
    zeroed, voted-but-unconsumed pixels are set to 2. Returns an int32 array
    of shape (K, 4) with pixel-space endpoints (c1, r1, c2, r2).
    """
    cdef int h = mask.shape[0]
    cdef int w = mask.shape[1]

    # Sparse nonzero scan: BEV rasters are overwhelmingly empty, so read
    # the buffer as 8-byte words and only expand the nonzero ones. The
    # resulting pool matches a plain row-major nonzero scan exactly.
    cdef long total = <long>h * <long>w
    cdef long n_words = total >> 3
    cdef long tail_start = n_words << 3
    cdef const cnp.uint8_t* base = &mask[0, 0]
    cdef unsigned long long wval
    cdef long wi, bi, flat_i
    cdef long count = 0
    for wi in range(n_words):
        memcpy(&wval, base + (wi << 3), 8)
        if wval != 0:
            for bi in range(8):
                if base[(wi << 3) + bi] != 0:
                    count += 1
    for flat_i in range(tail_start, total):
        if base[flat_i] != 0:
            count += 1

    pool_r_np = np.empty(count, dtype=np.int32)
    pool_c_np = np.empty(count, dtype=np.int32)
    cdef cnp.int32_t[::1] pool_r = pool_r_np
    cdef cnp.int32_t[::1] pool_c = pool_c_np
    cdef long pos = 0
    for wi in range(n_words):
        memcpy(&wval, base + (wi << 3), 8)
        if wval != 0:
            for bi in range(8):
                flat_i = (wi << 3) + bi
                if base[flat_i] != 0:
                    pool_r[pos] = <cnp.int32_t>(flat_i // w)
                    pool_c[pos] = <cnp.int32_t>(flat_i % w)
                    pos += 1
    for flat_i in range(tail_start, total):
        if base[flat_i] != 0:
            pool_r[pos] = <cnp.int32_t>(flat_i // w)
            pool_c[pos] = <cnp.int32_t>(flat_i % w)
            pos += 1
    cdef long pool_size = count

    thetas = np.arange(n_theta, dtype=np.float64) * (math.pi / n_theta)
    cos_np = np.cos(thetas)
    sin_np = np.sin(thetas)
    cdef double[::1] cos_t = cos_np
    cdef double[::1] sin_t = sin_np

    cdef int n_rho = 2 * <int>math.ceil(math.sqrt(float(h * h + w * w)) / rho_res_px) + 1
    cdef int offset = n_rho // 2
    acc_np = np.zeros((n_theta, n_rho), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] acc = acc_np

    out_np = np.empty((max_segments, 4), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] out = out_np
    cdef int n_out = 0

    cdef unsigned long long state = rng_init(seed)
    cdef double inv_rho = 1.0 / rho_res_px

    cdef long j
    cdef int r, c, k, best_k, best_votes, v, idx
    cdef double dx, dy, adx, ady, step_x0, step_y0, sx, sy, fx, fy
    cdef int direction, gap, ci, ri, last_c, last_r, ec, er
    cdef int c1, r1, c2, r2
    cdef int end_c0, end_r0, end_c1, end_r1
    cdef double dc, dr
    cdef bint good
    cdef cnp.uint8_t st

    while pool_size > 0 and n_out < max_segments:
        state = rng_step(state)
        j = <long>(rng_value(state) % <unsigned long long>pool_size)
        r = pool_r[j]
        c = pool_c[j]
        pool_size -= 1
        pool_r[j] = pool_r[pool_size]
        pool_c[j] = pool_c[pool_size]
        if mask[r, c] != 1:
            continue

        # Vote this pixel into every theta row; track its best bin.
        best_k = 0
        best_votes = 0
        for k in range(n_theta):
            idx = <int>floor((c * cos_t[k] + r * sin_t[k]) * inv_rho + 0.5) + offset
            acc[k, idx] += 1
            v = acc[k, idx]
            if v > best_votes:
                best_votes = v
                best_k = k
        mask[r, c] = 2
        if best_votes < votes_threshold:
            continue

        # Walk the image line through (c, r) at the winning angle.
        dx = -sin_t[best_k]
        dy = cos_t[best_k]
        if fabs(dx) >= fabs(dy):
            adx = fabs(dx)
            step_x0 = 1.0 if dx > 0 else -1.0
            step_y0 = dy / adx
        else:
            ady = fabs(dy)
            step_y0 = 1.0 if dy > 0 else -1.0
            step_x0 = dx / ady

        end_c0 = c
        end_r0 = r
        end_c1 = c
        end_r1 = r
        for direction in range(2):
            sx = step_x0 if direction == 0 else -step_x0
            sy = step_y0 if direction == 0 else -step_y0
            fx = c + 0.5
            fy = r + 0.5
            gap = 0
            last_c = c
            last_r = r
            while True:
                fx += sx
                fy += sy
                ci = <int>floor(fx)
                ri = <int>floor(fy)
                if ci < 0 or ci >= w or ri < 0 or ri >= h:
                    break
                if mask[ri, ci] != 0:
                    gap = 0
                    last_c = ci
                    last_r = ri
                else:
                    gap += 1
                    if gap > max_gap_px:
                        break
            if direction == 0:
                end_c0 = last_c
                end_r0 = last_r
            else:
                end_c1 = last_c
                end_r1 = last_r

        c1 = end_c0
        r1 = end_r0
        c2 = end_c1
        r2 = end_r1
        dc = <double>(c2 - c1)
        dr = <double>(r2 - r1)
        good = sqrt(dc * dc + dr * dr) >= min_len_px

        # Clear the corridor; un-vote pixels that had already voted.
        for direction in range(2):
            sx = step_x0 if direction == 0 else -step_x0
            sy = step_y0 if direction == 0 else -step_y0
            fx = c + 0.5
            fy = r + 0.5
            if direction == 0:
                ec = end_c0
                er = end_r0
            else:
                ec = end_c1
                er = end_r1
            while True:
                ci = <int>floor(fx)
                ri = <int>floor(fy)
                if ci < 0 or ci >= w or ri < 0 or ri >= h:
                    break
                st = mask[ri, ci]
                if st != 0:
                    if st == 2:
                        for k in range(n_theta):
                            idx = <int>floor((ci * cos_t[k] + ri * sin_t[k]) * inv_rho + 0.5) + offset
                            acc[k, idx] -= 1
                    mask[ri, ci] = 0
                if ci == ec and ri == er:
                    break
                fx += sx
                fy += sy

        if good:
            out[n_out, 0] = c1
            out[n_out, 1] = r1
            out[n_out, 2] = c2
            out[n_out, 3] = r2
            n_out += 1

    return out_np[:n_out].copy()


cdef inline double angle_diff_2pi(double a, double b) nogil:
    cdef double d = fmod(a - b, TWO_PI)
    if d <= -PI:
        d += TWO_PI
    elif d > PI:
        d -= TWO_PI
    return fabs(d)


def lsd_grow(
    double[:, ::1] angles,
    double[:, ::1] mag,
    cnp.uint8_t[:, ::1] usable,
    cnp.int64_t[::1] order_idx,
    double angle_tol,
    double density_threshold,
    int min_region_px,
    int max_segments=8192,
):
    """Greedy level-line region growing with rectangle density validation.

    usable (uint8) is mutated: pixels joining any region become 0. order_idx
    holds flat indices of candidate seeds sorted by decreasing gradient
    magnitude. Returns f64 (K, 7): x1, y1, x2, y2, width_px, density, n_px,
    all in pixel coordinates.
    """
    cdef int h = angles.shape[0]
    cdef int w = angles.shape[1]
    reg_r_np = np.empty(h * w, dtype=np.int32)
    reg_c_np = np.empty(h * w, dtype=np.int32)
    cdef cnp.int32_t[::1] reg_r = reg_r_np
    cdef cnp.int32_t[::1] reg_c = reg_c_np

    out = []

    cdef long flat, n_reg, i, k
    cdef int r0, c0, rr, cc, nr, nc
    cdef double sx, sy, reg_angle, msum, cx, cy, m, ex, ey
    cdef double ixx, iyy, ixy, theta, ax, ay
    cdef double lmin, lmax, wmin, wmax, lproj, wproj, length, width, density
    cdef long seed_i

    for seed_i in range(order_idx.shape[0]):
        flat = order_idx[seed_i]
        r0 = <int>(flat // w)
        c0 = <int>(flat % w)
        if usable[r0, c0] == 0:
            continue
        usable[r0, c0] = 0
        reg_r[0] = r0
        reg_c[0] = c0
        n_reg = 1
        sx = cos(angles[r0, c0])
        sy = sin(angles[r0, c0])
        reg_angle = angles[r0, c0]
        i = 0
        while i < n_reg:
            rr = reg_r[i]
            cc = reg_c[i]
            i += 1
            for nr in range(rr - 1, rr + 2):
                if nr < 0 or nr >= h:
                    continue
                for nc in range(cc - 1, cc + 2):
                    if nc < 0 or nc >= w:
                        continue
                    if usable[nr, nc] == 0:
                        continue
                    if angle_diff_2pi(angles[nr, nc], reg_angle) <= angle_tol:
                        usable[nr, nc] = 0
                        reg_r[n_reg] = nr
                        reg_c[n_reg] = nc
                        n_reg += 1
                        sx += cos(angles[nr, nc])
                        sy += sin(angles[nr, nc])
                        reg_angle = atan2(sy, sx)
        if n_reg < min_region_px:
            continue

        # Magnitude-weighted rectangle fit.
        msum = 0.0
        cx = 0.0
        cy = 0.0
        for k in range(n_reg):
            m = mag[reg_r[k], reg_c[k]]
            msum += m
            cx += m * reg_c[k]
            cy += m * reg_r[k]
        cx /= msum
        cy /= msum
        ixx = 0.0
        iyy = 0.0
        ixy = 0.0
        for k in range(n_reg):
            m = mag[reg_r[k], reg_c[k]]
            ex = reg_c[k] - cx
            ey = reg_r[k] - cy
            ixx += m * ex * ex
            iyy += m * ey * ey
            ixy += m * ex * ey
        theta = 0.5 * atan2(2.0 * ixy, ixx - iyy)
        ax = cos(theta)
        ay = sin(theta)
        lmin = 0.0
        lmax = 0.0
        wmin = 0.0
        wmax = 0.0
        for k in range(n_reg):
            ex = reg_c[k] - cx
            ey = reg_r[k] - cy
            lproj = ex * ax + ey * ay
            wproj = -ex * ay + ey * ax
            if lproj < lmin:
                lmin = lproj
            elif lproj > lmax:
                lmax = lproj
            if wproj < wmin:
                wmin = wproj
            elif wproj > wmax:
                wmax = wproj
        length = lmax - lmin
        width = wmax - wmin
        density = n_reg / ((length + 1.0) * (width + 1.0))
        if density < density_threshold:
            continue
        out.append(
            (cx + lmin * ax, cy + lmin * ay, cx + lmax * ax, cy + lmax * ay, width, density, <double>n_reg)
        )
        if len(out) >= max_segments:
            break

    if not out:
        return np.zeros((0, 7), dtype=np.float64)
    return np.asarray(out, dtype=np.float64)


def raycast(
    double[::1] ox,
    double[::1] oy,
    double[::1] dir_x,
    double[::1] dir_y,
    double[::1] s_max,
    double[::1] z0,
    double[::1] tan_el,
    double[::1] box_cx,
    double[::1] box_cy,
    double[::1] box_ax,
    double[::1] box_ay,
    double[::1] box_hu,
    double[::1] box_hv,
    double[::1] box_h,
    double[::1] disc_cx,
    double[::1] disc_cy,
    double[::1] disc_r,
    double[::1] disc_h,
    bint floor_enabled,
    double ceil_h,
):
    """First-hit 2D ray casting with per-beam vertical gating.

    Beams are parameterized by horizontal distance s; a hit on an obstacle of
    height H is valid only when the beam's absolute z at the entry point,
    z0 + s*tan_el, lies in [0, H]. Returns (s, hit_id) with s = -1 and
    hit_id = -3 for misses; floor hits get id -1, ceiling hits id -2.
    """
    cdef long m = ox.shape[0]
    cdef long n_boxes = box_cx.shape[0]
    cdef long n_discs = disc_cx.shape[0]

    s_np = np.empty(m, dtype=np.float64)
    id_np = np.empty(m, dtype=np.int32)
    cdef double[::1] s_out = s_np
    cdef cnp.int32_t[::1] id_out = id_np

    cdef long i, b, cdi
    cdef double best, rx, ry, pu, pv, du, dv, t0, t1, ta, tb, lo, hi
    cdef double z_entry, fx, fy, bq, cq, disc, sq, t, tf, tc
    cdef int best_id
    cdef bint ok

    for i in range(m):
        best = s_max[i]
        best_id = -3

        for b in range(n_boxes):
            rx = ox[i] - box_cx[b]
            ry = oy[i] - box_cy[b]
            pu = rx * box_ax[b] + ry * box_ay[b]
            pv = -rx * box_ay[b] + ry * box_ax[b]
            du = dir_x[i] * box_ax[b] + dir_y[i] * box_ay[b]
            dv = -dir_x[i] * box_ay[b] + dir_y[i] * box_ax[b]

            ok = True
            t0 = -1e308
            t1 = 1e308
            if fabs(du) < 1e-300:
                if fabs(pu) > box_hu[b]:
                    ok = False
            else:
                ta = (-box_hu[b] - pu) / du
                tb = (box_hu[b] - pu) / du
                lo = ta if ta < tb else tb
                hi = tb if ta < tb else ta
                if lo > t0:
                    t0 = lo
                if hi < t1:
                    t1 = hi
            if ok:
                if fabs(dv) < 1e-300:
                    if fabs(pv) > box_hv[b]:
                        ok = False
                else:
                    ta = (-box_hv[b] - pv) / dv
                    tb = (box_hv[b] - pv) / dv
                    lo = ta if ta < tb else tb
                    hi = tb if ta < tb else ta
                    if lo > t0:
                        t0 = lo
                    if hi < t1:
                        t1 = hi
            if ok and t0 <= t1 and t0 >= 0.0:
                z_entry = z0[i] + t0 * tan_el[i]
                if z_entry >= 0.0 and z_entry <= box_h[b] and t0 < best:
                    best = t0
                    best_id = <int>b

        for cdi in range(n_discs):
            fx = ox[i] - disc_cx[cdi]
            fy = oy[i] - disc_cy[cdi]
            bq = fx * dir_x[i] + fy * dir_y[i]
            cq = fx * fx + fy * fy - disc_r[cdi] * disc_r[cdi]
            disc = bq * bq - cq
            if disc >= 0.0:
                sq = sqrt(disc)
                t = -bq - sq
                if t >= 0.0:
                    z_entry = z0[i] + t * tan_el[i]
                    if z_entry >= 0.0 and z_entry <= disc_h[cdi] and t < best:
                        best = t
                        best_id = <int>(n_boxes + cdi)

        if floor_enabled and tan_el[i] < 0.0:
            tf = -z0[i] / tan_el[i]
            if tf >= 0.0 and tf < best:
                best = tf
                best_id = -1
        if ceil_h > 0.0 and tan_el[i] > 0.0:
            tc = (ceil_h - z0[i]) / tan_el[i]
            if tc >= 0.0 and tc < best:
                best = tc
                best_id = -2

        if best_id == -3:
            s_out[i] = -1.0
        else:
            s_out[i] = best
        id_out[i] = best_id

    return s_np, id_np
