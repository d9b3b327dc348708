"""Pure-Python/NumPy fallback for the compiled kernels.

Mirrors bevmap/kernels/_compiled.pyx operation-for-operation so both
backends produce identical outputs on identical inputs (same RNG sequence,
same arithmetic, same iteration order). Kept deliberately un-clever where
cleverness would change float evaluation order.
"""

from __future__ import annotations

import math

import numpy as np

_M64 = (1 << 64) - 1


def _rng_init(seed: int) -> int:
    state = (seed ^ 0x9E3779B97F4A7C15) & _M64
    if state == 0:
        state = 0x9E3779B97F4A7C15
    return state


def _rng_next(state: int) -> tuple[int, int]:
    """xorshift64*; returns (new_state, 31-bit value)."""
    x = state
    x ^= x >> 12
    x = (x ^ (x << 25)) & _M64
    x ^= x >> 27
    return x, ((x * 0x2545F4914F6CDD1D) & _M64) >> 33


def _nonzero_sparse(mask: np.ndarray) -> np.ndarray:
    """Flat indices of nonzero bytes in row-major order.

    BEV rasters are overwhelmingly empty, so a full per-byte scan wastes
    almost all of its time on zero pixels. Viewing the buffer as 8-byte
    words and expanding only the nonzero words gives the same index list
    for a fraction of the memory passes.
    """
    flat = mask.reshape(-1)
    if not flat.flags.c_contiguous:
        return np.flatnonzero(flat)
    n = flat.shape[0]
    body = n - (n % 8)
    cand = np.flatnonzero(flat[:body].view(np.uint64))
    idx = (cand[:, None] * 8 + np.arange(8, dtype=np.int64)).reshape(-1)
    idx = idx[flat[idx] != 0]
    if n % 8:
        idx = np.concatenate([idx, body + np.flatnonzero(flat[body:])])
    return idx


def hough_ppht(
    mask: np.ndarray,
    rho_res_px: float,
    n_theta: int,
    votes_threshold: int,
    min_len_px: float,
    max_gap_px: int,
    seed: int,
    max_segments: int = 4096,
) -> np.ndarray:
    """Progressive probabilistic Hough transform over a binary pixel mask.

    `mask` (uint8, H x W) is mutated: pixels consumed by an extracted run are
    zeroed, voted-but-unconsumed pixels are set to 2. Returns an int32 array
    of shape (K, 4) with pixel-space endpoints (c1, r1, c2, r2).
    """
    h, w = mask.shape
    flat_idx = _nonzero_sparse(mask)
    pool_r = (flat_idx // w).astype(np.int32)
    pool_c = (flat_idx % w).astype(np.int32)
    pool_size = pool_r.shape[0]

    thetas = np.arange(n_theta, dtype=np.float64) * (math.pi / n_theta)
    cos_t = np.cos(thetas)
    sin_t = np.sin(thetas)
    n_rho = 2 * int(math.ceil(math.sqrt(float(h * h + w * w)) / rho_res_px)) + 1
    offset = n_rho // 2
    acc = np.zeros((n_theta, n_rho), dtype=np.int32)

    state = _rng_init(seed)
    out = []

    inv_rho = 1.0 / rho_res_px
    while pool_size > 0 and len(out) < max_segments:
        state, rnd = _rng_next(state)
        j = rnd % pool_size
        r = int(pool_r[j])
        c = int(pool_c[j])
        pool_size -= 1
        pool_r[j] = pool_r[pool_size]
        pool_c[j] = pool_c[pool_size]
        if mask[r, c] != 1:
            continue

        # Vote this pixel into every theta row; track its best bin.
        rho_idx = np.floor((c * cos_t + r * sin_t) * inv_rho + 0.5).astype(np.int64) + offset
        acc[np.arange(n_theta), rho_idx] += 1
        votes = acc[np.arange(n_theta), rho_idx]
        best_k = int(np.argmax(votes))
        best_votes = int(votes[best_k])
        mask[r, c] = 2
        if best_votes < votes_threshold:
            continue

        # Walk the image line through (c, r) at the winning angle.
        dx = -sin_t[best_k]
        dy = cos_t[best_k]
        if abs(dx) >= abs(dy):
            adx = abs(dx)
            step_x0 = 1.0 if dx > 0 else -1.0
            step_y0 = dy / adx
        else:
            ady = abs(dy)
            step_y0 = 1.0 if dy > 0 else -1.0
            step_x0 = dx / ady

        ends = [(c, r), (c, r)]
        for direction in range(2):
            sx = step_x0 if direction == 0 else -step_x0
            sy = step_y0 if direction == 0 else -step_y0
            fx = c + 0.5
            fy = r + 0.5
            gap = 0
            last_c, last_r = c, r
            while True:
                fx += sx
                fy += sy
                ci = int(math.floor(fx))
                ri = int(math.floor(fy))
                if ci < 0 or ci >= w or ri < 0 or ri >= h:
                    break
                if mask[ri, ci] != 0:
                    gap = 0
                    last_c, last_r = ci, ri
                else:
                    gap += 1
                    if gap > max_gap_px:
                        break
            ends[direction] = (last_c, last_r)

        (c1, r1), (c2, r2) = ends
        dc = float(c2 - c1)
        dr = float(r2 - r1)
        good = math.sqrt(dc * dc + dr * dr) >= min_len_px

        # Clear the corridor; un-vote pixels that had already voted.
        for direction in range(2):
            sx = step_x0 if direction == 0 else -step_x0
            sy = step_y0 if direction == 0 else -step_y0
            fx = c + 0.5
            fy = r + 0.5
            ec, er = ends[direction]
            while True:
                ci = int(math.floor(fx))
                ri = int(math.floor(fy))
                if ci < 0 or ci >= w or ri < 0 or ri >= h:
                    break
                st = mask[ri, ci]
                if st != 0:
                    if st == 2:
                        ridx = np.floor((ci * cos_t + ri * sin_t) * inv_rho + 0.5).astype(np.int64) + offset
                        acc[np.arange(n_theta), ridx] -= 1
                    mask[ri, ci] = 0
                if ci == ec and ri == er:
                    break
                fx += sx
                fy += sy

        if good:
            out.append((c1, r1, c2, r2))

    if not out:
        return np.zeros((0, 4), dtype=np.int32)
    return np.asarray(out, dtype=np.int32)


def _angle_diff_2pi(a: float, b: float) -> float:
    d = math.fmod(a - b, 2.0 * math.pi)
    if d <= -math.pi:
        d += 2.0 * math.pi
    elif d > math.pi:
        d -= 2.0 * math.pi
    return abs(d)


def lsd_grow(
    angles: np.ndarray,
    mag: np.ndarray,
    usable: np.ndarray,
    order_idx: np.ndarray,
    angle_tol: float,
    density_threshold: float,
    min_region_px: int,
    max_segments: int = 8192,
) -> np.ndarray:
    """Greedy level-line region growing with rectangle density validation.

    usable (uint8) is mutated: pixels joining any region become 0. order_idx
    holds flat indices of candidate seeds sorted by decreasing gradient
    magnitude. Returns f64 (K, 7): x1, y1, x2, y2, width_px, density, n_px,
    all in pixel coordinates.
    """
    h, w = angles.shape
    reg_r = np.empty(h * w, dtype=np.int32)
    reg_c = np.empty(h * w, dtype=np.int32)
    out = []

    for flat in order_idx:
        flat = int(flat)
        r0, c0 = flat // w, flat % w
        if usable[r0, c0] == 0:
            continue
        usable[r0, c0] = 0
        reg_r[0] = r0
        reg_c[0] = c0
        n_reg = 1
        sx = math.cos(angles[r0, c0])
        sy = math.sin(angles[r0, c0])
        reg_angle = angles[r0, c0]
        i = 0
        while i < n_reg:
            rr = int(reg_r[i])
            cc = int(reg_c[i])
            i += 1
            for nr in range(rr - 1, rr + 2):
                if nr < 0 or nr >= h:
                    continue
                for nc in range(cc - 1, cc + 2):
                    if nc < 0 or nc >= w:
                        continue
                    if usable[nr, nc] == 0:
                        continue
                    if _angle_diff_2pi(angles[nr, nc], reg_angle) <= angle_tol:
                        usable[nr, nc] = 0
                        reg_r[n_reg] = nr
                        reg_c[n_reg] = nc
                        n_reg += 1
                        sx += math.cos(angles[nr, nc])
                        sy += math.sin(angles[nr, nc])
                        reg_angle = math.atan2(sy, sx)
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
        theta = 0.5 * math.atan2(2.0 * ixy, ixx - iyy)
        ax = math.cos(theta)
        ay = math.sin(theta)
        lmin = lmax = wmin = wmax = 0.0
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
            (cx + lmin * ax, cy + lmin * ay, cx + lmax * ax, cy + lmax * ay, width, density, float(n_reg))
        )
        if len(out) >= max_segments:
            break

    if not out:
        return np.zeros((0, 7), dtype=np.float64)
    return np.asarray(out, dtype=np.float64)


def raycast(
    ox: np.ndarray,
    oy: np.ndarray,
    dir_x: np.ndarray,
    dir_y: np.ndarray,
    s_max: np.ndarray,
    z0: np.ndarray,
    tan_el: np.ndarray,
    box_cx: np.ndarray,
    box_cy: np.ndarray,
    box_ax: np.ndarray,
    box_ay: np.ndarray,
    box_hu: np.ndarray,
    box_hv: np.ndarray,
    box_h: np.ndarray,
    disc_cx: np.ndarray,
    disc_cy: np.ndarray,
    disc_r: np.ndarray,
    disc_h: np.ndarray,
    floor_enabled: bool,
    ceil_h: float,
) -> tuple[np.ndarray, np.ndarray]:
    """First-hit 2D ray casting with per-beam vertical gating.

    Beams are parameterized by horizontal distance s; a hit on an obstacle of
    height H is valid only when the beam's absolute z at the entry point,
    z0 + s*tan_el, lies in [0, H]. Returns (s, hit_id) with s = -1 and
    hit_id = -3 for misses; floor hits get id -1, ceiling hits id -2.
    """
    m = ox.shape[0]
    best = s_max.astype(np.float64).copy()
    best_id = np.full(m, -3, dtype=np.int32)

    with np.errstate(divide="ignore", invalid="ignore"):
        for b in range(box_cx.shape[0]):
            rx = ox - box_cx[b]
            ry = oy - box_cy[b]
            pu = rx * box_ax[b] + ry * box_ay[b]
            pv = -rx * box_ay[b] + ry * box_ax[b]
            du = dir_x * box_ax[b] + dir_y * box_ay[b]
            dv = -dir_x * box_ay[b] + dir_y * box_ax[b]

            t0 = np.full(m, -np.inf)
            t1 = np.full(m, np.inf)
            ok = np.ones(m, dtype=bool)
            for p, d, half in ((pu, du, box_hu[b]), (pv, dv, box_hv[b])):
                par = np.abs(d) < 1e-300
                ok &= ~(par & (np.abs(p) > half))
                with np.errstate(divide="ignore", invalid="ignore"):
                    ta = (-half - p) / d
                    tb = (half - p) / d
                lo = np.minimum(ta, tb)
                hi = np.maximum(ta, tb)
                t0 = np.where(par, t0, np.maximum(t0, lo))
                t1 = np.where(par, t1, np.minimum(t1, hi))
            z_entry = z0 + t0 * tan_el
            hit = ok & (t0 <= t1) & (t0 >= 0.0) & (z_entry >= 0.0) & (z_entry <= box_h[b]) & (t0 < best)
            best = np.where(hit, t0, best)
            best_id = np.where(hit, np.int32(b), best_id)

        n_boxes = box_cx.shape[0]
        for cdi in range(disc_cx.shape[0]):
            fx = ox - disc_cx[cdi]
            fy = oy - disc_cy[cdi]
            bq = fx * dir_x + fy * dir_y
            cq = fx * fx + fy * fy - disc_r[cdi] * disc_r[cdi]
            disc = bq * bq - cq
            has = disc >= 0.0
            sq = np.sqrt(np.where(has, disc, 0.0))
            t = -bq - sq
            z_entry = z0 + t * tan_el
            hit = has & (t >= 0.0) & (z_entry >= 0.0) & (z_entry <= disc_h[cdi]) & (t < best)
            best = np.where(hit, t, best)
            best_id = np.where(hit, np.int32(n_boxes + cdi), best_id)

        if floor_enabled:
            desc = tan_el < 0.0
            tf = np.where(desc, -z0 / np.where(desc, tan_el, -1.0), np.inf)
            hit = desc & (tf >= 0.0) & (tf < best)
            best = np.where(hit, tf, best)
            best_id = np.where(hit, np.int32(-1), best_id)
        if ceil_h > 0.0:
            asc = tan_el > 0.0
            tc = np.where(asc, (ceil_h - z0) / np.where(asc, tan_el, 1.0), np.inf)
            hit = asc & (tc >= 0.0) & (tc < best)
            best = np.where(hit, tc, best)
            best_id = np.where(hit, np.int32(-2), best_id)

    miss = best_id == -3
    s = np.where(miss, -1.0, best)
    return s, best_id
