"""Kernel tests: backend parity (bit-identical) plus independent oracles.

The compiled and fallback backends implement the same algorithms with the
same RNG; every parity test compares their outputs exactly, not to a
tolerance. Oracles are built from scratch here (shapely for ray casting,
brute-force pixel checks for the image kernels).
"""

import math

import numpy as np
import pytest
import shapely.geometry as sgeom

from bevmap.kernels import available_backends, get_backend

BACKENDS = available_backends()
HAVE_BOTH = len(BACKENDS) == 2

needs_both = pytest.mark.skipif(not HAVE_BOTH, reason="compiled backend not built")


def _random_mask(rng, h, w, density):
    m = (rng.random((h, w)) < density).astype(np.uint8)
    return m


def _draw_line(mask, c1, r1, c2, r2):
    n = int(max(abs(c2 - c1), abs(r2 - r1))) + 1
    cs = np.round(np.linspace(c1, c2, n)).astype(int)
    rs = np.round(np.linspace(r1, r2, n)).astype(int)
    mask[rs, cs] = 1


class TestHoughParity:
    @needs_both
    @pytest.mark.parametrize("seed", [0, 1, 7, 1234])
    def test_bitwise_identical_on_random_masks(self, seed):
        rng = np.random.default_rng(seed)
        base = _random_mask(rng, 96, 128, 0.05)
        _draw_line(base, 10, 20, 110, 30)
        _draw_line(base, 60, 5, 64, 90)

        results = {}
        masks = {}
        for name, mod in BACKENDS.items():
            m = base.copy()
            segs = mod.hough_ppht(m, 1.0, 45, 12, 20.0, 2, seed=seed)
            results[name] = segs
            masks[name] = m
        np.testing.assert_array_equal(results["compiled"], results["fallback"])
        np.testing.assert_array_equal(masks["compiled"], masks["fallback"])

    @needs_both
    def test_rng_sequences_match(self):
        from bevmap.kernels import _fallback

        comp = BACKENDS["compiled"]
        # A fully occupied block forces many pool draws; identical outputs
        # imply identical draw sequences.
        base = np.ones((40, 40), dtype=np.uint8)
        a = comp.hough_ppht(base.copy(), 1.0, 30, 10, 8.0, 1, seed=99)
        b = _fallback.hough_ppht(base.copy(), 1.0, 30, 10, 8.0, 1, seed=99)
        np.testing.assert_array_equal(a, b)


class TestHoughBehavior:
    def _run(self, mask, **kw):
        mod = BACKENDS[get_backend()]
        args = dict(rho_res_px=1.0, n_theta=90, votes_threshold=15,
                    min_len_px=25.0, max_gap_px=2, seed=3)
        args.update(kw)
        return mod.hough_ppht(mask, args["rho_res_px"], args["n_theta"],
                              args["votes_threshold"], args["min_len_px"],
                              args["max_gap_px"], args["seed"])

    def test_single_clean_line_recovered(self):
        mask = np.zeros((120, 160), dtype=np.uint8)
        _draw_line(mask, 20, 60, 140, 60)
        segs = self._run(mask.copy())
        assert segs.shape[0] == 1
        c1, r1, c2, r2 = segs[0]
        lo, hi = sorted((c1, c2))
        assert abs(lo - 20) <= 2 and abs(hi - 140) <= 2
        assert abs(r1 - 60) <= 1 and abs(r2 - 60) <= 1

    def test_line_pixels_consumed(self):
        mask = np.zeros((120, 160), dtype=np.uint8)
        _draw_line(mask, 20, 60, 140, 60)
        work = mask.copy()
        segs = self._run(work)
        assert segs.shape[0] == 1
        # The corridor walk must zero the detected run.
        assert work[60, 30:130].sum() == 0

    def test_short_segment_rejected_by_min_len(self):
        mask = np.zeros((80, 80), dtype=np.uint8)
        _draw_line(mask, 30, 40, 45, 40)
        segs = self._run(mask.copy(), votes_threshold=8, min_len_px=40.0)
        assert segs.shape[0] == 0

    def test_gap_bridging(self):
        mask = np.zeros((100, 200), dtype=np.uint8)
        _draw_line(mask, 10, 50, 90, 50)
        _draw_line(mask, 93, 50, 180, 50)  # 2 px gap at 91..92
        segs = self._run(mask.copy(), max_gap_px=3)
        assert segs.shape[0] == 1
        cs = sorted((segs[0][0], segs[0][2]))
        assert cs[0] <= 12 and cs[1] >= 178

    def test_gap_not_bridged_when_zero_tolerance(self):
        mask = np.zeros((100, 200), dtype=np.uint8)
        _draw_line(mask, 10, 50, 90, 50)
        _draw_line(mask, 95, 50, 180, 50)
        segs = self._run(mask.copy(), max_gap_px=0, min_len_px=30.0)
        # Each half must be reported on its own.
        assert segs.shape[0] == 2
        spans = sorted(tuple(sorted((s[0], s[2]))) for s in segs)
        assert spans[0][1] < 93 and spans[1][0] > 92

    def test_determinism_same_seed(self):
        rng = np.random.default_rng(5)
        base = _random_mask(rng, 64, 64, 0.2)
        a = self._run(base.copy(), votes_threshold=10, min_len_px=10.0)
        b = self._run(base.copy(), votes_threshold=10, min_len_px=10.0)
        np.testing.assert_array_equal(a, b)

    def test_empty_mask(self):
        segs = self._run(np.zeros((32, 32), dtype=np.uint8))
        assert segs.shape == (0, 4)
        assert segs.dtype == np.int32


class TestLsdParity:
    def _field(self, seed):
        rng = np.random.default_rng(seed)
        h, w = 60, 80
        angles = rng.uniform(-math.pi, math.pi, (h, w))
        # Two coherent stripes with small angle jitter.
        angles[20:24, 5:70] = 0.3 + rng.normal(0, 0.02, (4, 65))
        angles[30:50, 40:44] = -1.2 + rng.normal(0, 0.02, (20, 4))
        mag = rng.uniform(0.1, 1.0, (h, w))
        usable = np.zeros((h, w), dtype=np.uint8)
        usable[20:24, 5:70] = 1
        usable[30:50, 40:44] = 1
        extra = rng.random((h, w)) < 0.02
        usable[extra] = 1
        order = np.argsort(-mag, axis=None, kind="stable").astype(np.int64)
        return angles, mag, usable, order

    @needs_both
    @pytest.mark.parametrize("seed", [0, 11, 42])
    def test_bitwise_identical(self, seed):
        angles, mag, usable, order = self._field(seed)
        outs = {}
        useds = {}
        for name, mod in BACKENDS.items():
            u = usable.copy()
            outs[name] = mod.lsd_grow(angles.copy(), mag.copy(), u, order.copy(),
                                      0.35, 0.5, 20)
            useds[name] = u
        np.testing.assert_array_equal(outs["compiled"], outs["fallback"])
        np.testing.assert_array_equal(useds["compiled"], useds["fallback"])


class TestLsdBehavior:
    def test_horizontal_stripe_yields_one_aligned_segment(self):
        mod = BACKENDS[get_backend()]
        h, w = 50, 120
        angles = np.zeros((h, w))
        mag = np.ones((h, w))
        usable = np.zeros((h, w), dtype=np.uint8)
        usable[24:27, 10:110] = 1
        order = np.argsort(-mag, axis=None, kind="stable").astype(np.int64)
        out = mod.lsd_grow(angles, mag, usable, order, 0.3, 0.4, 30)
        assert out.shape[0] == 1
        x1, y1, x2, y2, width, density, n_px = out[0]
        assert n_px == 300
        length = math.hypot(x2 - x1, y2 - y1)
        assert 95 <= length <= 102
        assert 1.5 <= width <= 3.0
        # Orientation along x.
        assert abs(y2 - y1) < 1.0
        assert density > 0.9

    def test_min_region_filter(self):
        mod = BACKENDS[get_backend()]
        h, w = 30, 30
        angles = np.zeros((h, w))
        mag = np.ones((h, w))
        usable = np.zeros((h, w), dtype=np.uint8)
        usable[10, 5:12] = 1  # 7 px only
        order = np.argsort(-mag, axis=None, kind="stable").astype(np.int64)
        out = mod.lsd_grow(angles, mag, usable, order, 0.3, 0.4, 20)
        assert out.shape[0] == 0

    def test_angle_tolerance_splits_regions(self):
        mod = BACKENDS[get_backend()]
        h, w = 40, 100
        angles = np.zeros((h, w))
        angles[:, 50:] = 1.5  # sharp angle change mid-stripe
        mag = np.ones((h, w))
        usable = np.zeros((h, w), dtype=np.uint8)
        usable[19:22, 5:95] = 1
        order = np.argsort(-mag, axis=None, kind="stable").astype(np.int64)
        out = mod.lsd_grow(angles, mag, usable, order, 0.3, 0.4, 20)
        assert out.shape[0] == 2


def _shapely_scene(boxes, discs):
    geoms = []
    for cx, cy, ax, ay, hu, hv, hgt in boxes:
        u = np.array([ax, ay])
        v = np.array([-ay, ax])
        c = np.array([cx, cy])
        corners = [c + su * hu * u + sv * hv * v
                   for su, sv in ((1, 1), (1, -1), (-1, -1), (-1, 1))]
        geoms.append((sgeom.Polygon(corners), hgt))
    for cx, cy, r, hgt in discs:
        geoms.append((sgeom.Point(cx, cy).buffer(r, quad_segs=512), hgt))
    return geoms


def _shapely_first_hit(geoms, ox, oy, dx, dy, smax, z0, te):
    """Entry-distance oracle: first boundary crossing whose entry z passes
    the height gate. Ignores floor/ceiling (tested separately)."""
    ray = sgeom.LineString([(ox, oy), (ox + dx * smax, oy + dy * smax)])
    best = smax
    best_i = -3
    for i, (poly, hgt) in enumerate(geoms):
        inter = poly.exterior.intersection(ray)
        if inter.is_empty:
            continue
        pts = []
        if inter.geom_type == "Point":
            pts = [inter]
        elif inter.geom_type == "MultiPoint":
            pts = list(inter.geoms)
        else:
            for g in getattr(inter, "geoms", []):
                if g.geom_type == "Point":
                    pts.append(g)
                else:
                    pts.extend(sgeom.Point(c) for c in g.coords)
        if not pts:
            continue
        t = min(math.hypot(p.x - ox, p.y - oy) for p in pts)
        z = z0 + t * te
        if 0.0 <= z <= hgt and t < best:
            best = t
            best_i = i
    return best, best_i


def _run_raycast(mod, beams, boxes, discs, floor_enabled=False, ceil_h=0.0):
    ox, oy, dx, dy, smax, z0, te = (np.asarray(a, dtype=np.float64) for a in zip(*beams))
    if boxes:
        bcx, bcy, bax, bay, bhu, bhv, bh = (np.asarray(a, dtype=np.float64) for a in zip(*boxes))
    else:
        bcx = bcy = bax = bay = bhu = bhv = bh = np.zeros(0)
    if discs:
        dcx, dcy, drr, dh = (np.asarray(a, dtype=np.float64) for a in zip(*discs))
    else:
        dcx = dcy = drr = dh = np.zeros(0)
    return mod.raycast(ox, oy, dx, dy, smax, z0, te,
                       bcx, bcy, bax, bay, bhu, bhv, bh,
                       dcx, dcy, drr, dh, floor_enabled, ceil_h)


class TestRaycastOracle:
    def test_axis_aligned_wall(self):
        mod = BACKENDS[get_backend()]
        # Wall face at x = 5 - 0.05, beam along +x from origin.
        boxes = [(5.0, 0.0, 1.0, 0.0, 0.05, 2.0, 3.0)]
        beams = [(0.0, 0.0, 1.0, 0.0, 50.0, 1.0, 0.0)]
        s, ids = _run_raycast(mod, beams, boxes, [])
        assert ids[0] == 0
        assert s[0] == pytest.approx(4.95, abs=1e-12)

    def test_height_gate_blocks_high_beam(self):
        mod = BACKENDS[get_backend()]
        # 1 m tall box 5 m out; beam climbing at tan=0.3 from z0=1 has
        # z=2.485 at entry, above the box: must pass over it.
        boxes = [(5.0, 0.0, 1.0, 0.0, 0.05, 2.0, 1.0)]
        beams = [(0.0, 0.0, 1.0, 0.0, 50.0, 1.0, 0.3),
                 (0.0, 0.0, 1.0, 0.0, 50.0, 1.0, -0.05)]
        s, ids = _run_raycast(mod, beams, boxes, [])
        assert ids[0] == -3 and s[0] == -1.0
        # Descending beam: z = 1 - 0.05*4.95 = 0.7525, inside the box.
        assert ids[1] == 0 and s[1] == pytest.approx(4.95, abs=1e-12)

    def test_floor_and_ceiling(self):
        mod = BACKENDS[get_backend()]
        beams = [(0.0, 0.0, 1.0, 0.0, 50.0, 1.2, -0.1),
                 (0.0, 0.0, 1.0, 0.0, 50.0, 1.2, 0.2)]
        s, ids = _run_raycast(mod, beams, [], [], floor_enabled=True, ceil_h=3.0)
        assert ids[0] == -1
        assert s[0] == pytest.approx(12.0, rel=1e-12)
        assert ids[1] == -2
        assert s[1] == pytest.approx((3.0 - 1.2) / 0.2, rel=1e-12)

    def test_disc_hit_distance(self):
        mod = BACKENDS[get_backend()]
        discs = [(10.0, 0.0, 0.5, 3.0)]
        beams = [(0.0, 0.0, 1.0, 0.0, 50.0, 1.0, 0.0)]
        s, ids = _run_raycast(mod, beams, [], discs)
        assert ids[0] == 0  # disc ids start after boxes; none here
        assert s[0] == pytest.approx(9.5, abs=1e-12)

    def test_disc_id_offset_after_boxes(self):
        mod = BACKENDS[get_backend()]
        boxes = [(100.0, 100.0, 1.0, 0.0, 0.1, 0.1, 3.0)]
        discs = [(10.0, 0.0, 0.5, 3.0)]
        beams = [(0.0, 0.0, 1.0, 0.0, 50.0, 1.0, 0.0)]
        s, ids = _run_raycast(mod, beams, boxes, discs)
        assert ids[0] == 1

    def test_nearest_of_many_wins(self):
        mod = BACKENDS[get_backend()]
        boxes = [(8.0, 0.0, 1.0, 0.0, 0.05, 2.0, 3.0),
                 (4.0, 0.0, 1.0, 0.0, 0.05, 2.0, 3.0)]
        beams = [(0.0, 0.0, 1.0, 0.0, 50.0, 1.0, 0.0)]
        s, ids = _run_raycast(mod, beams, boxes, [])
        assert ids[0] == 1
        assert s[0] == pytest.approx(3.95, abs=1e-12)

    def test_range_limit_misses(self):
        mod = BACKENDS[get_backend()]
        boxes = [(60.0, 0.0, 1.0, 0.0, 0.05, 2.0, 3.0)]
        beams = [(0.0, 0.0, 1.0, 0.0, 45.0, 1.0, 0.0)]
        s, ids = _run_raycast(mod, beams, boxes, [])
        assert ids[0] == -3 and s[0] == -1.0

    def test_rotated_box_against_shapely(self):
        mod = BACKENDS[get_backend()]
        rng = np.random.default_rng(17)
        ang = 0.4
        boxes = [(6.0, 2.0, math.cos(ang), math.sin(ang), 3.0, 0.2, 2.5)]
        discs = [(3.0, -2.0, 0.8, 2.5)]
        geoms = _shapely_scene(boxes, discs)
        beams = []
        for _ in range(200):
            th = rng.uniform(-math.pi, math.pi)
            te = rng.uniform(-0.2, 0.2)
            beams.append((0.0, 0.0, math.cos(th), math.sin(th), 30.0, 1.0, te))
        s, ids = _run_raycast(mod, beams, boxes, discs)
        for k, (ox, oy, dx, dy, smax, z0, te) in enumerate(beams):
            t_ref, i_ref = _shapely_first_hit(geoms, ox, oy, dx, dy, smax, z0, te)
            if ids[k] == -3:
                # Oracle may find a grazing hit the kernel misses at the
                # boundary; only require no confidently-expected hit lost.
                if i_ref != -3:
                    assert t_ref > smax - 1e-6 or abs(z0 + t_ref * te) < 1e-9
            else:
                assert i_ref == ids[k]
                assert s[k] == pytest.approx(t_ref, abs=2e-3)


class TestRaycastParity:
    @needs_both
    @pytest.mark.parametrize("seed", [2, 23, 404])
    def test_bitwise_identical(self, seed):
        rng = np.random.default_rng(seed)
        boxes = []
        for _ in range(6):
            a = rng.uniform(0, math.pi)
            boxes.append((rng.uniform(-10, 10), rng.uniform(-10, 10),
                          math.cos(a), math.sin(a),
                          rng.uniform(0.1, 4.0), rng.uniform(0.05, 0.5),
                          rng.uniform(0.5, 3.0)))
        discs = [(rng.uniform(-10, 10), rng.uniform(-10, 10),
                  rng.uniform(0.1, 0.6), rng.uniform(0.5, 3.0)) for _ in range(4)]
        beams = []
        for _ in range(512):
            th = rng.uniform(-math.pi, math.pi)
            beams.append((rng.uniform(-1, 1), rng.uniform(-1, 1),
                          math.cos(th), math.sin(th), 40.0,
                          rng.uniform(0.5, 1.5), rng.uniform(-0.4, 0.4)))
        outs = {}
        for name, mod in BACKENDS.items():
            outs[name] = _run_raycast(mod, beams, boxes, discs,
                                      floor_enabled=True, ceil_h=3.2)
        s_c, id_c = outs["compiled"]
        s_f, id_f = outs["fallback"]
        np.testing.assert_array_equal(id_c, id_f)
        np.testing.assert_array_equal(s_c, s_f)
