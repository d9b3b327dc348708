"""Tests for length-weighted map metrics and the latency benchmark."""

import json
import math

import numpy as np
import pytest

from bevmap.config import PipelineConfig, RasterConfig
from bevmap.errors import ConfigError, UndefinedMetricError
from bevmap.evalbench import (
    BenchResult,
    MatchCriteria,
    bench_pipeline,
    compute_metrics,
    evaluate,
    match_to_gt,
)
from bevmap.geom import Point2, Pose2, Segment2, segment_to_polar
from bevmap.simworld import (
    Column,
    FloorplanWorld,
    GroundTruth,
    SensorModel,
    Wall,
    simulate_frame,
)


def _seg(x1, y1, x2, y2):
    return Segment2(Point2(x1, y1), Point2(x2, y2))


def _gt(*segs):
    return GroundTruth(wall_centerlines=list(segs), column_discs=[])


def _rot_about(seg, angle, offset_y=0.0):
    """Rotate a segment about its midpoint, then shift it."""
    mid = seg.midpoint
    out = []
    for p in (seg.p1, seg.p2):
        dx, dy = p.x - mid.x, p.y - mid.y
        ca, sa = math.cos(angle), math.sin(angle)
        out.append(Point2(mid.x + dx * ca - dy * sa,
                          mid.y + dx * sa + dy * ca + offset_y))
    return Segment2(*out)


class TestMatching:
    def test_identical_detection_covers_gt(self):
        gt = _gt(_seg(0, 0, 5, 0))
        corr = match_to_gt([_seg(0, 0, 5, 0)], gt)
        assert corr.gt_matched_lengths == [pytest.approx(5.0, abs=1e-12)]
        assert corr.matches[0].gt_index == 0
        assert corr.matches[0].overlap_len == pytest.approx(5.0, abs=1e-12)

    def test_offset_beyond_gate_unmatched(self):
        gt = _gt(_seg(0, 0, 5, 0))
        corr = match_to_gt([_seg(0, 0.4, 5, 0.4)], gt,
                           MatchCriteria(max_perp_dist=0.3))
        assert corr.matches[0].gt_index is None
        assert corr.gt_matched_lengths == [0.0]

    def test_angle_beyond_gate_unmatched(self):
        gt = _gt(_seg(0, 0, 5, 0))
        det = _rot_about(_seg(0, 0, 5, 0), math.radians(6.0))
        corr = match_to_gt([det], gt, MatchCriteria(max_angle=math.radians(5.0)))
        assert corr.matches[0].gt_index is None

    def test_fragment_union_counts_overlap_once(self):
        gt = _gt(_seg(0, 0, 5, 0))
        dets = [_seg(0, 0, 1, 0), _seg(0.5, 0, 2, 0), _seg(3, 0, 4, 0)]
        corr = match_to_gt(dets, gt)
        assert corr.gt_matched_lengths[0] == pytest.approx(3.0, abs=1e-12)
        # every fragment individually gets its own credit
        assert [m.overlap_len for m in corr.matches] == [
            pytest.approx(1.0), pytest.approx(1.5), pytest.approx(1.0)]

    def test_detection_clipped_to_gt_extent(self):
        gt = _gt(_seg(0, 0, 5, 0))
        corr = match_to_gt([_seg(-1, 0, 6, 0)], gt)
        assert corr.matches[0].overlap_len == pytest.approx(5.0, abs=1e-12)
        assert corr.gt_matched_lengths[0] == pytest.approx(5.0, abs=1e-12)

    def test_nearest_gt_wins(self):
        gt = _gt(_seg(0, 0.0, 5, 0.0), _seg(0, 0.25, 5, 0.25))
        corr = match_to_gt([_seg(0, 0.1, 5, 0.1)], gt)
        assert corr.matches[0].gt_index == 0
        assert corr.gt_matched_lengths[1] == 0.0

    def test_accepts_plain_segment_list_as_gt(self):
        corr = match_to_gt([_seg(0, 0, 2, 0)], [_seg(0, 0, 2, 0)])
        assert corr.gt_matched_lengths == [pytest.approx(2.0)]

    def test_criteria_validation(self):
        with pytest.raises(ConfigError):
            MatchCriteria(max_perp_dist=0.0)
        with pytest.raises(ConfigError):
            MatchCriteria(max_angle=-1.0)


class TestMetrics:
    def test_perfect_detection_scores_one(self):
        gt = _gt(_seg(0, 0, 5, 0), _seg(0, 0, 0, 4))
        rep = evaluate([_seg(0, 0, 5, 0), _seg(0, 0, 0, 4)], gt)
        assert rep.recall == pytest.approx(1.0, abs=1e-12)
        assert rep.precision == pytest.approx(1.0, abs=1e-12)
        assert rep.f1 == pytest.approx(1.0, abs=1e-12)
        assert rep.dist_err_cm == pytest.approx(0.0, abs=1e-9)
        assert rep.angle_err_deg == pytest.approx(0.0, abs=1e-9)
        assert all(w["coverage"] == pytest.approx(1.0) for w in rep.per_wall)

    def test_spurious_detection_costs_precision(self):
        gt = _gt(_seg(0, 0, 5, 0), _seg(0, 2, 5, 2))
        dets = [_seg(0, 0, 5, 0), _seg(0, 2, 5, 2), _seg(20, 20, 20, 22)]
        rep = evaluate(dets, gt)
        assert rep.recall == pytest.approx(1.0, abs=1e-12)
        assert rep.precision == pytest.approx(10.0 / 12.0, abs=1e-12)

    def test_geometric_errors_are_weighted_means(self):
        gt = _gt(_seg(0, 0, 4, 0))
        det = _rot_about(_seg(0, 0, 4, 0), math.radians(2.0), offset_y=0.05)
        rep = evaluate([det], gt)
        assert rep.dist_err_cm == pytest.approx(5.0, abs=0.1)
        assert rep.angle_err_deg == pytest.approx(2.0, abs=0.05)

    def test_zero_gt_raises(self):
        with pytest.raises(UndefinedMetricError):
            evaluate([_seg(0, 0, 1, 0)], _gt())

    def test_no_detections_scores_zero(self):
        rep = evaluate([], _gt(_seg(0, 0, 5, 0)))
        assert rep.recall == 0.0 and rep.precision == 0.0 and rep.f1 == 0.0

    def test_f1_formula_holds(self):
        gt = _gt(_seg(0, 0, 5, 0))
        rep = evaluate([_seg(0, 0, 2, 0), _seg(10, 10, 12, 10)], gt)
        p, r = rep.precision, rep.recall
        assert rep.f1 == pytest.approx(2 * p * r / (p + r), abs=1e-12)

    def test_adding_correct_detection_never_lowers_recall(self):
        rng = np.random.default_rng(4)
        gt = _gt(_seg(0, 0, 6, 0), _seg(0, 0, 0, 5))
        dets = []
        prev = 0.0
        for _ in range(12):
            a = rng.uniform(0.0, 5.0)
            b = a + rng.uniform(0.3, 1.0)
            if rng.random() < 0.5:
                dets.append(_seg(a, rng.normal(0.0, 0.02), b, rng.normal(0.0, 0.02)))
            else:
                dets.append(_seg(rng.normal(0.0, 0.02), a, rng.normal(0.0, 0.02), b))
            rep = evaluate(dets, gt)
            assert rep.recall >= prev - 1e-12
            prev = rep.recall

    def test_adding_spurious_detection_never_raises_precision(self):
        rng = np.random.default_rng(5)
        gt = _gt(_seg(0, 0, 6, 0))
        dets = [_seg(0, 0, 6, 0)]
        prev = 1.0
        for _ in range(8):
            x = rng.uniform(10.0, 30.0)
            dets.append(_seg(x, 10.0, x + rng.uniform(0.5, 2.0), 10.0))
            rep = evaluate(dets, gt)
            assert rep.precision <= prev + 1e-12
            prev = rep.precision

    def test_matched_length_never_exceeds_gt_length(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            gt_seg = _seg(0, 0, rng.uniform(2.0, 8.0), 0)
            dets = []
            for _ in range(rng.integers(1, 8)):
                a = rng.uniform(-1.0, 7.0)
                b = a + rng.uniform(0.2, 4.0)
                dets.append(_seg(a, rng.normal(0, 0.05), b, rng.normal(0, 0.05)))
            corr = match_to_gt(dets, _gt(gt_seg))
            assert corr.gt_matched_lengths[0] <= corr.gt_lengths[0] + 1e-9


class TestDiscretizedOracle:
    """Production interval arithmetic vs. brute-force 1 cm sampling."""

    @staticmethod
    def _oracle(dets, gt_segs, corr):
        step = 0.01
        covered_total = 0.0
        gt_total = 0.0
        gt_polar = [segment_to_polar(s) for s in gt_segs]
        assign = {}
        for m in corr.matches:
            if m.gt_index is not None:
                assign.setdefault(m.gt_index, []).append(m.det_index)
        for gi, gp in enumerate(gt_polar):
            gt_total += gp.length
            n = int(gp.length / step)
            tx, ty = gp.tangent()
            for k in range(n):
                d = gp.d1 + (k + 0.5) * step
                hit = False
                for di in assign.get(gi, ()):
                    s = dets[di]
                    ca = s.p1.x * tx + s.p1.y * ty
                    cb = s.p2.x * tx + s.p2.y * ty
                    lo, hi = min(ca, cb), max(ca, cb)
                    if lo <= d <= hi:
                        hit = True
                        break
                if hit:
                    covered_total += step
        recall = covered_total / gt_total
        det_total = sum(segment_to_polar(s).length for s in dets)
        credited = 0.0
        for m in corr.matches:
            if m.gt_index is None:
                continue
            gp = gt_polar[m.gt_index]
            tx, ty = gp.tangent()
            s = dets[m.det_index]
            slen = segment_to_polar(s).length
            n = int(slen / step)
            for k in range(n):
                f = (k + 0.5) / n
                px = s.p1.x + f * (s.p2.x - s.p1.x)
                py = s.p1.y + f * (s.p2.y - s.p1.y)
                d = px * tx + py * ty
                if gp.d1 <= d <= gp.d2:
                    credited += slen / n
        precision = credited / det_total if det_total else 0.0
        return recall, precision

    def test_fuzzed_scenes_match_sampled_oracle(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            gt_segs = [_seg(0, 0, rng.uniform(3, 7), 0),
                       _seg(0, 1e-9, 0, rng.uniform(3, 7))]
            dets = []
            for _ in range(int(rng.integers(2, 9))):
                horizontal = rng.random() < 0.5
                a = rng.uniform(-0.5, 5.0)
                b = a + rng.uniform(0.4, 3.0)
                off = rng.normal(0.0, 0.08)
                if horizontal:
                    dets.append(_seg(a, off, b, off))
                else:
                    dets.append(_seg(off, a, off, b))
            if rng.random() < 0.5:
                x = rng.uniform(15, 20)
                dets.append(_seg(x, 0, x + 1.0, 0))
            corr = match_to_gt(dets, _gt(*gt_segs))
            rep = compute_metrics(corr)
            o_recall, o_precision = self._oracle(dets, gt_segs, corr)
            assert rep.recall == pytest.approx(o_recall, abs=0.01)
            assert rep.precision == pytest.approx(o_precision, abs=0.01)


class TestBench:
    @staticmethod
    def _sequence(n):
        world = FloorplanWorld(
            walls=[Wall(_seg(-4, -3, 4, -3)), Wall(_seg(4, -3, 4, 3)),
                   Wall(_seg(4, 3, -4, 3)), Wall(_seg(-4, 3, -4, -3))],
            columns=[Column(Point2(2.0, 1.0), 0.2)])
        sensor = SensorModel(channels=4, elevations=(0.0, 0.05, 0.1, 0.15),
                             azimuth_steps=360, max_range=20.0)
        pose = Pose2()
        return [(simulate_frame(world, sensor, pose, frame_index=i), pose)
                for i in range(n)]

    @staticmethod
    def _cfg():
        return PipelineConfig(detector="ransac",
                              raster=RasterConfig(scale=0.05, size=512,
                                                  z_min=0.0, z_max=1.0))

    def test_single_frame_single_sample(self):
        res = bench_pipeline(self._sequence(1), self._cfg(), repetitions=1,
                             sequential=True)
        assert len(res.samples) == 1
        s = res.samples[0]
        assert s.end_to_end_ms >= max(s.detector_ms, s.local_fusion_ms,
                                      s.global_fusion_ms) - 0.05

    def test_repetitions_multiply_samples(self):
        res = bench_pipeline(self._sequence(2), self._cfg(), repetitions=3,
                             sequential=True)
        assert len(res.samples) == 6
        assert res.frames == 2 and res.repetitions == 3

    def test_stats_shape_and_order(self):
        res = bench_pipeline(self._sequence(4), self._cfg(), sequential=True)
        for name in ("detector_ms", "local_fusion_ms", "global_fusion_ms",
                     "transfer_ms", "end_to_end_ms"):
            st = res.stats[name]
            assert set(st) == {"mean", "p50", "p95"}
            assert 0.0 <= st["p50"] <= st["p95"]

    def test_result_serializes_to_json(self):
        res = bench_pipeline(self._sequence(2), self._cfg(), sequential=True)
        doc = json.loads(json.dumps(res.to_dict()))
        assert doc["frames"] == 2
        assert len(doc["samples"]) == 2

    def test_empty_sequence_rejected(self):
        with pytest.raises(UndefinedMetricError):
            bench_pipeline([], self._cfg())

    def test_bad_repetitions_rejected(self):
        with pytest.raises(ConfigError):
            bench_pipeline(self._sequence(1), self._cfg(), repetitions=0)

    def test_repeat_runs_have_similar_medians(self):
        seq = self._sequence(5)
        a = bench_pipeline(list(seq), self._cfg(), sequential=True)
        b = bench_pipeline(list(seq), self._cfg(), sequential=True)
        ratio = (a.stats["end_to_end_ms"]["p50"]
                 / max(b.stats["end_to_end_ms"]["p50"], 1e-9))
        # generous smoke bound: shared-CI boxes jitter, but not 5x
        assert 0.2 < ratio < 5.0
