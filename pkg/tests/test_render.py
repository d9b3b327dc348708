"""Tests for the deterministic SVG renderers."""

import math
import xml.etree.ElementTree as ET

from bevmap.evalbench import MatchCriteria, match_to_gt
from bevmap.geom import Point2, Segment2
from bevmap.manhattan import close_corners
from bevmap.render import (
    BUDGET_COLOR,
    GT_COLOR,
    MATCHED_DET_COLOR,
    MATCHED_GT_COLOR,
    UNMATCHED_DET_COLOR,
    render_eval_svg,
    render_floorplan_svg,
    render_latency_svg,
    render_metrics_svg,
    render_world_svg,
)
from bevmap.simworld import make_scenario

SVG_NS = "{http://www.w3.org/2000/svg}"


def _seg(x1, y1, x2, y2):
    return Segment2(Point2(x1, y1), Point2(x2, y2))


def _rect_plan():
    walls = [_seg(1.1, 1.0, 4.9, 1.0), _seg(5.0, 1.1, 5.0, 3.9),
             _seg(4.9, 4.0, 1.1, 4.0), _seg(1.0, 3.9, 1.0, 1.1)]
    from bevmap.geom import segment_to_polar
    return close_corners([segment_to_polar(s) for s in walls])


def _count(svg, tag):
    root = ET.fromstring(svg)
    return len(root.findall(f".//{SVG_NS}{tag}"))


class TestFloorplanSvg:
    def test_valid_xml_with_walls_and_corners(self):
        svg = render_floorplan_svg(_rect_plan())
        root = ET.fromstring(svg)
        assert root.tag == f"{SVG_NS}svg"
        lines = root.findall(f".//{SVG_NS}line")
        assert len(lines) == 4
        # 4 corner dots
        dots = [c for c in root.findall(f".//{SVG_NS}circle")
                if c.get("fill") not in (None, "none", "#bbbbbb")]
        assert len(dots) == 4
        assert _count(svg, "polygon") == 1  # the closed loop

    def test_accepts_plain_dict(self):
        plan = _rect_plan().to_dict()
        assert "<svg" in render_floorplan_svg(plan)

    def test_deterministic(self):
        assert render_floorplan_svg(_rect_plan()) == \
            render_floorplan_svg(_rect_plan())


class TestEvalSvg:
    def test_legend_colors_present_and_counts_match(self):
        gt = [_seg(0, 0, 5, 0), _seg(0, 2, 5, 2)]
        dets = [_seg(0, 0, 3, 0), _seg(10, 10, 12, 10)]
        corr = match_to_gt(dets, gt, MatchCriteria())
        svg = render_eval_svg(dets, gt, corr)
        for color in (GT_COLOR, MATCHED_DET_COLOR, UNMATCHED_DET_COLOR,
                      MATCHED_GT_COLOR):
            assert color in svg
        root = ET.fromstring(svg)
        lines = root.findall(f".//{SVG_NS}line")
        by_color = {}
        for ln in lines:
            by_color.setdefault(ln.get("stroke"), 0)
            by_color[ln.get("stroke")] += 1
        assert by_color[GT_COLOR] == 2
        assert by_color[MATCHED_DET_COLOR] == 1
        assert by_color[UNMATCHED_DET_COLOR] == 1
        assert by_color[MATCHED_GT_COLOR] == 1  # one covered stretch

    def test_deterministic(self):
        gt = [_seg(0, 0, 5, 0)]
        dets = [_seg(0, 0.05, 4, 0.05)]
        corr = match_to_gt(dets, gt)
        assert render_eval_svg(dets, gt, corr) == render_eval_svg(dets, gt, corr)


class TestWorldSvg:
    def test_scenario_preview_draws_everything(self):
        world, _gt = make_scenario("lab", seed=1)
        svg = render_world_svg(world)
        root = ET.fromstring(svg)
        assert len(root.findall(f".//{SVG_NS}line")) == len(world.walls)
        assert len(root.findall(f".//{SVG_NS}polygon")) == len(world.clutter)

    def test_glass_wall_tinted(self):
        world, _gt = make_scenario("corridor", seed=0)
        if not world.glass:
            return
        assert "#6baed6" in render_world_svg(world)


def _fake_stats(base):
    return {name: {"mean": base + i, "p50": base + i, "p95": base + i + 1.0}
            for i, name in enumerate(("detector_ms", "local_fusion_ms",
                                      "global_fusion_ms", "transfer_ms",
                                      "end_to_end_ms"))}


class TestLatencySvg:
    def test_stacked_bars_and_budget_line(self):
        svg = render_latency_svg({"hough": _fake_stats(5.0),
                                  "lsd": _fake_stats(9.0)})
        assert BUDGET_COLOR in svg
        assert "stroke-dasharray" in svg
        assert "100 ms budget" in svg
        root = ET.fromstring(svg)
        rects = root.findall(f".//{SVG_NS}rect")
        # background + 2 configs x 4 stages + 4 legend chips
        stage_colors = {"#4c72b0", "#dd8452", "#55a868", "#c44e52"}
        bars = [r for r in rects if r.get("fill") in stage_colors]
        assert len(bars) == 2 * 4 + 4

    def test_deterministic(self):
        stats = {"ransac": _fake_stats(3.0)}
        assert render_latency_svg(stats) == render_latency_svg(stats)

    def test_budget_line_scales_axis(self):
        svg = render_latency_svg({"x": _fake_stats(1.0)}, budget_ms=50.0)
        assert "50 ms budget" in svg


class TestMetricsSvg:
    def test_three_bars_per_label(self):
        reports = {
            "hough": {"recall": 0.9, "precision": 0.8, "f1": 0.85},
            "ransac": {"recall": 0.7, "precision": 0.95, "f1": 0.8},
        }
        svg = render_metrics_svg(reports)
        root = ET.fromstring(svg)
        colors = {"#4c72b0", "#dd8452", "#55a868"}
        bars = [r for r in root.findall(f".//{SVG_NS}rect")
                if r.get("fill") in colors and float(r.get("width")) > 5.0]
        assert len(bars) == 6 + 3  # 2 labels x 3 metrics + 3 legend chips

    def test_values_clamped_to_unit_range(self):
        svg = render_metrics_svg({"x": {"recall": 1.5, "precision": -0.2,
                                        "f1": 0.5}})
        root = ET.fromstring(svg)
        for r in root.findall(f".//{SVG_NS}rect"):
            h = float(r.get("height"))
            assert h >= 0.0
