"""Deterministic SVG renderings of maps, evaluations, and benchmarks.

Everything here is plain string composition with fixed-precision
coordinates, so identical inputs produce byte-identical files that can
be diffed in CI. No bitmap dependencies.
"""

from __future__ import annotations

import math
from dataclasses import asdict, is_dataclass

from bevmap.geom import Segment2, polar_to_segment, segment_to_polar

GT_COLOR = "#2e8b57"          # ground truth: green
MATCHED_DET_COLOR = "#ff69b4"  # matched detections: pink
UNMATCHED_DET_COLOR = "#1e63c8"  # unmatched detections: blue
MATCHED_GT_COLOR = "#ff8c00"   # covered ground-truth stretches: orange
WALL_COLOR = "#222222"
CORNER_COLOR = "#c0392b"
COLUMN_COLOR = "#555555"
BUDGET_COLOR = "#d62728"

STAGE_COLORS = {
    "detector_ms": "#4c72b0",
    "local_fusion_ms": "#dd8452",
    "global_fusion_ms": "#55a868",
    "transfer_ms": "#c44e52",
}


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Canvas:
    """Metric-space drawing surface with a fitted world-to-view transform."""

    def __init__(self, bounds, size=640, margin=30.0):
        x0, y0, x1, y1 = bounds
        span = max(x1 - x0, y1 - y0, 1e-6)
        self.scale = (size - 2.0 * margin) / span
        self.x0, self.y1 = x0, y1
        self.margin = margin
        self.width = size
        self.height = size
        self.body: list[str] = []

    def pt(self, x: float, y: float) -> tuple[float, float]:
        # world y-up -> svg y-down
        return (self.margin + (x - self.x0) * self.scale,
                self.margin + (self.y1 - y) * self.scale)

    def line(self, a, b, color, width=2.0, dash=None, opacity=1.0):
        x1, y1 = self.pt(*a)
        x2, y2 = self.pt(*b)
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        if opacity != 1.0:
            extra += f' stroke-opacity="{_fmt(opacity)}"'
        self.body.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" '
            f'y2="{_fmt(y2)}" stroke="{color}" stroke-width="{_fmt(width)}"'
            f'{extra} />')

    def circle(self, c, r_world, color, fill="none", width=1.5):
        x, y = self.pt(*c)
        self.body.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" '
            f'r="{_fmt(max(r_world * self.scale, 1.5))}" stroke="{color}" '
            f'fill="{fill}" stroke-width="{_fmt(width)}" />')

    def dot(self, c, color, r_px=3.0):
        x, y = self.pt(*c)
        self.body.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(r_px)}" '
            f'fill="{color}" stroke="none" />')

    def text(self, x_px, y_px, s, size=12, color="#333333", anchor="start"):
        self.body.append(
            f'<text x="{_fmt(x_px)}" y="{_fmt(y_px)}" font-size="{size}" '
            f'fill="{color}" text-anchor="{anchor}" '
            f'font-family="sans-serif">{s}</text>')

    def to_svg(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" '
                f'width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">')
        bg = (f'<rect x="0" y="0" width="{self.width}" '
              f'height="{self.height}" fill="#ffffff" />')
        return "\n".join([head, bg, *self.body, "</svg>"])


def _plan_dict(plan) -> dict:
    if isinstance(plan, dict):
        return plan
    if hasattr(plan, "to_dict"):
        return plan.to_dict()
    if is_dataclass(plan):
        return asdict(plan)
    raise TypeError(f"cannot render {type(plan).__name__} as a floorplan")


def _segments_bounds(segments, extra_pts=()):
    xs, ys = [], []
    for s in segments:
        xs += [s.p1.x, s.p2.x]
        ys += [s.p1.y, s.p2.y]
    for x, y in extra_pts:
        xs.append(x)
        ys.append(y)
    if not xs:
        return (-1.0, -1.0, 1.0, 1.0)
    return (min(xs), min(ys), max(xs), max(ys))


def render_floorplan_svg(plan, size: int = 640) -> str:
    """Walls, corner vertices, closed loops and columns of a floorplan."""
    doc = _plan_dict(plan)
    segs = [polar_to_segment(_polar_of(w)) for w in doc["walls"]]
    corner_pts = [(c["x"], c["y"]) for c in doc["corners"]]
    col_pts = [(c["x"], c["y"]) for c in doc["columns"]]
    cv = _Canvas(_segments_bounds(segs, corner_pts + col_pts), size=size)
    for loop in doc["loops"]:
        pts = [cv.pt(*corner_pts[i]) for i in loop]
        path = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        cv.body.append(f'<polygon points="{path}" fill="#a8d5ba" '
                       f'fill-opacity="0.25" stroke="none" />')
    for s in segs:
        cv.line((s.p1.x, s.p1.y), (s.p2.x, s.p2.y), WALL_COLOR, width=3.0)
    for c in corner_pts:
        cv.dot(c, CORNER_COLOR, r_px=4.0)
    for col in doc["columns"]:
        cv.circle((col["x"], col["y"]), col["r"], COLUMN_COLOR,
                  fill="#bbbbbb")
    cv.text(10, 18, f'{len(segs)} walls, {len(corner_pts)} corners, '
                    f'{len(doc["loops"])} loops')
    return cv.to_svg()


def _polar_of(w: dict):
    from bevmap.geom import PolarSegment
    return PolarSegment(rho=w["rho"], alpha=w["alpha"],
                        d1=w["d1"], d2=w["d2"])


def render_eval_svg(detected: list[Segment2], gt, corr, size: int = 640) -> str:
    """Fig.-style overlay: GT green, matched pink, unmatched blue,
    covered GT stretches orange."""
    gt_segs = list(getattr(gt, "wall_centerlines", gt))
    cv = _Canvas(_segments_bounds(list(detected) + gt_segs), size=size)
    for s in gt_segs:
        cv.line((s.p1.x, s.p1.y), (s.p2.x, s.p2.y), GT_COLOR, width=4.0,
                opacity=0.9)
    for gi, intervals in enumerate(corr.gt_intervals):
        gp = segment_to_polar(gt_segs[gi])
        foot = gp.foot()
        fx, fy = foot.x, foot.y
        tx, ty = gp.tangent()
        for lo, hi in intervals:
            a = (fx + lo * tx, fy + lo * ty)
            b = (fx + hi * tx, fy + hi * ty)
            cv.line(a, b, MATCHED_GT_COLOR, width=6.0, opacity=0.55)
    for m in corr.matches:
        s = detected[m.det_index]
        color = MATCHED_DET_COLOR if m.gt_index is not None else UNMATCHED_DET_COLOR
        cv.line((s.p1.x, s.p1.y), (s.p2.x, s.p2.y), color, width=2.0)
    legend = [("GT", GT_COLOR), ("matched", MATCHED_DET_COLOR),
              ("unmatched", UNMATCHED_DET_COLOR), ("covered GT", MATCHED_GT_COLOR)]
    for i, (label, color) in enumerate(legend):
        y = 18 + 16 * i
        cv.body.append(f'<rect x="10" y="{y - 9}" width="12" height="9" '
                       f'fill="{color}" />')
        cv.text(27, y, label)
    return cv.to_svg()


def render_world_svg(world, size: int = 640) -> str:
    """Preview of a simulated world: walls, columns, clutter, glass."""
    segs = [w.centerline for w in world.walls]
    extra = [(c.center.x, c.center.y) for c in world.columns]
    cv = _Canvas(_segments_bounds(segs, extra), size=size)
    for i, w in enumerate(world.walls):
        color = "#6baed6" if i in world.glass else WALL_COLOR
        s = w.centerline
        cv.line((s.p1.x, s.p1.y), (s.p2.x, s.p2.y), color,
                width=max(2.0, w.thickness * cv.scale))
    for c in world.columns:
        cv.circle((c.center.x, c.center.y), c.radius, COLUMN_COLOR,
                  fill="#bbbbbb")
    for cl in world.clutter:
        ca, sa = math.cos(cl.angle), math.sin(cl.angle)
        pts = []
        for su, sv in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
            ux, vy = su * cl.half_u, sv * cl.half_v
            pts.append(cv.pt(cl.center.x + ux * ca - vy * sa,
                             cl.center.y + ux * sa + vy * ca))
        path = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        cv.body.append(f'<polygon points="{path}" fill="#e8c27a" '
                       f'fill-opacity="0.6" stroke="#aa8833" />')
    cv.text(10, 18, f'{len(world.walls)} walls, {len(world.columns)} columns, '
                    f'{len(world.clutter)} clutter')
    return cv.to_svg()


_BAR_STAGES = ("detector_ms", "local_fusion_ms", "global_fusion_ms",
               "transfer_ms")


def render_latency_svg(stats_by_label: dict[str, dict],
                       budget_ms: float = 100.0,
                       width: int = 640, height: int = 420) -> str:
    """Stacked per-stage mean latency bars with a dashed budget line."""
    margin, top = 60.0, 40.0
    plot_h = height - top - 70.0
    labels = list(stats_by_label)
    totals = [sum(stats_by_label[k][f]["mean"] for f in _BAR_STAGES)
              for k in labels]
    y_max = max([budget_ms] + totals) * 1.15
    body = [f'<rect x="0" y="0" width="{width}" height="{height}" '
            f'fill="#ffffff" />']

    def y_of(ms):
        return top + plot_h * (1.0 - ms / y_max)

    # axis + gridlines
    body.append(f'<line x1="{_fmt(margin)}" y1="{_fmt(top)}" '
                f'x2="{_fmt(margin)}" y2="{_fmt(top + plot_h)}" '
                f'stroke="#999999" stroke-width="1" />')
    step = max(1.0, round(y_max / 5.0))
    tick = 0.0
    while tick <= y_max:
        y = y_of(tick)
        body.append(f'<line x1="{_fmt(margin - 4)}" y1="{_fmt(y)}" '
                    f'x2="{_fmt(width - 20)}" y2="{_fmt(y)}" '
                    f'stroke="#dddddd" stroke-width="1" />')
        body.append(f'<text x="{_fmt(margin - 8)}" y="{_fmt(y + 4)}" '
                    f'font-size="11" fill="#333333" text-anchor="end" '
                    f'font-family="sans-serif">{tick:.0f}</text>')
        tick += step
    # bars
    slot = (width - margin - 30.0) / max(len(labels), 1)
    bar_w = slot * 0.55
    for i, label in enumerate(labels):
        x = margin + slot * (i + 0.5) - bar_w / 2.0
        base = 0.0
        for stage in _BAR_STAGES:
            ms = stats_by_label[label][stage]["mean"]
            y1 = y_of(base + ms)
            h = y_of(base) - y1
            body.append(f'<rect x="{_fmt(x)}" y="{_fmt(y1)}" '
                        f'width="{_fmt(bar_w)}" height="{_fmt(max(h, 0.0))}" '
                        f'fill="{STAGE_COLORS[stage]}" />')
            base += ms
        body.append(f'<text x="{_fmt(x + bar_w / 2.0)}" '
                    f'y="{_fmt(top + plot_h + 16)}" font-size="12" '
                    f'fill="#333333" text-anchor="middle" '
                    f'font-family="sans-serif">{label}</text>')
    # budget line
    yb = y_of(budget_ms)
    body.append(f'<line x1="{_fmt(margin)}" y1="{_fmt(yb)}" '
                f'x2="{_fmt(width - 20)}" y2="{_fmt(yb)}" '
                f'stroke="{BUDGET_COLOR}" stroke-width="2" '
                f'stroke-dasharray="8,5" />')
    body.append(f'<text x="{_fmt(width - 24)}" y="{_fmt(yb - 6)}" '
                f'font-size="11" fill="{BUDGET_COLOR}" text-anchor="end" '
                f'font-family="sans-serif">{budget_ms:.0f} ms budget</text>')
    # legend
    lx = margin
    ly = height - 28.0
    for stage in _BAR_STAGES:
        body.append(f'<rect x="{_fmt(lx)}" y="{_fmt(ly - 9)}" width="12" '
                    f'height="9" fill="{STAGE_COLORS[stage]}" />')
        name = stage[:-3].replace("_", " ")
        body.append(f'<text x="{_fmt(lx + 16)}" y="{_fmt(ly)}" font-size="11" '
                    f'fill="#333333" font-family="sans-serif">{name}</text>')
        lx += 140.0
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">')
    return "\n".join([head, *body, "</svg>"])


def render_metrics_svg(reports_by_label: dict[str, dict],
                       width: int = 640, height: int = 360) -> str:
    """Grouped recall/precision/F1 bars per labeled report."""
    metrics = ("recall", "precision", "f1")
    colors = {"recall": "#4c72b0", "precision": "#dd8452", "f1": "#55a868"}
    margin, top = 50.0, 30.0
    plot_h = height - top - 60.0
    labels = list(reports_by_label)
    body = [f'<rect x="0" y="0" width="{width}" height="{height}" '
            f'fill="#ffffff" />']
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = top + plot_h * (1.0 - frac)
        body.append(f'<line x1="{_fmt(margin)}" y1="{_fmt(y)}" '
                    f'x2="{_fmt(width - 20)}" y2="{_fmt(y)}" '
                    f'stroke="#dddddd" stroke-width="1" />')
        body.append(f'<text x="{_fmt(margin - 6)}" y="{_fmt(y + 4)}" '
                    f'font-size="11" fill="#333333" text-anchor="end" '
                    f'font-family="sans-serif">{frac:.2f}</text>')
    slot = (width - margin - 30.0) / max(len(labels), 1)
    bar_w = slot / 5.0
    for i, label in enumerate(labels):
        rep = reports_by_label[label]
        rep = rep if isinstance(rep, dict) else rep.to_dict()
        for j, metric in enumerate(metrics):
            v = max(0.0, min(1.0, rep[metric]))
            x = margin + slot * i + bar_w * (j + 1)
            h = plot_h * v
            body.append(f'<rect x="{_fmt(x)}" y="{_fmt(top + plot_h - h)}" '
                        f'width="{_fmt(bar_w * 0.85)}" height="{_fmt(h)}" '
                        f'fill="{colors[metric]}" />')
        body.append(f'<text x="{_fmt(margin + slot * (i + 0.5))}" '
                    f'y="{_fmt(top + plot_h + 16)}" font-size="12" '
                    f'fill="#333333" text-anchor="middle" '
                    f'font-family="sans-serif">{label}</text>')
    lx = margin
    ly = height - 20.0
    for metric in metrics:
        body.append(f'<rect x="{_fmt(lx)}" y="{_fmt(ly - 9)}" width="12" '
                    f'height="9" fill="{colors[metric]}" />')
        body.append(f'<text x="{_fmt(lx + 16)}" y="{_fmt(ly)}" font-size="11" '
                    f'fill="#333333" font-family="sans-serif">{metric}</text>')
        lx += 110.0
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">')
    return "\n".join([head, *body, "</svg>"])
