"""Per-frame spatial fusion: raw detector segments -> consolidated wall set.

Runs entirely within one frame. Edge detectors (Hough, LSD) first get their
double-edge wall envelopes merged into centerlines; all segments are then
converted to Hessian normal form, length-filtered, clustered under a custom
max-of-three-normalized-components metric, and each cluster collapses into a
single representative wall. Columns pass through untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.cluster import DBSCAN

from bevmap.detect.base import RawDetection
from bevmap.errors import ConfigError, DegenerateInputError
from bevmap.geom import (
    Point2,
    PolarSegment,
    Segment2,
    axial_angle_diff,
    flip_polar,
    point_to_line_distance,
    polar_to_segment,
    segment_to_polar,
    wrap_pi,
    wrap_two_pi,
)

# Detectors that trace both faces of a wall and need envelope merging first.
_ENVELOPE_SOURCES = ("hough", "lsd")


@dataclass(frozen=True)
class FusionThresholds:
    """Normalization constants for the pairwise segment metric.

    tau_len gates minimum segment length, tau_d / tau_theta / tau_o
    normalize the distance, angle and overlap-gap components, and
    envelope_max_gap bounds the face-to-face separation that still
    counts as one wall during envelope merging. length_weighted_rho
    switches the cluster rho average to length weighting.
    """

    tau_len: float = 0.5
    tau_d: float = 0.3
    tau_theta: float = math.radians(5.0)
    tau_o: float = 0.5
    envelope_max_gap: float = 0.4
    length_weighted_rho: bool = False

    def __post_init__(self):
        for name in ("tau_len", "tau_d", "tau_theta", "tau_o", "envelope_max_gap"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive")


@dataclass
class LocalWallSet:
    """Fused per-frame features, the wire unit between pipeline stages."""

    walls: list[PolarSegment]
    columns: list[tuple[Point2, float]]
    frame_ts: float
    source: str

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "frame_ts": self.frame_ts,
            "walls": [{"rho": w.rho, "alpha": w.alpha, "d1": w.d1, "d2": w.d2}
                      for w in self.walls],
            "columns": [{"x": c.x, "y": c.y, "r": r} for c, r in self.columns],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LocalWallSet":
        return cls(
            walls=[PolarSegment(w["rho"], w["alpha"], w["d1"], w["d2"])
                   for w in d["walls"]],
            columns=[(Point2(c["x"], c["y"]), c["r"]) for c in d["columns"]],
            frame_ts=d["frame_ts"],
            source=d["source"],
        )


def _axial_bisector(alpha_a: float, alpha_b: float) -> float:
    """Mean of two line directions identified mod pi, anchored at alpha_a."""
    d = math.fmod(alpha_b - alpha_a, math.pi)
    if d > math.pi / 2.0:
        d -= math.pi
    elif d <= -math.pi / 2.0:
        d += math.pi
    return alpha_a + 0.5 * d


def _interval_on(p: PolarSegment, tx: float, ty: float) -> tuple[float, float]:
    s = polar_to_segment(p)
    t1 = s.p1.x * tx + s.p1.y * ty
    t2 = s.p2.x * tx + s.p2.y * ty
    return (t1, t2) if t1 <= t2 else (t2, t1)


def _projected_gap(a: PolarSegment, b: PolarSegment) -> float:
    """Signed gap between the two extents projected on their bisector.

    Positive values are the clearance between disjoint intervals, negative
    values the mutual overlap length. The pair is ordered canonically first
    so the bisector (and hence the result) is identical under argument
    swap, including exactly perpendicular inputs.
    """
    if (b.alpha, b.rho, b.d1, b.d2) < (a.alpha, a.rho, a.d1, a.d2):
        a, b = b, a
    mean = _axial_bisector(a.alpha, b.alpha)
    tx, ty = -math.sin(mean), math.cos(mean)
    lo_a, hi_a = _interval_on(a, tx, ty)
    lo_b, hi_b = _interval_on(b, tx, ty)
    return max(lo_a, lo_b) - min(hi_a, hi_b)


def pair_distance(a: PolarSegment, b: PolarSegment,
                  t: FusionThresholds) -> float:
    """Normalized segment-to-segment distance, the clustering metric.

    The maximum of three ratios: endpoint-to-line distance over tau_d,
    axial angle difference over tau_theta, and projected extent gap over
    tau_o. Each component hits 1.0 exactly at its threshold, so eps = 1
    in the clustering step means "all three within tolerance".
    """
    sa = polar_to_segment(a)
    sb = polar_to_segment(b)
    dd = min(
        point_to_line_distance(sa.p1, b),
        point_to_line_distance(sa.p2, b),
        point_to_line_distance(sb.p1, a),
        point_to_line_distance(sb.p2, a),
    )
    dth = axial_angle_diff(a.alpha, b.alpha)
    do = max(0.0, _projected_gap(a, b))
    return max(dd / t.tau_d, dth / t.tau_theta, do / t.tau_o)


def merge_envelopes(segments: list[Segment2],
                    t: FusionThresholds) -> list[Segment2]:
    """Collapse double-edge wall envelopes into single centerlines.

    Edge detectors see both faces of a wall as two nearly parallel
    segments. Pairs that are parallel within tau_theta, closer than
    envelope_max_gap, and actually overlap along their direction are
    replaced by their midline; everything else passes through. Pairing
    is greedy by smallest face separation and consumes each segment at
    most once.
    """
    n = len(segments)
    if n < 2:
        return list(segments)
    polars = [segment_to_polar(s) for s in segments]
    candidates = []
    for i in range(n):
        for j in range(i + 1, n):
            a, b = polars[i], polars[j]
            if axial_angle_diff(a.alpha, b.alpha) > t.tau_theta:
                continue
            sa, sb = segments[i], segments[j]
            sep = (point_to_line_distance(sa.p1, b)
                   + point_to_line_distance(sa.p2, b)
                   + point_to_line_distance(sb.p1, a)
                   + point_to_line_distance(sb.p2, a)) / 4.0
            if sep > t.envelope_max_gap:
                continue
            if _projected_gap(a, b) >= 0.0:
                continue
            candidates.append((sep, i, j))
    candidates.sort()
    used = [False] * n
    out: list[Segment2 | None] = [None] * n
    for _sep, i, j in candidates:
        if used[i] or used[j]:
            continue
        used[i] = used[j] = True
        out[i] = polar_to_segment(fuse_cluster([polars[i], polars[j]]))
    for i in range(n):
        if not used[i]:
            out[i] = segments[i]
    return [s for s in out if s is not None]


def cluster_segments(walls: list[PolarSegment],
                     t: FusionThresholds) -> list[int]:
    """Group segments by the pairwise metric; returns one label per input.

    Density clustering over the precomputed matrix with eps = 1 and
    min_samples = 1: every segment is a core point, so clusters are
    exactly the connected components of the within-threshold graph and
    singletons survive as their own cluster. Labels are renumbered in
    order of first appearance, which keeps the result deterministic for
    a given input order.
    """
    n = len(walls)
    if n == 0:
        return []
    m = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            d = pair_distance(walls[i], walls[j], t)
            m[i, j] = m[j, i] = d
    raw = DBSCAN(eps=1.0, min_samples=1, metric="precomputed").fit_predict(m)
    remap: dict[int, int] = {}
    labels = []
    for lab in raw:
        if lab not in remap:
            remap[lab] = len(remap)
        labels.append(remap[lab])
    return labels


def fuse_cluster(members: list[PolarSegment],
                 length_weighted: bool = False) -> PolarSegment:
    """Collapse one cluster into a single representative wall.

    Members are first aligned to the seed's normal (antipodal ones flip,
    negating rho and mirroring the extent) so the circular mean cannot
    cancel. rho averages plainly (or length-weighted on request), alpha
    by circular mean, and the extent is the min/max of all member
    endpoints projected onto the fused line's tangent.
    """
    if not members:
        raise DegenerateInputError("cannot fuse an empty cluster")
    if len(members) == 1:
        return members[0]
    seed = members[0]
    rhos = []
    sins = []
    coss = []
    weights = []
    for m in members:
        rho, alpha = m.rho, m.alpha
        if abs(wrap_pi(m.alpha - seed.alpha)) > math.pi / 2.0:
            rho, alpha, _, _ = flip_polar(m)
        w = m.length if length_weighted else 1.0
        rhos.append(w * rho)
        sins.append(w * math.sin(alpha))
        coss.append(w * math.cos(alpha))
        weights.append(w)
    wsum = sum(weights)
    rho_bar = sum(rhos) / wsum
    alpha_bar = math.atan2(sum(sins) / wsum, sum(coss) / wsum)
    if rho_bar < 0.0:
        rho_bar = -rho_bar
        alpha_bar += math.pi
    alpha_bar = wrap_two_pi(alpha_bar)
    tx, ty = -math.sin(alpha_bar), math.cos(alpha_bar)
    d_lo = math.inf
    d_hi = -math.inf
    for m in members:
        s = polar_to_segment(m)
        for p in (s.p1, s.p2):
            d = p.x * tx + p.y * ty
            d_lo = min(d_lo, d)
            d_hi = max(d_hi, d)
    return PolarSegment(rho=rho_bar, alpha=alpha_bar, d1=d_lo, d2=d_hi)


def fuse_frame(det: RawDetection,
               t: FusionThresholds = FusionThresholds()) -> LocalWallSet:
    """Full per-frame fusion chain for one detector output."""
    segs = det.segments
    if det.detector_id in _ENVELOPE_SOURCES:
        segs = merge_envelopes(segs, t)
    polars = [p for p in map(segment_to_polar, segs) if p.length >= t.tau_len]
    labels = cluster_segments(polars, t)
    groups: dict[int, list[PolarSegment]] = {}
    for lab, p in zip(labels, polars):
        groups.setdefault(lab, []).append(p)
    walls = []
    for lab in sorted(groups):
        fused = fuse_cluster(groups[lab], t.length_weighted_rho)
        if fused.length >= t.tau_len:
            walls.append(fused)
    return LocalWallSet(walls=walls, columns=list(det.columns),
                        frame_ts=det.frame_ts, source=det.detector_id)
