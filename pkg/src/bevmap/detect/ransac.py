"""DBSCAN-gated sequential RANSAC line extraction on 2D points.

Clustering first keeps RANSAC's sampling inside one structure at a time
and discards isolated noise; each cluster then yields segments by
repeatedly fitting the best line, refining it with a total-least-squares
refit over its inliers, and removing those inliers.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from sklearn.cluster import DBSCAN

from bevmap.errors import ConfigError
from bevmap.geom import Point2, Segment2

from .base import RawDetection


@dataclass(frozen=True)
class RansacConfig:
    dbscan_eps: float = 0.2
    dbscan_min_pts: int = 8
    ransac_min_inliers: int = 30
    residual_threshold: float = 0.06
    max_iterations: int = 200
    min_segment_len: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("dbscan_eps", "dbscan_min_pts", "ransac_min_inliers",
                     "residual_threshold", "max_iterations", "min_segment_len"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")


def _tls_line(pts: np.ndarray):
    """Total-least-squares line fit: centroid + principal direction."""
    centroid = pts.mean(axis=0)
    d = pts - centroid
    cov = d.T @ d
    w, v = np.linalg.eigh(cov)
    direction = v[:, np.argmax(w)]
    return centroid, direction


def _segment_from_inliers(pts: np.ndarray) -> Segment2:
    centroid, direction = _tls_line(pts)
    t = (pts - centroid) @ direction
    lo, hi = t.min(), t.max()
    p1 = centroid + lo * direction
    p2 = centroid + hi * direction
    return Segment2(Point2(p1[0], p1[1]), Point2(p2[0], p2[1]))


def _extract_lines(pts: np.ndarray, cfg: RansacConfig, rng: np.random.Generator):
    """Sequential RANSAC inside one cluster."""
    kept = []
    rejected = []
    work = pts
    while work.shape[0] >= cfg.ransac_min_inliers:
        n = work.shape[0]
        best_mask = None
        best_count = 0
        it = 0
        needed = cfg.max_iterations
        while it < needed:
            i = int(rng.integers(n))
            j = int(rng.integers(n))
            it += 1
            if i == j:
                continue
            p = work[i]
            q = work[j]
            dx, dy = q[0] - p[0], q[1] - p[1]
            norm = math.hypot(dx, dy)
            if norm < 1e-12:
                continue
            # Unit normal of the candidate line.
            nx, ny = -dy / norm, dx / norm
            res = np.abs((work[:, 0] - p[0]) * nx + (work[:, 1] - p[1]) * ny)
            mask = res <= cfg.residual_threshold
            count = int(mask.sum())
            if count > best_count:
                best_count = count
                best_mask = mask
                # Early exit once 99% success is implied by the inlier ratio.
                w = count / n
                if w >= 1.0:
                    break
                k = math.log(0.01) / math.log(1.0 - w * w)
                needed = min(cfg.max_iterations, max(1, int(math.ceil(k))))
        if best_count < cfg.ransac_min_inliers:
            break
        inliers = work[best_mask]
        seg = _segment_from_inliers(inliers)
        if seg.length >= cfg.min_segment_len:
            kept.append(seg)
        else:
            rejected.append(seg)
        work = work[~best_mask]
    return kept, rejected


def detect_ransac(points: np.ndarray, cfg: RansacConfig = RansacConfig(),
                  frame_ts: float = 0.0) -> RawDetection:
    """Extract wall segments from a flattened 2D point set."""
    t0 = time.perf_counter()
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    segments: list[Segment2] = []
    rejected: list[Segment2] = []
    if pts.shape[0] >= cfg.dbscan_min_pts:
        labels = DBSCAN(eps=cfg.dbscan_eps, min_samples=cfg.dbscan_min_pts).fit_predict(pts)
        rng = np.random.default_rng(cfg.seed)
        for lab in range(labels.max() + 1):
            cluster = pts[labels == lab]
            kept, rej = _extract_lines(cluster, cfg, rng)
            segments.extend(kept)
            rejected.extend(rej)
    return RawDetection(segments, [], "ransac", frame_ts, rejected=rejected,
                        runtime_ms=(time.perf_counter() - t0) * 1e3)
