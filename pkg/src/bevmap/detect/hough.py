"""Progressive probabilistic Hough detector over the BEV raster."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from bevmap import kernels
from bevmap.bev import BevImage, pixel_to_world
from bevmap.errors import ConfigError
from bevmap.geom import Point2, Segment2

from .base import RawDetection


@dataclass(frozen=True)
class HoughConfig:
    rho_res: float = 0.02
    theta_res: float = math.pi / 180.0
    votes_threshold: int = 40
    min_line_len: float = 0.6
    max_gap: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("rho_res", "theta_res", "votes_threshold",
                     "min_line_len", "max_gap"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")


def detect_hough(img: BevImage, cfg: HoughConfig = HoughConfig(),
                 frame_ts: float = 0.0) -> RawDetection:
    """Extract wall segments by randomized voting over occupied pixels.

    The kernel works in pixel units; parameters convert through the
    raster scale, and the returned pixel endpoints back-project through
    the pixel-center georeference.
    """
    t0 = time.perf_counter()
    mask = img.occupied.copy()
    n_theta = max(1, int(round(math.pi / cfg.theta_res)))
    px = kernels.hough_ppht(
        mask,
        cfg.rho_res / img.scale,
        n_theta,
        cfg.votes_threshold,
        cfg.min_line_len / img.scale,
        int(round(cfg.max_gap / img.scale)),
        cfg.seed,
    )
    segments = []
    for c1, r1, c2, r2 in px:
        if c1 == c2 and r1 == r2:
            continue
        x1, y1 = pixel_to_world(int(c1), int(r1), img.scale, img.width)
        x2, y2 = pixel_to_world(int(c2), int(r2), img.scale, img.width)
        segments.append(Segment2(Point2(float(x1), float(y1)),
                                 Point2(float(x2), float(y2))))
    return RawDetection(segments, [], "hough", frame_ts,
                        runtime_ms=(time.perf_counter() - t0) * 1e3)
