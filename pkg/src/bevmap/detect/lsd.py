"""Simplified line-segment-detector route over the BEV raster.

Binary rasters have degenerate gradients, so the image is first blurred
with a 2 px Gaussian; 2x2 finite differences then give a level-line
field whose coherent regions are grown greedily and validated by
aligned-pixel density (standing in for the original NFA test).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from bevmap import kernels
from bevmap.bev import BevImage
from bevmap.errors import ConfigError
from bevmap.geom import Point2, Segment2

from .base import RawDetection

_BLUR_SIGMA = 2.0
_CROP_MARGIN = 8  # >= 4 blur sigmas so the crop does not clip the kernel


@dataclass(frozen=True)
class LsdConfig:
    angle_tolerance: float = math.pi / 8.0
    density_threshold: float = 0.6
    min_region_px: int = 12
    gradient_threshold: float = 0.02

    def __post_init__(self):
        if not 0.0 < self.density_threshold <= 1.0:
            raise ConfigError("density_threshold must be in (0, 1]")
        if self.angle_tolerance <= 0 or self.min_region_px <= 0:
            raise ConfigError("angle_tolerance and min_region_px must be positive")
        if self.gradient_threshold < 0:
            raise ConfigError("gradient_threshold must be >= 0")


def detect_lsd(img: BevImage, cfg: LsdConfig = LsdConfig(),
               frame_ts: float = 0.0) -> RawDetection:
    t0 = time.perf_counter()
    occ = img.occupied
    rows, cols = np.nonzero(occ)
    segments: list[Segment2] = []
    if rows.size:
        r0 = max(int(rows.min()) - _CROP_MARGIN, 0)
        r1 = min(int(rows.max()) + _CROP_MARGIN + 1, img.height)
        c0 = max(int(cols.min()) - _CROP_MARGIN, 0)
        c1 = min(int(cols.max()) + _CROP_MARGIN + 1, img.width)
        crop = occ[r0:r1, c0:c1].astype(np.float64)
        sm = gaussian_filter(crop, sigma=_BLUR_SIGMA)

        # 2x2 finite differences; the last row/column stays unusable.
        gx = np.zeros_like(sm)
        gy = np.zeros_like(sm)
        gx[:-1, :-1] = (sm[:-1, 1:] - sm[:-1, :-1] + sm[1:, 1:] - sm[1:, :-1]) / 2.0
        gy[:-1, :-1] = (sm[1:, :-1] - sm[:-1, :-1] + sm[1:, 1:] - sm[:-1, 1:]) / 2.0
        mag = np.sqrt(gx * gx + gy * gy)
        # Level-line angle: orthogonal to the gradient.
        angles = np.arctan2(gx, -gy)

        usable = (mag > cfg.gradient_threshold).astype(np.uint8)
        usable[-1, :] = 0
        usable[:, -1] = 0
        order = np.argsort(-mag, axis=None, kind="stable").astype(np.int64)

        rects = kernels.lsd_grow(
            np.ascontiguousarray(angles), np.ascontiguousarray(mag),
            np.ascontiguousarray(usable), order,
            cfg.angle_tolerance, cfg.density_threshold, cfg.min_region_px,
        )
        half = img.width / 2
        for x1, y1, x2, y2, _w, _dens, _n in rects:
            if math.hypot(x2 - x1, y2 - y1) < 1e-9:
                continue
            wx1 = (x1 + c0 + 0.5 - half) * img.scale
            wy1 = (half - 0.5 - (y1 + r0)) * img.scale
            wx2 = (x2 + c0 + 0.5 - half) * img.scale
            wy2 = (half - 0.5 - (y2 + r0)) * img.scale
            segments.append(Segment2(Point2(wx1, wy1), Point2(wx2, wy2)))
    return RawDetection(segments, [], "lsd", frame_ts,
                        runtime_ms=(time.perf_counter() - t0) * 1e3)
