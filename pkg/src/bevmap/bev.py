"""LiDAR frame flattening and BEV rasterization.

Turns a 3D scan into a metric 2D point set and a binary occupancy image in
three steps: spherical-to-Cartesian conversion, height-band ROI filtering,
and top-down rasterization. The sensor sits at the image center; the world
is y-up while image rows grow downward, so the y axis flips once here and
nowhere else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from bevmap.errors import ConfigError

TWO_PI = 2.0 * math.pi

DEFAULT_SCALE = 0.02
DEFAULT_SIZE = 4096


@dataclass(frozen=True)
class LidarFrame:
    """One rotation of a multi-channel spinning LiDAR.

    ranges has shape (channels, azimuth_steps), in meters; 0 encodes
    no-return. azimuths must be strictly increasing in [0, 2*pi);
    elevations strictly increasing.
    """

    ranges: np.ndarray
    azimuths: np.ndarray
    elevations: np.ndarray
    timestamp: float

    def __post_init__(self):
        r = np.asarray(self.ranges, dtype=np.float64)
        az = np.asarray(self.azimuths, dtype=np.float64)
        el = np.asarray(self.elevations, dtype=np.float64)
        if r.ndim != 2 or az.ndim != 1 or el.ndim != 1:
            raise ValueError("ranges must be 2D, azimuths and elevations 1D")
        if r.shape != (el.shape[0], az.shape[0]):
            raise ValueError(
                f"ranges shape {r.shape} does not match "
                f"(channels={el.shape[0]}, azimuth_steps={az.shape[0]})"
            )
        if not np.all(r >= 0):
            raise ValueError("ranges must be >= 0 (0 encodes no-return)")
        if az.shape[0] and (az[0] < 0 or az[-1] >= TWO_PI or np.any(np.diff(az) <= 0)):
            raise ValueError("azimuths must be strictly increasing in [0, 2*pi)")
        if el.shape[0] > 1 and np.any(np.diff(el) <= 0):
            raise ValueError("elevations must be strictly increasing")
        object.__setattr__(self, "ranges", r)
        object.__setattr__(self, "azimuths", az)
        object.__setattr__(self, "elevations", el)

    @property
    def channels(self) -> int:
        return self.elevations.shape[0]

    @property
    def azimuth_steps(self) -> int:
        return self.azimuths.shape[0]


@dataclass(frozen=True)
class HeightBand:
    """Vertical ROI, in sensor-relative meters: keep z_min <= z <= z_max."""

    z_min: float = 0.3
    z_max: float = 1.8

    def __post_init__(self):
        if not (math.isfinite(self.z_min) and math.isfinite(self.z_max)):
            raise ConfigError("height band limits must be finite")
        if not self.z_min < self.z_max:
            raise ConfigError(
                f"height band requires z_min < z_max, got ({self.z_min}, {self.z_max})"
            )


@dataclass
class BevImage:
    """Square binary occupancy raster with the sensor at its center."""

    width: int
    height: int
    scale: float
    occupied: np.ndarray = field(repr=False)

    def __init__(self, width: int, height: int, scale: float, occupied: np.ndarray):
        if width != height:
            raise ConfigError(f"BEV image must be square, got {width}x{height}")
        if scale <= 0:
            raise ConfigError(f"scale must be positive, got {scale}")
        occ = np.asarray(occupied, dtype=np.uint8)
        if occ.shape != (height, width):
            raise ValueError(f"occupied shape {occ.shape} != ({height}, {width})")
        self.width = width
        self.height = height
        self.scale = scale
        self.occupied = occ

    @property
    def size(self) -> int:
        return self.width

    @property
    def half_extent(self) -> float:
        """Metric half-range covered by the raster."""
        return self.width * self.scale / 2.0


@dataclass(frozen=True)
class Georef:
    """Continuous pixel georeferencing shared by rasters and OBB labels.

    Maps world (0, 0) to pixel (size/2, size/2 - 1) exactly, consistent
    with the integer floor rule used by rasterize. The continuous mapping
    roundtrips without loss, which the label formats rely on.
    """

    scale: float = DEFAULT_SCALE
    size: int = DEFAULT_SIZE

    def __post_init__(self):
        if self.scale <= 0 or self.size <= 0:
            raise ConfigError(f"invalid georef scale={self.scale} size={self.size}")

    @property
    def half_extent(self) -> float:
        return self.size * self.scale / 2.0

    def world_to_px(self, x, y):
        u = np.asarray(x, dtype=np.float64) / self.scale + self.size / 2
        v = self.size / 2 - 1 - np.asarray(y, dtype=np.float64) / self.scale
        return u, v

    def px_to_world(self, u, v):
        x = (np.asarray(u, dtype=np.float64) - self.size / 2) * self.scale
        y = (self.size / 2 - 1 - np.asarray(v, dtype=np.float64)) * self.scale
        return x, y

    def to_dict(self) -> dict:
        return {"scale": self.scale, "size": self.size}

    @classmethod
    def from_dict(cls, d: dict) -> "Georef":
        return cls(scale=float(d["scale"]), size=int(d["size"]))


def world_to_pixel(x, y, scale: float, size: int):
    """Metric point -> integer pixel (col, row). y-up world, row-down image.

    World (0, 0) lands in pixel (size/2, size/2 - 1). Vectorizes over
    array inputs. No bounds check; see rasterize for clipping.
    """
    col = np.floor(np.asarray(x, dtype=np.float64) / scale).astype(np.int64) + size // 2
    row = size // 2 - 1 - np.floor(np.asarray(y, dtype=np.float64) / scale).astype(np.int64)
    return col, row


def pixel_to_world(col, row, scale: float, size: int):
    """Pixel (col, row) -> metric coordinates of the cell center."""
    x = (np.asarray(col, dtype=np.float64) - size // 2 + 0.5) * scale
    y = (size // 2 - 1 - np.asarray(row, dtype=np.float64) + 0.5) * scale
    return x, y


def spherical_to_cartesian(frame: LidarFrame) -> np.ndarray:
    """Project a frame to (N, 3) sensor-relative Cartesian points.

    x = r cos(el) cos(az), y = r cos(el) sin(az), z = r sin(el).
    Zero-range (no-return) beams are omitted. Points come out
    channel-major: all azimuths of channel 0, then channel 1, ...
    """
    el = frame.elevations[:, None]
    az = frame.azimuths[None, :]
    r = frame.ranges
    cos_el = np.cos(el)
    x = r * cos_el * np.cos(az)
    y = r * cos_el * np.sin(az)
    z = r * np.sin(el) * np.ones_like(az)
    valid = r > 0
    return np.column_stack((x[valid], y[valid], z[valid]))


def height_filter(points: np.ndarray, band: HeightBand) -> np.ndarray:
    """Keep points with z inside the band; return their (x, y), order kept."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        return np.zeros((0, 2), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (N, 3) points, got {pts.shape}")
    keep = (pts[:, 2] >= band.z_min) & (pts[:, 2] <= band.z_max)
    return pts[keep, :2]


def rasterize(points: np.ndarray, scale: float = DEFAULT_SCALE,
              size: int = DEFAULT_SIZE) -> BevImage:
    """Rasterize metric (x, y) points into a binary occupancy image.

    Pixel (col, row) is set iff some point satisfies
    col = floor(x/scale) + size/2 and row = size/2 - 1 - floor(y/scale).
    Points falling outside the raster are silently dropped.
    """
    if scale <= 0:
        raise ConfigError(f"scale must be positive, got {scale}")
    if size <= 0:
        raise ConfigError(f"size must be positive, got {size}")
    img = np.zeros((size, size), dtype=np.uint8)
    pts = np.asarray(points, dtype=np.float64)
    if pts.size:
        col, row = world_to_pixel(pts[:, 0], pts[:, 1], scale, size)
        ok = (col >= 0) & (col < size) & (row >= 0) & (row < size)
        img[row[ok], col[ok]] = 1
    return BevImage(size, size, scale, img)


def flatten_pipeline(frame: LidarFrame, band: HeightBand,
                     scale: float = DEFAULT_SCALE,
                     size: int = DEFAULT_SIZE) -> tuple[np.ndarray, BevImage]:
    """Full flattening chain: 3D frame -> ROI-filtered 2D points -> raster.

    Returns both representations; point-based detectors consume the 2D set
    while image detectors consume the raster.
    """
    pts3 = spherical_to_cartesian(frame)
    pts2 = height_filter(pts3, band)
    return pts2, rasterize(pts2, scale, size)
