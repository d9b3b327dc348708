"""Single-document pipeline configuration.

One JSON file configures every stage, one section per module. Section
keys mirror the dataclass field names exactly (angles in radians,
lengths in meters), so a typo in any threshold name fails loudly at
load time instead of silently running with a default.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from bevmap.bev import DEFAULT_SCALE, DEFAULT_SIZE, Georef, HeightBand
from bevmap.detect import DETECTOR_IDS, HoughConfig, LsdConfig, RansacConfig
from bevmap.detect.obb import DEFAULT_CONFIDENCE_FLOOR
from bevmap.errors import ConfigError
from bevmap.fuse_global import LifecycleConfig, NoiseModel
from bevmap.fuse_local import FusionThresholds
from bevmap.manhattan import DEFAULT_MERGE_RADIUS, DEFAULT_SNAP_TOL


@dataclass(frozen=True)
class RasterConfig:
    """BEV raster geometry plus the vertical ROI flattened into it."""

    scale: float = DEFAULT_SCALE
    size: int = DEFAULT_SIZE
    z_min: float = 0.3
    z_max: float = 1.8

    def __post_init__(self):
        if self.scale <= 0.0:
            raise ConfigError(f"raster scale must be positive, got {self.scale}")
        if self.size < 2 or self.size % 2 != 0:
            raise ConfigError(f"raster size must be even and >= 2, got {self.size}")
        HeightBand(self.z_min, self.z_max)  # reuse its validation

    def band(self) -> HeightBand:
        return HeightBand(self.z_min, self.z_max)

    def georef(self) -> Georef:
        return Georef(scale=self.scale, size=self.size)


@dataclass(frozen=True)
class ManhattanConfig:
    enabled: bool = True
    snap_tol: float = DEFAULT_SNAP_TOL
    merge_radius: float = DEFAULT_MERGE_RADIUS

    def __post_init__(self):
        if not 0.0 < self.snap_tol < math.pi / 4.0:
            raise ConfigError(
                f"snap_tol must be in (0, pi/4), got {self.snap_tol}")
        if self.merge_radius <= 0.0:
            raise ConfigError(
                f"merge_radius must be positive, got {self.merge_radius}")


@dataclass(frozen=True)
class ObbSourceConfig:
    """Where the external-detector labels come from.

    path may be a single label file (reused for every frame) or a
    directory holding one file per frame in sorted order.
    """

    path: str | None = None
    confidence_floor: float = DEFAULT_CONFIDENCE_FLOOR

    def __post_init__(self):
        if not 0.0 <= self.confidence_floor <= 1.0:
            raise ConfigError(
                f"confidence_floor must be in [0,1], got {self.confidence_floor}")


@dataclass(frozen=True)
class GlobalConfig:
    """Global-fusion knobs: measurement noise, lifecycle, extent policy."""

    sigma_r: float = 0.02
    sigma_alpha: float = math.radians(0.5)
    confirm_hits: int = 3
    max_misses: int = 5
    visibility_range: float = 45.0
    extent_union: bool = False

    def noise(self) -> NoiseModel:
        return NoiseModel(sigma_r=self.sigma_r, sigma_alpha=self.sigma_alpha)

    def lifecycle(self) -> LifecycleConfig:
        return LifecycleConfig(confirm_hits=self.confirm_hits,
                               max_misses=self.max_misses,
                               visibility_range=self.visibility_range)


_SECTION_TYPES = {
    "raster": RasterConfig,
    "local": FusionThresholds,
    "global": GlobalConfig,
    "manhattan": ManhattanConfig,
    "ransac": RansacConfig,
    "hough": HoughConfig,
    "lsd": LsdConfig,
    "obb": ObbSourceConfig,
}


@dataclass(frozen=True)
class PipelineConfig:
    detector: str = "hough"
    seed: int = 0
    raster: RasterConfig = field(default_factory=RasterConfig)
    local: FusionThresholds = field(default_factory=FusionThresholds)
    global_: GlobalConfig = field(default_factory=GlobalConfig)
    manhattan: ManhattanConfig = field(default_factory=ManhattanConfig)
    ransac: RansacConfig = field(default_factory=RansacConfig)
    hough: HoughConfig = field(default_factory=HoughConfig)
    lsd: LsdConfig = field(default_factory=LsdConfig)
    obb: ObbSourceConfig = field(default_factory=ObbSourceConfig)

    def __post_init__(self):
        if self.detector not in DETECTOR_IDS:
            raise ConfigError(
                f"unknown detector {self.detector!r}; valid: {', '.join(DETECTOR_IDS)}")

    def to_dict(self) -> dict:
        out = {"detector": self.detector, "seed": self.seed}
        for name, value in (("raster", self.raster), ("local", self.local),
                            ("global", self.global_), ("manhattan", self.manhattan),
                            ("ransac", self.ransac), ("hough", self.hough),
                            ("lsd", self.lsd), ("obb", self.obb)):
            out[name] = dataclasses.asdict(value)
        return out


def _build_section(cls, section, name: str):
    if not isinstance(section, dict):
        raise ConfigError(f"section '{name}' must be an object")
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in section '{name}': {', '.join(unknown)}")
    return cls(**section)


def config_from_dict(doc: dict) -> PipelineConfig:
    """Validate and materialize a config document; unknown keys are errors."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    allowed = {"detector", "seed"} | set(_SECTION_TYPES)
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown top-level config key(s): {', '.join(unknown)}")
    kwargs = {}
    if "detector" in doc:
        if not isinstance(doc["detector"], str):
            raise ConfigError("'detector' must be a string")
        kwargs["detector"] = doc["detector"]
    if "seed" in doc:
        if not isinstance(doc["seed"], int) or isinstance(doc["seed"], bool):
            raise ConfigError("'seed' must be an integer")
        kwargs["seed"] = doc["seed"]
    for name, cls in _SECTION_TYPES.items():
        if name in doc:
            key = "global_" if name == "global" else name
            kwargs[key] = _build_section(cls, doc[name], name)
    return PipelineConfig(**kwargs)


def load_config(path) -> PipelineConfig:
    """Read a JSON config file; malformed JSON or bad keys raise ConfigError."""
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON: {exc}") from exc
    return config_from_dict(doc)
