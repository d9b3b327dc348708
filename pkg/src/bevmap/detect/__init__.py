"""Interchangeable wall/column detectors over BEV frames."""

from .base import DETECTOR_IDS, RawDetection
from .hough import HoughConfig, detect_hough
from .lsd import LsdConfig, detect_lsd
from .obb import (
    ObbRecord,
    detect_obb,
    ingest_obb,
    obb_to_features,
    read_obb_file,
    write_obb_jsonl,
    write_obb_yolo,
)
from .ransac import RansacConfig, detect_ransac

__all__ = [
    "DETECTOR_IDS",
    "RawDetection",
    "HoughConfig",
    "LsdConfig",
    "ObbRecord",
    "RansacConfig",
    "detect_hough",
    "detect_lsd",
    "detect_obb",
    "detect_ransac",
    "ingest_obb",
    "obb_to_features",
    "read_obb_file",
    "write_obb_jsonl",
    "write_obb_yolo",
]
