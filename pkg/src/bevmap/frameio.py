"""Frame and raster file formats.

BEVF is a little-endian binary container for LiDAR frames: per frame a
20-byte header (magic "BEVF", u32 channels, u32 azimuth_steps, f64
timestamp) followed by f32 elevations[channels], f32 azimuths[steps] and
f32 ranges[channels*steps] row-major by channel. Frames are concatenated
back to back; reading stops at EOF.

Pre-flattened clouds can instead be loaded from CSV with one "x,y,z" row
per point. BEV rasters export as 1-bit PBM (P4) plus a small JSON sidecar
carrying the georeferencing.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from bevmap.bev import BevImage, LidarFrame
from bevmap.errors import FormatError

MAGIC = b"BEVF"
_HEADER = struct.Struct("<4sIId")


def write_bevf(path, frames) -> None:
    """Write frames (a LidarFrame or an iterable of them) to a BEVF file."""
    if isinstance(frames, LidarFrame):
        frames = [frames]
    path = Path(path)
    with open(path, "wb") as fh:
        for fr in frames:
            fh.write(_HEADER.pack(MAGIC, fr.channels, fr.azimuth_steps, fr.timestamp))
            fr.elevations.astype("<f4").tofile(fh)
            fr.azimuths.astype("<f4").tofile(fh)
            fr.ranges.astype("<f4").tofile(fh)


def read_bevf(path) -> list[LidarFrame]:
    """Read every frame from a BEVF file."""
    path = Path(path)
    frames = []
    with open(path, "rb") as fh:
        while True:
            head = fh.read(_HEADER.size)
            if not head:
                break
            if len(head) < _HEADER.size:
                raise FormatError(f"truncated frame header in {path}")
            magic, channels, steps, ts = _HEADER.unpack(head)
            if magic != MAGIC:
                raise FormatError(f"bad magic {magic!r} in {path} (expected {MAGIC!r})")
            need = channels + steps + channels * steps
            raw = fh.read(4 * need)
            if len(raw) < 4 * need:
                raise FormatError(f"truncated frame payload in {path}")
            flat = np.frombuffer(raw, dtype="<f4")
            el = flat[:channels].astype(np.float64)
            az = flat[channels:channels + steps].astype(np.float64)
            rg = flat[channels + steps:].astype(np.float64).reshape(channels, steps)
            try:
                frames.append(LidarFrame(rg, az, el, float(ts)))
            except ValueError as e:
                raise FormatError(f"invalid frame in {path}: {e}") from e
    return frames


def write_xyz_csv(path, points: np.ndarray) -> None:
    """Write an (N, 3) point array as x,y,z CSV rows."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (N, 3) points, got {pts.shape}")
    np.savetxt(path, pts, delimiter=",", fmt="%.9g")


def read_xyz_csv(path) -> np.ndarray:
    """Read x,y,z CSV rows into an (N, 3) float array."""
    path = Path(path)
    try:
        pts = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as e:
        raise FormatError(f"malformed CSV in {path}: {e}") from e
    if pts.size == 0:
        return np.zeros((0, 3), dtype=np.float64)
    if pts.shape[1] != 3:
        raise FormatError(f"expected 3 columns in {path}, got {pts.shape[1]}")
    if not np.all(np.isfinite(pts)):
        raise FormatError(f"non-finite coordinate in {path}")
    return pts


def sidecar_path(pbm_path) -> Path:
    return Path(pbm_path).with_suffix(".json")


def write_pbm(path, image: BevImage) -> None:
    """Write a raster as binary PBM (P4) plus a georeferencing sidecar.

    PBM bit 1 renders black, used here for occupied. The sidecar lands
    next to the image with a .json extension and records {scale, size,
    origin_px} where origin_px is the (col, row) pixel containing the
    world origin.
    """
    path = Path(path)
    packed = np.packbits(image.occupied, axis=1)
    with open(path, "wb") as fh:
        fh.write(f"P4\n{image.width} {image.height}\n".encode("ascii"))
        fh.write(packed.tobytes())
    meta = {
        "scale": image.scale,
        "size": image.width,
        "origin_px": [image.width // 2, image.width // 2 - 1],
    }
    with open(sidecar_path(path), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_pbm(path) -> BevImage:
    """Read a P4 PBM written by write_pbm along with its sidecar."""
    path = Path(path)
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P4"):
        raise FormatError(f"{path} is not a binary PBM (P4)")
    # Header: magic line then "width height" line; no comment support.
    try:
        nl1 = data.index(b"\n")
        nl2 = data.index(b"\n", nl1 + 1)
        w, h = (int(v) for v in data[nl1 + 1:nl2].split())
    except ValueError as e:
        raise FormatError(f"bad PBM header in {path}: {e}") from e
    row_bytes = (w + 7) // 8
    body = data[nl2 + 1:]
    if len(body) < row_bytes * h:
        raise FormatError(f"truncated PBM body in {path}")
    bits = np.unpackbits(
        np.frombuffer(body[:row_bytes * h], dtype=np.uint8).reshape(h, row_bytes),
        axis=1,
    )[:, :w]
    side = sidecar_path(path)
    try:
        with open(side) as fh:
            meta = json.load(fh)
        scale = float(meta["scale"])
    except (OSError, KeyError, ValueError) as e:
        raise FormatError(f"missing or invalid sidecar {side}: {e}") from e
    return BevImage(w, h, scale, bits)
