"""Staged dataflow runtime: data interface, detector, local and global fusion.

Four logical stages connected by capacity-one hand-off queues. The
sensor-side queue is best-effort: a slow detector sees stale frames
replaced rather than a growing backlog, matching how a depth-1 sensor
topic behaves. Every boundary after the detector blocks instead, so
fusion processes every detection it is handed. A sequential scheduler
drives the same stage functions in-line for deterministic replays; with
drops disabled the two modes produce identical snapshot streams.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from pathlib import Path

from bevmap.bev import BevImage, LidarFrame, flatten_pipeline
from bevmap.config import PipelineConfig
from bevmap.detect import (
    RawDetection,
    detect_hough,
    detect_lsd,
    detect_obb,
    detect_ransac,
)
from bevmap.errors import ConfigError, NoDominantFrameError, StageError
from bevmap.fuse_global import GlobalFuser
from bevmap.fuse_local import LocalWallSet, fuse_frame
from bevmap.geom import Pose2
from bevmap.manhattan import optimize

STAGE_NAMES = ("data", "detector", "local", "global")

_SENTINEL = object()


@dataclass(frozen=True)
class LatencyBreakdown:
    """Per-frame wall-clock cost of each stage, in milliseconds.

    transfer_ms covers serialization plus queue hand-off between stages;
    end_to_end_ms runs from frame admission to the published snapshot.
    """

    detector_ms: float
    local_fusion_ms: float
    global_fusion_ms: float
    transfer_ms: float
    end_to_end_ms: float

    def to_dict(self) -> dict:
        return {
            "detector_ms": self.detector_ms,
            "local_fusion_ms": self.local_fusion_ms,
            "global_fusion_ms": self.global_fusion_ms,
            "transfer_ms": self.transfer_ms,
            "end_to_end_ms": self.end_to_end_ms,
        }


@dataclass(frozen=True)
class PipelineOutput:
    """One published epoch: immutable snapshot, floorplan, timing."""

    epoch: int
    frame_ts: float
    snapshot: dict
    floorplan: dict | None
    latency: LatencyBreakdown


@dataclass
class PipelineRun:
    outputs: list[PipelineOutput]
    queue_stats: dict
    frames_offered: int = 0


class StageQueue:
    """Capacity-one stage hand-off with selectable overflow policy.

    replace_oldest never blocks the producer: a full slot is overwritten
    and the stale message counts as dropped. The blocking policy parks
    the producer until the consumer takes the slot. Both policies keep
    delivered + dropped == offered.
    """

    def __init__(self, name: str, replace_oldest: bool = True):
        self.name = name
        self.replace_oldest = replace_oldest
        self.offered = 0
        self.delivered = 0
        self.dropped = 0
        self._slot = _SENTINEL
        self._closed = False
        self._cond = threading.Condition()

    def put(self, item) -> None:
        with self._cond:
            if self._closed:
                return
            if not self.replace_oldest:
                while self._slot is not _SENTINEL and not self._closed:
                    self._cond.wait()
                if self._closed:
                    return
            self.offered += 1
            if self._slot is not _SENTINEL:
                self.dropped += 1
            self._slot = item
            self._cond.notify_all()

    def get(self):
        """Next message, or the module sentinel after close+drain."""
        with self._cond:
            while self._slot is _SENTINEL and not self._closed:
                self._cond.wait()
            if self._slot is _SENTINEL:
                return _SENTINEL
            item = self._slot
            self._slot = _SENTINEL
            self.delivered += 1
            self._cond.notify_all()
            return item

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    def stats(self) -> dict:
        return {"offered": self.offered, "delivered": self.delivered,
                "dropped": self.dropped}


def _obb_label_paths(cfg: PipelineConfig) -> list[Path] | Path:
    if cfg.obb.path is None:
        raise ConfigError("detector 'obb' requires obb.path in the config")
    p = Path(cfg.obb.path)
    if p.is_dir():
        files = sorted(q for q in p.iterdir()
                       if q.suffix in (".jsonl", ".txt"))
        if not files:
            raise ConfigError(f"no .jsonl or .txt label files in {p}")
        return files
    return p


class _Stages:
    """The four stage bodies, shared by both schedulers."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.band = cfg.raster.band()
        self.georef = cfg.raster.georef()
        self.fuser = GlobalFuser(thresholds=cfg.local,
                                 noise=cfg.global_.noise(),
                                 lifecycle=cfg.global_.lifecycle(),
                                 extent_union=cfg.global_.extent_union)
        self._obb_paths = _obb_label_paths(cfg) if cfg.detector == "obb" else None

    def data(self, frame: LidarFrame):
        pts2, img = flatten_pipeline(frame, self.band,
                                     self.cfg.raster.scale, self.cfg.raster.size)
        return pts2, img

    def detect(self, index: int, frame_ts: float, pts2, img: BevImage) -> RawDetection:
        cfg = self.cfg
        if cfg.detector == "ransac":
            return detect_ransac(pts2, cfg.ransac, frame_ts=frame_ts)
        if cfg.detector == "hough":
            return detect_hough(img, cfg.hough, frame_ts=frame_ts)
        if cfg.detector == "lsd":
            return detect_lsd(img, cfg.lsd, frame_ts=frame_ts)
        paths = self._obb_paths
        path = paths if isinstance(paths, Path) else paths[index % len(paths)]
        return detect_obb(path, georef=self.georef,
                          confidence_floor=cfg.obb.confidence_floor,
                          frame_ts=frame_ts)

    def local(self, det: RawDetection) -> LocalWallSet:
        return fuse_frame(det, self.cfg.local)

    def global_(self, walls: LocalWallSet, pose: Pose2) -> tuple[dict, dict | None]:
        self.fuser.step(walls, pose)
        snapshot = self.fuser.snapshot()
        floorplan = None
        if self.cfg.manhattan.enabled:
            confirmed = self.fuser.confirmed_walls()
            try:
                plan = optimize(confirmed, self.fuser.confirmed_columns(),
                                tol=self.cfg.manhattan.snap_tol,
                                merge_radius=self.cfg.manhattan.merge_radius)
                floorplan = plan.to_dict()
            except NoDominantFrameError:
                floorplan = None
        return snapshot, floorplan


def _wrap(stage: str, frame_ts: float, fn, *args):
    try:
        return fn(*args)
    except Exception as exc:  # noqa: BLE001 - rethrown with stage context
        raise StageError(stage, frame_ts, exc) from exc


def _run_sequential(source, stages: _Stages) -> PipelineRun:
    outputs = []
    offered = 0
    for index, (frame, pose) in enumerate(source):
        offered += 1
        t_admit = time.perf_counter()
        pts2, img = _wrap("data", frame.timestamp, stages.data, frame)

        t0 = time.perf_counter()
        det = _wrap("detector", frame.timestamp, stages.detect,
                    index, frame.timestamp, pts2, img)
        detector_ms = (time.perf_counter() - t0) * 1e3

        t0 = time.perf_counter()
        det_wire = det.to_dict()
        det2 = RawDetection.from_dict(det_wire)
        transfer = time.perf_counter() - t0

        t0 = time.perf_counter()
        walls = _wrap("local", frame.timestamp, stages.local, det2)
        local_ms = (time.perf_counter() - t0) * 1e3

        t0 = time.perf_counter()
        walls_wire = walls.to_dict()
        walls2 = LocalWallSet.from_dict(walls_wire)
        transfer += time.perf_counter() - t0

        t0 = time.perf_counter()
        snapshot, floorplan = _wrap("global", frame.timestamp,
                                    stages.global_, walls2, pose)
        global_ms = (time.perf_counter() - t0) * 1e3

        outputs.append(PipelineOutput(
            epoch=snapshot["epoch"],
            frame_ts=frame.timestamp,
            snapshot=snapshot,
            floorplan=floorplan,
            latency=LatencyBreakdown(
                detector_ms=detector_ms,
                local_fusion_ms=local_ms,
                global_fusion_ms=global_ms,
                transfer_ms=transfer * 1e3,
                end_to_end_ms=(time.perf_counter() - t_admit) * 1e3,
            ),
        ))
    stats = {"data->detector": {"offered": offered, "delivered": offered,
                                "dropped": 0}}
    return PipelineRun(outputs=outputs, queue_stats=stats,
                       frames_offered=offered)


def _run_staged(source, stages: _Stages, drops_enabled: bool) -> PipelineRun:
    q_det = StageQueue("data->detector", replace_oldest=drops_enabled)
    q_loc = StageQueue("detector->local", replace_oldest=False)
    q_glo = StageQueue("local->global", replace_oldest=False)
    outputs: list[PipelineOutput] = []
    errors: list[StageError] = []
    err_lock = threading.Lock()
    abort = threading.Event()
    offered = 0

    def fail(err: StageError):
        with err_lock:
            errors.append(err)
        abort.set()
        for q in (q_det, q_loc, q_glo):
            q.close()

    def t_data():
        nonlocal offered
        try:
            for index, (frame, pose) in enumerate(source):
                if abort.is_set():
                    break
                offered += 1
                t_admit = time.perf_counter()
                pts2, img = _wrap("data", frame.timestamp, stages.data, frame)
                q_det.put((index, frame.timestamp, t_admit, pts2, img, pose))
        except StageError as err:
            fail(err)
            return
        except Exception as exc:  # noqa: BLE001 - source iterator failures
            fail(StageError("data", float("nan"), exc))
            return
        q_det.close()

    def t_detect():
        try:
            while True:
                msg = q_det.get()
                if msg is _SENTINEL:
                    break
                index, ts, t_admit, pts2, img, pose = msg
                t0 = time.perf_counter()
                det = _wrap("detector", ts, stages.detect, index, ts, pts2, img)
                detector_ms = (time.perf_counter() - t0) * 1e3
                t0 = time.perf_counter()
                wire = det.to_dict()
                transfer = time.perf_counter() - t0
                q_loc.put((ts, t_admit, detector_ms, transfer, wire, pose))
        except StageError as err:
            fail(err)
            return
        except Exception as exc:  # noqa: BLE001 - wire-format failures
            fail(StageError("detector", float("nan"), exc))
            return
        q_loc.close()

    def t_local():
        try:
            while True:
                msg = q_loc.get()
                if msg is _SENTINEL:
                    break
                ts, t_admit, detector_ms, transfer, wire, pose = msg
                t0 = time.perf_counter()
                det = RawDetection.from_dict(wire)
                transfer += time.perf_counter() - t0
                t0 = time.perf_counter()
                walls = _wrap("local", ts, stages.local, det)
                local_ms = (time.perf_counter() - t0) * 1e3
                t0 = time.perf_counter()
                walls_wire = walls.to_dict()
                transfer += time.perf_counter() - t0
                q_glo.put((ts, t_admit, detector_ms, local_ms, transfer,
                           walls_wire, pose))
        except StageError as err:
            fail(err)
            return
        except Exception as exc:  # noqa: BLE001 - wire-format failures
            fail(StageError("local", float("nan"), exc))
            return
        q_glo.close()

    def t_global():
        try:
            while True:
                msg = q_glo.get()
                if msg is _SENTINEL:
                    break
                ts, t_admit, detector_ms, local_ms, transfer, wire, pose = msg
                t0 = time.perf_counter()
                walls = LocalWallSet.from_dict(wire)
                transfer += time.perf_counter() - t0
                t0 = time.perf_counter()
                snapshot, floorplan = _wrap("global", ts, stages.global_,
                                            walls, pose)
                global_ms = (time.perf_counter() - t0) * 1e3
                outputs.append(PipelineOutput(
                    epoch=snapshot["epoch"],
                    frame_ts=ts,
                    snapshot=snapshot,
                    floorplan=floorplan,
                    latency=LatencyBreakdown(
                        detector_ms=detector_ms,
                        local_fusion_ms=local_ms,
                        global_fusion_ms=global_ms,
                        transfer_ms=transfer * 1e3,
                        end_to_end_ms=(time.perf_counter() - t_admit) * 1e3,
                    ),
                ))
        except StageError as err:
            fail(err)
        except Exception as exc:  # noqa: BLE001 - wire-format failures
            fail(StageError("global", float("nan"), exc))

    threads = [threading.Thread(target=fn, name=name, daemon=True)
               for name, fn in (("data", t_data), ("detector", t_detect),
                                ("local", t_local), ("global", t_global))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        raise errors[0]
    stats = {q.name: q.stats() for q in (q_det, q_loc, q_glo)}
    return PipelineRun(outputs=outputs, queue_stats=stats,
                       frames_offered=offered)


def run_pipeline(source, cfg: PipelineConfig, *, sequential: bool = False,
                 drops_enabled: bool = True) -> PipelineRun:
    """Drive (frame, pose) pairs through the full stack.

    source yields (LidarFrame, Pose2) in acquisition order. Staged mode
    runs the four stages on their own threads; sequential mode calls
    them in-line (drops disabled by construction) and produces identical
    snapshots for the same input. Any stage exception aborts the run as
    a StageError naming the stage and frame timestamp.
    """
    stages = _Stages(cfg)
    if sequential:
        return _run_sequential(source, stages)
    return _run_staged(source, stages, drops_enabled)
