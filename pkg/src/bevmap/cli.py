"""Command-line driver: dataset generation, runs, evaluation, benchmarks.

Every command records a manifest (inputs, seed, tool version, outputs,
timestamps) written atomically at the end of the run, so any result
directory can be reproduced from the manifest alone. Exit codes: 0 on
success, 1 for configuration or input validation problems, 2 for
runtime failures. The BEVMAP_LOG environment variable sets the log
level (DEBUG, INFO, WARNING, ERROR).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from bevmap import __version__, kernels
from bevmap.bev import HeightBand, flatten_pipeline
from bevmap.config import ObbSourceConfig, PipelineConfig, load_config
from bevmap.detect import (
    DETECTOR_IDS,
    HoughConfig,
    LsdConfig,
    detect_hough,
    detect_lsd,
    write_obb_jsonl,
    write_obb_yolo,
)
from bevmap.errors import BevmapError, ConfigError, FormatError
from bevmap.evalbench import (
    MatchCriteria,
    bench_pipeline,
    compute_metrics,
    match_to_gt,
)
from bevmap.frameio import read_bevf, sidecar_path, write_bevf, write_pbm
from bevmap.geom import PolarSegment, Pose2, polar_to_segment
from bevmap.pipeline import run_pipeline
from bevmap.render import (
    render_eval_svg,
    render_floorplan_svg,
    render_latency_svg,
    render_metrics_svg,
    render_world_svg,
)
from bevmap.simworld import (
    SCENARIO_KINDS,
    SensorModel,
    export_obb_labels,
    load_ground_truth,
    load_trajectory,
    make_scenario,
    make_trajectory,
    save_ground_truth,
    save_trajectory,
    save_world,
    simulate_frame,
)

log = logging.getLogger("bevmap.cli")

_VALIDATION_ERRORS = (ConfigError, FormatError)


def _setup_logging() -> None:
    name = os.environ.get("BEVMAP_LOG", "WARNING").strip().upper()
    level = getattr(logging, name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


class _Manifest:
    """Collects run facts and lands them in one atomic write."""

    def __init__(self, command: str, out_dir: Path, seed: int,
                 config_path: str | None, input_paths: list[str]):
        self.doc = {
            "command": command,
            "config": config_path,
            "inputs": sorted(input_paths),
            "out_dir": str(out_dir),
            "seed": seed,
            "version": __version__,
            "started_utc": datetime.now(timezone.utc).isoformat(),
            "finished_utc": None,
            "outputs": [],
        }
        self.out_dir = out_dir

    def add(self, path: Path) -> Path:
        self.doc["outputs"].append(str(path.relative_to(self.out_dir)))
        return path

    def write(self) -> None:
        self.doc["finished_utc"] = datetime.now(timezone.utc).isoformat()
        self.doc["outputs"] = sorted(self.doc["outputs"])
        _atomic_write_text(self.out_dir / "manifest.json",
                           json.dumps(self.doc, indent=2) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_cfg(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if getattr(args, "detector", None):
        if args.detector not in DETECTOR_IDS:
            raise ConfigError(f"unknown detector {args.detector!r}; "
                              f"valid: {', '.join(DETECTOR_IDS)}")
        cfg = dataclasses.replace(cfg, detector=args.detector)
    if getattr(args, "obb_file", None):
        cfg = dataclasses.replace(
            cfg, obb=ObbSourceConfig(path=args.obb_file,
                                     confidence_floor=cfg.obb.confidence_floor))
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    seed = args.seed if args.seed is not None else 0
    manifest = _Manifest("simulate", out, seed, args.config, [])
    cfg = _load_cfg(args)
    world, gt = make_scenario(args.scenario, seed)
    if args.glass_ghost:
        world.glass_ghost = True
    trajectory = make_trajectory(args.scenario, args.frames, seed, world=world)
    sensor = SensorModel(seed=seed)

    frames = [simulate_frame(world, sensor, pose, frame_index=i)
              for i, (pose, _ts) in enumerate(trajectory)]
    write_bevf(manifest.add(out / "frames.bevf"), frames)
    save_world(manifest.add(out / "world.json"), world)
    save_trajectory(manifest.add(out / "trajectory.json"), trajectory)
    save_ground_truth(manifest.add(out / "gt.json"), gt)
    _atomic_write_text(manifest.add(out / "world.svg"),
                       render_world_svg(world))

    # One label file per frame, jsonl and yolo in separate directories so
    # either directory can feed the obb detector without format mixing.
    georef = cfg.raster.georef()
    labels = out / "labels"
    labels_yolo = out / "labels_yolo"
    labels.mkdir(exist_ok=True)
    labels_yolo.mkdir(exist_ok=True)
    for i, (pose, _ts) in enumerate(trajectory):
        records, bev = export_obb_labels(world, georef, pose=pose)
        write_obb_jsonl(manifest.add(labels / f"frame_{i:05d}.jsonl"),
                        records, georef)
        write_obb_yolo(manifest.add(labels_yolo / f"frame_{i:05d}.txt"),
                       records, georef)
        if i == 0:
            write_pbm(manifest.add(out / "bev_preview.pbm"), bev)
            manifest.add(sidecar_path(out / "bev_preview.pbm"))
    manifest.write()
    log.info("simulated %d frames of %s into %s", len(frames),
             args.scenario, out)
    return 0


def _load_sequence(input_dir: Path):
    frames_path = input_dir / "frames.bevf"
    traj_path = input_dir / "trajectory.json"
    for p in (frames_path, traj_path):
        if not p.exists():
            raise FormatError(f"missing {p.name} in {input_dir}")
    frames = read_bevf(frames_path)
    trajectory = load_trajectory(traj_path)
    if len(frames) != len(trajectory):
        raise FormatError(
            f"{len(frames)} frames but {len(trajectory)} trajectory poses")
    return [(f, pose) for f, (pose, _ts) in zip(frames, trajectory)], \
        [str(frames_path), str(traj_path)]


def cmd_run(args) -> int:
    out = _out_dir(args)
    cfg = _load_cfg(args)
    source, inputs = _load_sequence(Path(args.input))
    manifest = _Manifest("run", out, cfg.seed, args.config, inputs)

    run = run_pipeline(source, cfg, sequential=args.sequential,
                       drops_enabled=not (args.sequential or args.no_drops))

    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    for o in run.outputs:
        _atomic_write_text(manifest.add(snap_dir / f"epoch_{o.epoch:05d}.json"),
                           json.dumps(o.snapshot, indent=2) + "\n")
    final_plan = next((o.floorplan for o in reversed(run.outputs)
                       if o.floorplan is not None), None)
    if final_plan is not None:
        _atomic_write_text(manifest.add(out / "floorplan.json"),
                           json.dumps(final_plan, indent=2) + "\n")
        _atomic_write_text(manifest.add(out / "floorplan.svg"),
                           render_floorplan_svg(final_plan))
    latency_doc = {
        "samples": [o.latency.to_dict() for o in run.outputs],
        "queue_stats": run.queue_stats,
        "frames_offered": run.frames_offered,
        "config": cfg.to_dict(),
    }
    _atomic_write_text(manifest.add(out / "latency.json"),
                       json.dumps(latency_doc, indent=2) + "\n")
    manifest.write()
    log.info("processed %d epochs into %s", len(run.outputs), out)
    return 0


def _snapshot_segments(path: Path):
    try:
        doc = json.loads(path.read_text())
        segs = []
        for w in doc["walls"]:
            if not w.get("confirmed", True):
                continue
            segs.append(polar_to_segment(PolarSegment(
                rho=w["rho"], alpha=w["alpha"], d1=w["d1"], d2=w["d2"])))
        return segs
    except (json.JSONDecodeError, KeyError, TypeError, AttributeError) as exc:
        raise FormatError(f"invalid map snapshot {path}: {exc}") from exc


def cmd_eval(args) -> int:
    out = _out_dir(args)
    map_path = Path(args.map)
    gt_path = Path(args.gt)
    manifest = _Manifest("eval", out, args.seed or 0, None,
                         [str(map_path), str(gt_path)])
    detected = _snapshot_segments(map_path)
    gt = load_ground_truth(gt_path)
    criteria = MatchCriteria(max_perp_dist=args.max_dist,
                             max_angle=np.radians(args.max_angle_deg))
    corr = match_to_gt(detected, gt, criteria)
    report = compute_metrics(corr)
    _atomic_write_text(manifest.add(out / "report.json"),
                       json.dumps(report.to_dict(), indent=2) + "\n")
    _atomic_write_text(manifest.add(out / "eval.svg"),
                       render_eval_svg(detected, gt, corr))
    _atomic_write_text(manifest.add(out / "metrics.svg"),
                       render_metrics_svg({map_path.stem: report.to_dict()}))
    manifest.write()
    print(json.dumps({k: round(v, 4) for k, v in report.to_dict().items()
                      if isinstance(v, float)}, indent=2))
    return 0


def cmd_bench(args) -> int:
    out = _out_dir(args)
    cfg = _load_cfg(args)
    source, inputs = _load_sequence(Path(args.input))
    manifest = _Manifest("bench", out, cfg.seed, args.config, inputs)
    detectors = args.detectors.split(",") if args.detectors else ["hough"]
    stats_by_label = {}
    doc = {}
    for det in detectors:
        det = det.strip()
        if det not in DETECTOR_IDS:
            raise ConfigError(f"unknown detector {det!r}; "
                              f"valid: {', '.join(DETECTOR_IDS)}")
        if det == "obb" and cfg.obb.path is None:
            log.warning("skipping obb bench: no obb.path configured")
            continue
        det_cfg = dataclasses.replace(cfg, detector=det)
        res = bench_pipeline(list(source), det_cfg, repetitions=args.reps,
                             sequential=args.sequential)
        stats_by_label[det] = res.stats
        doc[det] = res.to_dict()
    if not stats_by_label:
        raise ConfigError("no benchmarkable detectors selected")
    _atomic_write_text(manifest.add(out / "bench.json"),
                       json.dumps(doc, indent=2) + "\n")
    _atomic_write_text(manifest.add(out / "latency.svg"),
                       render_latency_svg(stats_by_label,
                                          budget_ms=args.budget_ms))
    manifest.write()
    for det, stats in stats_by_label.items():
        e2e = stats["end_to_end_ms"]
        print(f"{det}: end-to-end p50 {e2e['p50']:.1f} ms, "
              f"p95 {e2e['p95']:.1f} ms")
    return 0


def _bench_kernel_workloads(size: int, seed: int):
    """Representative inputs for each kernel, built once and reused."""
    world, _gt = make_scenario("garage", seed)
    sensor = SensorModel(seed=seed)
    frame = simulate_frame(world, sensor, Pose2(), frame_index=0)
    scale = 40.96 / size  # keep the garage inside the raster at any size
    _pts, img = flatten_pipeline(frame, HeightBand(0.3, 1.8),
                                 scale=scale, size=size)
    return {
        "raycast": lambda: simulate_frame(world, sensor, Pose2(), frame_index=1),
        "hough_ppht": lambda: detect_hough(img, HoughConfig()),
        "lsd_grow": lambda: detect_lsd(img, LsdConfig()),
    }


def cmd_bench_kernels(args) -> int:
    out = _out_dir(args)
    seed = args.seed if args.seed is not None else 0
    manifest = _Manifest("bench-kernels", out, seed, None, [])
    workloads = _bench_kernel_workloads(args.size, seed)
    backends = kernels.available_backends()
    doc = {"size": args.size, "reps": args.reps, "results": {}}
    for wname, fn in workloads.items():
        doc["results"][wname] = {}
        for bname in backends:
            with kernels.use_backend(bname):
                fn()  # warm-up, excluded from timing
                times = []
                for _ in range(args.reps):
                    t0 = time.perf_counter()
                    fn()
                    times.append((time.perf_counter() - t0) * 1e3)
            doc["results"][wname][bname] = {
                "mean_ms": float(np.mean(times)),
                "min_ms": float(np.min(times)),
            }
    _atomic_write_text(manifest.add(out / "kernels.json"),
                       json.dumps(doc, indent=2) + "\n")
    manifest.write()
    for wname, rows in doc["results"].items():
        line = ", ".join(f"{b} {v['mean_ms']:.1f} ms" for b, v in rows.items())
        if "compiled" in rows and "fallback" in rows:
            speedup = rows["fallback"]["mean_ms"] / max(
                rows["compiled"]["mean_ms"], 1e-9)
            line += f" (speedup {speedup:.1f}x)"
        print(f"{wname}: {line}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bevmap",
        description="BEV wall mapping: simulate, run, evaluate, benchmark.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="pipeline config JSON")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("simulate", help="generate frames, GT and labels")
    common(p)
    p.add_argument("--scenario", default="garage",
                   help=f"one of: {', '.join(SCENARIO_KINDS)}")
    p.add_argument("--frames", type=int, default=50)
    p.add_argument("--glass-ghost", action="store_true",
                   help="enable specular ghost returns on glass walls")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="run the pipeline over a dataset")
    common(p)
    p.add_argument("--input", required=True, help="dataset dir from simulate")
    p.add_argument("--detector", default=None,
                   help=f"one of: {', '.join(DETECTOR_IDS)}")
    p.add_argument("--obb-file", default=None,
                   help="label file or dir for the obb detector")
    p.add_argument("--sequential", action="store_true",
                   help="single-threaded deterministic scheduler")
    p.add_argument("--no-drops", action="store_true",
                   help="disable frame dropping in staged mode")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score a map snapshot against GT")
    common(p)
    p.add_argument("--map", required=True, help="snapshot JSON from run")
    p.add_argument("--gt", required=True, help="gt.json from simulate")
    p.add_argument("--max-dist", type=float, default=0.3)
    p.add_argument("--max-angle-deg", type=float, default=5.0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="latency benchmark over a dataset")
    common(p)
    p.add_argument("--input", required=True, help="dataset dir from simulate")
    p.add_argument("--detectors", default="hough",
                   help="comma list from: " + ", ".join(DETECTOR_IDS))
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--budget-ms", type=float, default=100.0)
    p.add_argument("--sequential", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("bench-kernels",
                       help="compare compiled vs fallback kernel backends")
    common(p)
    p.add_argument("--size", type=int, default=1024,
                   help="raster size for the image kernels")
    p.add_argument("--reps", type=int, default=3)
    p.set_defaults(func=cmd_bench_kernels)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BevmapError as exc:
        log.error("%s", exc)
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
