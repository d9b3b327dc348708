"""Multi-epoch fusion: per-frame wall sets -> persistent global map.

Each epoch, locally fused features are transformed into the global frame,
greedily associated with existing tracks, and folded in: wall tracks run a
static-state Kalman filter over their polar parameters, column tracks a
plain iterative average. A hit/miss lifecycle separates persistent
structure from transients; only confirmed tracks belong in the published
map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from bevmap.errors import ConfigError, FilterDivergenceError
from bevmap.fuse_local import FusionThresholds, LocalWallSet, pair_distance
from bevmap.geom import (
    Point2,
    PolarSegment,
    Pose2,
    flip_polar,
    transform_polar,
    wrap_pi,
    wrap_two_pi,
)


@dataclass(frozen=True)
class NoiseModel:
    """Measurement noise: range sigma feeds rho/d1/d2, bearing sigma alpha."""

    sigma_r: float = 0.02
    sigma_alpha: float = math.radians(0.5)

    def __post_init__(self):
        if self.sigma_r <= 0.0 or self.sigma_alpha <= 0.0:
            raise ConfigError("noise sigmas must be positive")

    def r_matrix(self) -> np.ndarray:
        sr2 = self.sigma_r ** 2
        return np.diag([sr2, self.sigma_alpha ** 2, sr2, sr2])


@dataclass(frozen=True)
class LifecycleConfig:
    confirm_hits: int = 3
    max_misses: int = 5
    visibility_range: float = 45.0

    def __post_init__(self):
        if self.confirm_hits < 1 or self.max_misses < 1:
            raise ConfigError("confirm_hits and max_misses must be >= 1")
        if self.visibility_range <= 0.0:
            raise ConfigError("visibility_range must be positive")


@dataclass
class WallTrack:
    """One persistent wall hypothesis in the global frame."""

    state: PolarSegment
    covariance: np.ndarray
    hits: int
    misses: int
    id: int
    observations: int
    confirmed: bool = False

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=np.float64)
        if cov.shape != (4, 4):
            raise ValueError(f"covariance must be 4x4, got {cov.shape}")
        self.covariance = cov


@dataclass
class ColumnTrack:
    center: Point2
    radius: float
    observations: int
    hits: int
    misses: int
    id: int
    confirmed: bool = False

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError(f"column radius must be > 0, got {self.radius}")


def match_features(locals_: LocalWallSet, tracks: list[WallTrack], pose: Pose2,
                   t: FusionThresholds):
    """Greedy best-score association of local walls to existing tracks.

    Locals move into the global frame first. Candidate pairs are gated by
    the clustering metric (< 1), scored as 1 minus that distance, sorted
    by descending score with (track id, local index) as the tie-break,
    and accepted whenever both sides are still free. Returns index pairs
    (track_idx, local_idx) plus the leftover indices on each side.
    """
    walls_g = [transform_polar(w, pose) for w in locals_.walls]
    candidates = []
    for ti, tr in enumerate(tracks):
        for li, w in enumerate(walls_g):
            d = pair_distance(tr.state, w, t)
            if d < 1.0:
                candidates.append((1.0 - d, tr.id, li, ti))
    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
    taken_t: set[int] = set()
    taken_l: set[int] = set()
    pairs = []
    for _score, _tid, li, ti in candidates:
        if ti in taken_t or li in taken_l:
            continue
        taken_t.add(ti)
        taken_l.add(li)
        pairs.append((ti, li))
    unmatched_locals = [li for li in range(len(walls_g)) if li not in taken_l]
    unmatched_tracks = [ti for ti in range(len(tracks)) if ti not in taken_t]
    return pairs, unmatched_locals, unmatched_tracks


_FLIP_JACOBIAN = np.array([
    [-1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, -1.0],
    [0.0, 0.0, -1.0, 0.0],
])

_SWAP_EXTENTS = np.array([
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, 1.0, 0.0],
])


def kalman_update(track: WallTrack, meas: PolarSegment, noise: NoiseModel,
                  extent_union: bool = False) -> WallTrack:
    """Fold one measurement into a wall track (static-world filter).

    Prediction is the identity with zero process noise, the observation
    matrix is the identity, and R = diag(sigma_r^2, sigma_alpha^2,
    sigma_r^2, sigma_r^2). The measurement is normal-aligned to the track
    before differencing and the angle innovation is wrapped, so antipodal
    parameterizations and the 0/2pi seam are both safe. extent_union
    replaces the filtered d1/d2 with the running min/max, which keeps
    partially observed walls from shrinking.
    """
    x = np.array([track.state.rho, track.state.alpha,
                  track.state.d1, track.state.d2])
    zr, za, zd1, zd2 = meas.rho, meas.alpha, meas.d1, meas.d2
    if abs(wrap_pi(meas.alpha - track.state.alpha)) > math.pi / 2.0:
        zr, za, zd1, zd2 = flip_polar(meas)
    z = np.array([zr, za, zd1, zd2])
    innovation = z - x
    innovation[1] = wrap_pi(innovation[1])

    p = track.covariance
    r = noise.r_matrix()
    gain = np.linalg.solve((p + r).T, p.T).T
    x_new = x + gain @ innovation
    p_new = (np.eye(4) - gain) @ p
    p_new = 0.5 * (p_new + p_new.T)
    if np.linalg.eigvalsh(p_new)[0] < -1e-12:
        raise FilterDivergenceError(
            f"track {track.id}: covariance lost positive-definiteness")

    rho, alpha, d1, d2 = (float(v) for v in x_new)
    if extent_union:
        d1 = min(track.state.d1, zd1)
        d2 = max(track.state.d2, zd2)
    if rho < 0.0:
        rho, alpha, d1, d2 = -rho, alpha + math.pi, -d2, -d1
        p_new = _FLIP_JACOBIAN @ p_new @ _FLIP_JACOBIAN.T
    if d1 > d2:
        d1, d2 = d2, d1
        p_new = _SWAP_EXTENTS @ p_new @ _SWAP_EXTENTS.T
    state = PolarSegment(rho=rho, alpha=wrap_two_pi(alpha), d1=d1, d2=d2)
    return replace(track, state=state, covariance=p_new,
                   observations=track.observations + 1)


def column_update(track: ColumnTrack,
                  meas: tuple[Point2, float]) -> ColumnTrack:
    """Iterative averaging of column center and radius."""
    n = track.observations
    c, r = meas
    center = Point2((n * track.center.x + c.x) / (n + 1),
                    (n * track.center.y + c.y) / (n + 1))
    radius = (n * track.radius + r) / (n + 1)
    return replace(track, center=center, radius=radius, observations=n + 1)


def _segment_range(state: PolarSegment, pose: Pose2) -> float:
    """Distance from the pose position to the nearest point of the segment."""
    nx, ny = state.normal()
    tx, ty = state.tangent()
    along = pose.x * tx + pose.y * ty
    d = min(max(along, state.d1), state.d2)
    cx = state.rho * nx + d * tx
    cy = state.rho * ny + d * ty
    return math.hypot(pose.x - cx, pose.y - cy)


class GlobalFuser:
    """Owner of the global map; single-writer, one step() per epoch.

    Consumers must not mutate the track lists; snapshot() hands out a
    plain-dict copy that is safe to serialize or ship across threads.
    """

    def __init__(self, thresholds: FusionThresholds | None = None,
                 noise: NoiseModel | None = None,
                 lifecycle: LifecycleConfig | None = None,
                 extent_union: bool = False):
        self.thresholds = thresholds if thresholds is not None else FusionThresholds()
        self.noise = noise if noise is not None else NoiseModel()
        self.lifecycle = lifecycle if lifecycle is not None else LifecycleConfig()
        self.extent_union = extent_union
        self.walls: list[WallTrack] = []
        self.columns: list[ColumnTrack] = []
        self.epoch = 0
        self._next_id = 0

    def _new_id(self) -> int:
        i = self._next_id
        self._next_id += 1
        return i

    def step(self, locals_: LocalWallSet, pose: Pose2 = Pose2()) -> None:
        """Fold one epoch of local features into the map."""
        cfg = self.lifecycle
        walls_g = [transform_polar(w, pose) for w in locals_.walls]
        pairs, unmatched_l, unmatched_t = match_features(
            locals_, self.walls, pose, self.thresholds)

        matched_t = set()
        for ti, li in pairs:
            matched_t.add(ti)
            tr = kalman_update(self.walls[ti], walls_g[li], self.noise,
                               self.extent_union)
            tr = replace(tr, hits=tr.hits + 1, misses=0)
            if tr.hits >= cfg.confirm_hits:
                tr.confirmed = True
            self.walls[ti] = tr

        survivors = []
        for ti, tr in enumerate(self.walls):
            if ti in matched_t:
                survivors.append(tr)
                continue
            if _segment_range(tr.state, pose) <= cfg.visibility_range:
                tr = replace(tr, misses=tr.misses + 1)
            if tr.misses <= cfg.max_misses:
                survivors.append(tr)
        for li in unmatched_l:
            survivors.append(WallTrack(
                state=walls_g[li], covariance=self.noise.r_matrix(),
                hits=1, misses=0, id=self._new_id(), observations=1,
                confirmed=1 >= cfg.confirm_hits))
        self.walls = survivors

        self._step_columns(locals_, pose)
        self.epoch += 1

    def _step_columns(self, locals_: LocalWallSet, pose: Pose2) -> None:
        cfg = self.lifecycle
        cols_g = [(pose.apply(c), r) for c, r in locals_.columns]
        candidates = []
        for ti, tr in enumerate(self.columns):
            for li, (c, _r) in enumerate(cols_g):
                d = math.hypot(tr.center.x - c.x, tr.center.y - c.y)
                if d <= self.thresholds.tau_d:
                    candidates.append((d, tr.id, li, ti))
        candidates.sort(key=lambda c: (c[0], c[1], c[2]))
        taken_t: set[int] = set()
        taken_l: set[int] = set()
        for _d, _tid, li, ti in candidates:
            if ti in taken_t or li in taken_l:
                continue
            taken_t.add(ti)
            taken_l.add(li)
            tr = column_update(self.columns[ti], cols_g[li])
            tr = replace(tr, hits=tr.hits + 1, misses=0)
            if tr.hits >= cfg.confirm_hits:
                tr.confirmed = True
            self.columns[ti] = tr

        survivors = []
        for ti, tr in enumerate(self.columns):
            if ti in taken_t:
                survivors.append(tr)
                continue
            rng = math.hypot(tr.center.x - pose.x, tr.center.y - pose.y)
            if rng <= cfg.visibility_range:
                tr = replace(tr, misses=tr.misses + 1)
            if tr.misses <= cfg.max_misses:
                survivors.append(tr)
        for li in range(len(cols_g)):
            if li in taken_l:
                continue
            c, r = cols_g[li]
            survivors.append(ColumnTrack(
                center=c, radius=r, observations=1, hits=1, misses=0,
                id=self._new_id(), confirmed=1 >= cfg.confirm_hits))
        self.columns = survivors

    def confirmed_walls(self) -> list[WallTrack]:
        return [t for t in self.walls if t.confirmed]

    def confirmed_columns(self) -> list[ColumnTrack]:
        return [t for t in self.columns if t.confirmed]

    def snapshot(self) -> dict:
        """JSON-ready copy of the full map state."""
        return {
            "epoch": self.epoch,
            "walls": [{
                "id": t.id,
                "rho": t.state.rho,
                "alpha": t.state.alpha,
                "d1": t.state.d1,
                "d2": t.state.d2,
                "cov_diag": [float(t.covariance[i, i]) for i in range(4)],
                "hits": t.hits,
                "misses": t.misses,
                "observations": t.observations,
                "confirmed": t.confirmed,
            } for t in self.walls],
            "columns": [{
                "id": t.id,
                "x": t.center.x,
                "y": t.center.y,
                "r": t.radius,
                "observations": t.observations,
            } for t in self.columns],
        }
