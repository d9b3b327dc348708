"""2D geometric primitives: segments, Hessian-normal-form lines, rigid motions.

Convention used throughout the package: a line is parameterized by the angle
``alpha`` of its unit normal ``n = (cos a, sin a)`` and its distance ``rho >= 0``
from the origin, with the normal pointing away from the origin whenever
``rho > 0`` (full-circle alpha instead of signed rho, so downstream filters
never see sign flips). The tangent is ``t = (-sin a, cos a)``; a segment on
the line is the pair of tangential offsets ``(d1, d2)`` from the perpendicular
foot ``F = rho * n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from bevmap.errors import DegenerateInputError

TWO_PI = 2.0 * math.pi


def wrap_pi(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(angle, TWO_PI)
    if a > math.pi:
        a -= TWO_PI
    elif a <= -math.pi:
        a += TWO_PI
    return a


def wrap_two_pi(angle: float) -> float:
    """Wrap an angle to [0, 2*pi)."""
    a = math.fmod(angle, TWO_PI)
    if a < 0.0:
        a += TWO_PI
    if a >= TWO_PI:  # fmod can round up to 2*pi for tiny negatives
        a = 0.0
    return a


def axial_angle_diff(a: float, b: float) -> float:
    """Difference between two line directions, identified mod pi.

    Returns min(|da-db|, pi-|da-db|) over directions mod pi; the result is
    in [0, pi/2] and is zero iff the directions are equal mod pi.
    """
    d = math.fmod(abs(a - b), math.pi)
    return min(d, math.pi - d)


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DegenerateInputError(f"non-finite point ({self.x}, {self.y})")


@dataclass(frozen=True)
class Segment2:
    """Line segment between two distinct endpoints, in meters."""

    p1: Point2
    p2: Point2

    @property
    def length(self) -> float:
        return math.hypot(self.p2.x - self.p1.x, self.p2.y - self.p1.y)

    @property
    def midpoint(self) -> Point2:
        return Point2(0.5 * (self.p1.x + self.p2.x), 0.5 * (self.p1.y + self.p2.y))

    def direction(self) -> float:
        """Tangent angle in radians (mod 2*pi as given by atan2)."""
        return math.atan2(self.p2.y - self.p1.y, self.p2.x - self.p1.x)


@dataclass(frozen=True)
class PolarSegment:
    """A wall hypothesis in Hessian normal form.

    rho: perpendicular distance from the origin to the infinite line (>= 0).
    alpha: angle of the line normal, in [0, 2*pi).
    d1, d2: signed tangential extents of the segment from the foot, d1 <= d2.
    """

    rho: float
    alpha: float
    d1: float
    d2: float

    def __post_init__(self):
        if self.rho < 0.0:
            raise DegenerateInputError(f"rho must be >= 0, got {self.rho}")
        if self.d1 > self.d2:
            raise DegenerateInputError(f"d1 <= d2 required, got ({self.d1}, {self.d2})")

    @property
    def length(self) -> float:
        return self.d2 - self.d1

    def normal(self) -> tuple[float, float]:
        return math.cos(self.alpha), math.sin(self.alpha)

    def tangent(self) -> tuple[float, float]:
        return -math.sin(self.alpha), math.cos(self.alpha)

    def foot(self) -> Point2:
        nx, ny = self.normal()
        return Point2(self.rho * nx, self.rho * ny)


@dataclass(frozen=True)
class Pose2:
    """2D rigid motion: rotation by theta then translation by (x, y)."""

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_pi(self.theta))

    def apply(self, p: Point2) -> Point2:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Point2(c * p.x - s * p.y + self.x, s * p.x + c * p.y + self.y)

    def inverse(self) -> "Pose2":
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2(-(c * self.x + s * self.y), -(-s * self.x + c * self.y), -self.theta)

    def compose(self, other: "Pose2") -> "Pose2":
        """self o other: apply `other` first, then `self`."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2(
            c * other.x - s * other.y + self.x,
            s * other.x + c * other.y + self.y,
            self.theta + other.theta,
        )


def segment_to_polar(s: Segment2) -> PolarSegment:
    """Convert an endpoint segment to Hessian normal form.

    The normal is chosen to point away from the origin (rho >= 0); for lines
    through the origin the candidate normal with the smaller angle in
    [0, 2*pi) is taken, which makes the conversion deterministic.
    """
    dx = s.p2.x - s.p1.x
    dy = s.p2.y - s.p1.y
    length = math.hypot(dx, dy)
    if length <= 0.0:
        raise DegenerateInputError("zero-length segment has no polar form")
    tx, ty = dx / length, dy / length
    # Normal such that rotating it by +90 degrees gives the tangent.
    nx, ny = ty, -tx
    rho = s.p1.x * nx + s.p1.y * ny
    if rho < 0.0:
        nx, ny, rho = -nx, -ny, -rho
        tx, ty = -tx, -ty
    elif rho == 0.0:
        a_pos = wrap_two_pi(math.atan2(ny, nx))
        a_neg = wrap_two_pi(math.atan2(-ny, -nx))
        if a_neg < a_pos:
            nx, ny = -nx, -ny
            tx, ty = -tx, -ty
    alpha = wrap_two_pi(math.atan2(ny, nx))
    da = s.p1.x * tx + s.p1.y * ty
    db = s.p2.x * tx + s.p2.y * ty
    if da > db:
        da, db = db, da
    return PolarSegment(rho=rho, alpha=alpha, d1=da, d2=db)


def polar_to_segment(p: PolarSegment) -> Segment2:
    """Reconstruct endpoints from Hessian normal form.

    Endpoint order is always (d1-endpoint, d2-endpoint).
    """
    nx, ny = math.cos(p.alpha), math.sin(p.alpha)
    tx, ty = -ny, nx
    fx, fy = p.rho * nx, p.rho * ny
    return Segment2(
        Point2(fx + p.d1 * tx, fy + p.d1 * ty),
        Point2(fx + p.d2 * tx, fy + p.d2 * ty),
    )


def transform_segment(s: Segment2, pose: Pose2) -> Segment2:
    """Apply a rigid motion (rotate by theta, then translate)."""
    return Segment2(pose.apply(s.p1), pose.apply(s.p2))


def transform_polar(p: PolarSegment, pose: Pose2) -> PolarSegment:
    """Rigidly move a polar segment; renormalizes to the canonical form."""
    return segment_to_polar(transform_segment(polar_to_segment(p), pose))


def point_to_line_distance(p: Point2, line: PolarSegment) -> float:
    """Unsigned distance from a point to the infinite line of `line`."""
    nx, ny = line.normal()
    return abs(p.x * nx + p.y * ny - line.rho)


def project_onto_tangent(p: Point2, line: PolarSegment) -> float:
    """Signed offset of `p` along the line tangent, measured from the foot."""
    tx, ty = line.tangent()
    return p.x * tx + p.y * ty


def flip_polar(p: PolarSegment) -> "tuple[float, float, float, float]":
    """Antipodal reparameterization (normal negated) as raw (rho, alpha, d1, d2).

    The result has rho <= 0 and therefore is returned as a tuple, not a
    PolarSegment; used transiently when aligning cluster members before
    averaging.
    """
    return (-p.rho, wrap_two_pi(p.alpha + math.pi), -p.d2, -p.d1)


def polar_from_raw(rho: float, alpha: float, d1: float, d2: float) -> PolarSegment:
    """Build a canonical PolarSegment from possibly non-canonical raw values."""
    if rho < 0.0:
        rho, alpha, d1, d2 = -rho, alpha + math.pi, -d2, -d1
    if d1 > d2:
        d1, d2 = d2, d1
    return PolarSegment(rho=rho, alpha=wrap_two_pi(alpha), d1=d1, d2=d2)
