"""LiDAR BEV structural perception toolkit.

Flattens 3D LiDAR frames into 2D bird's-eye-view rasters, extracts wall and
column features with interchangeable detectors (RANSAC, probabilistic Hough,
gradient LSD, external OBB files), fuses them across space and time into a
Manhattan-regularized vector floorplan, and ships a 2D ray-cast simulator
plus an evaluation/benchmark harness.
"""

__version__ = "0.1.0"

from bevmap.geom import Point2, Pose2, PolarSegment, Segment2

__all__ = ["Point2", "Pose2", "PolarSegment", "Segment2", "__version__"]
