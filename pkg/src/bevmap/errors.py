"""Exception types shared across the package."""


class BevmapError(Exception):
    """Base class for all package errors."""


class DegenerateInputError(BevmapError, ValueError):
    """Geometric input without a defined answer (e.g. zero-length segment)."""


class ConfigError(BevmapError, ValueError):
    """Invalid or unknown configuration value."""


class FormatError(BevmapError, ValueError):
    """Malformed input file. Carries the offending path/line where known."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        loc = ""
        if path is not None:
            loc = f" [{path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + loc)
        self.path = path
        self.line = line


class FilterDivergenceError(BevmapError, RuntimeError):
    """Kalman covariance lost positive-definiteness beyond repair."""


class NoDominantFrameError(BevmapError, ValueError):
    """Dominant-direction estimate requested on an empty wall set."""


class UndefinedMetricError(BevmapError, ValueError):
    """Evaluation metric has no defined value (e.g. zero ground-truth length)."""


class SimulationError(BevmapError, ValueError):
    """Invalid simulator request (e.g. sensor pose inside solid geometry)."""


class StageError(BevmapError, RuntimeError):
    """A pipeline stage raised; carries stage name and frame timestamp."""

    def __init__(self, stage: str, frame_ts: float, cause: BaseException):
        super().__init__(f"stage '{stage}' failed at frame t={frame_ts:.6f}: {cause!r}")
        self.stage = stage
        self.frame_ts = frame_ts
        self.cause = cause
