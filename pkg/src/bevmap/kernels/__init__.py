"""Kernel backend selection.

The hot inner loops (PPHT voting/walking, LSD region growing, ray casting)
exist twice: a Cython extension (bevmap.kernels._compiled) and a pure
NumPy/Python fallback (bevmap.kernels._fallback) with identical semantics.
The compiled backend is preferred when importable; set BEVMAP_KERNELS to
"compiled" or "fallback" to force one (forcing "compiled" raises if the
extension is missing).
"""

from __future__ import annotations

import importlib
import os
from contextlib import contextmanager

from bevmap.errors import ConfigError

from . import _fallback

_requested = os.environ.get("BEVMAP_KERNELS", "").strip().lower()
if _requested not in ("", "compiled", "fallback"):
    raise ConfigError(
        f"BEVMAP_KERNELS must be 'compiled' or 'fallback', got {_requested!r}"
    )

_compiled = None
if _requested != "fallback":
    try:
        _compiled = importlib.import_module("._compiled", __name__)
    except ImportError:
        if _requested == "compiled":
            raise ConfigError(
                "BEVMAP_KERNELS=compiled but the compiled extension is not available"
            ) from None

_active = _fallback if _compiled is None else _compiled

BACKEND = "fallback" if _compiled is None else "compiled"

hough_ppht = _active.hough_ppht
lsd_grow = _active.lsd_grow
raycast = _active.raycast


def get_backend() -> str:
    """Name of the backend serving module-level kernel functions."""
    return BACKEND


def available_backends() -> dict[str, object]:
    """Importable backend modules keyed by name."""
    found: dict[str, object] = {"fallback": _fallback}
    if _compiled is not None:
        found["compiled"] = _compiled
    return found


@contextmanager
def use_backend(name: str):
    """Temporarily rebind the module-level kernels to one backend.

    Callers that resolve kernels.hough_ppht at call time (all in-package
    users do) run on the chosen backend inside the block. Not thread
    safe: meant for benchmarking and tests, not concurrent pipelines.
    """
    mods = available_backends()
    if name not in mods:
        raise ConfigError(
            f"kernel backend {name!r} not available; have: {', '.join(mods)}")
    global hough_ppht, lsd_grow, raycast, BACKEND
    saved = (hough_ppht, lsd_grow, raycast, BACKEND)
    mod = mods[name]
    hough_ppht, lsd_grow, raycast, BACKEND = (
        mod.hough_ppht, mod.lsd_grow, mod.raycast, name)
    try:
        yield mod
    finally:
        hough_ppht, lsd_grow, raycast, BACKEND = saved
