"""Max-flow backend selection: compiled core with pure-Python fallback.

The compiled extension is used when importable; set CHOROIDSEG_BACKEND to
``python`` or ``compiled`` to force a choice (forcing ``compiled`` when the
extension is missing is an error rather than a silent downgrade).
"""

from __future__ import annotations

import os
from typing import Callable

from . import _fallback

try:
    from . import _core
except ImportError:         # extension not built; pure Python still works
    _core = None

__all__ = ["available_backends", "default_backend", "get_backend"]

_ENV_VAR = "CHOROIDSEG_BACKEND"


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if _core is not None else ("python",)


def default_backend() -> str:
    forced = os.environ.get(_ENV_VAR, "").strip().lower()
    if forced:
        if forced not in ("compiled", "python"):
            raise ValueError(
                f"{_ENV_VAR} must be 'compiled' or 'python', got {forced!r}")
        return forced
    return "compiled" if _core is not None else "python"


def get_backend(name: str | None = None) -> tuple[str, Callable]:
    """Resolve a backend name to (name, maxflow callable)."""
    name = default_backend() if name is None else name
    if name == "compiled":
        if _core is None:
            raise RuntimeError(
                "compiled max-flow backend requested but the extension is not built")
        return "compiled", _core.maxflow
    if name == "python":
        return "python", _fallback.maxflow
    raise ValueError(f"unknown backend {name!r}")
