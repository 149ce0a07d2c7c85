"""Banded multi-surface segmentation as a single minimum s-t cut."""

from .backends import available_backends, default_backend, get_backend
from .problem import GraphSegProblem, InfeasibleProblemError, propagate_bands
from .solver import SurfaceSolution, solve

__all__ = [
    "GraphSegProblem",
    "InfeasibleProblemError",
    "propagate_bands",
    "SurfaceSolution",
    "solve",
    "available_backends",
    "default_backend",
    "get_backend",
]
