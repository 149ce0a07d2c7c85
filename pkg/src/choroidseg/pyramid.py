"""Depth pyramid and surface representation.

Coarse levels are built by mean-pooling along z only: level L halves the
depth of level L-1, so level L has nz / 2**L voxels of depth and 2**L times
the z spacing. Lateral resolution never changes.

A :class:`Surface` stores one terrain-like height field z(x, y) in voxel
units of its own level. Mapping a height between adjacent levels follows the
block-center convention: coarse voxel k covers fine voxels 2k and 2k+1, so
its center sits at fine coordinate 2k + 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .volume import OctVolume, VolumeGeometry

__all__ = [
    "Surface",
    "downsample_z",
    "build_pyramid",
    "upscale_surface",
    "surface_to_level",
    "read_surface_csv",
    "write_surface_csv",
]


@dataclass(frozen=True, eq=False)
class Surface:
    """Height field z(x, y) in voxels at pyramid level ``level``."""

    level: int
    heights: np.ndarray

    def __post_init__(self) -> None:
        if not (isinstance(self.level, (int, np.integer)) and self.level >= 0):
            raise ValueError(f"level must be an integer >= 0, got {self.level!r}")
        arr = np.asarray(self.heights, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"heights must be 2-D (nx, ny), got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("heights must be finite")
        object.__setattr__(self, "level", int(self.level))
        object.__setattr__(self, "heights", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.heights.shape


def downsample_z(volume: OctVolume, factor: int) -> OctVolume:
    """Mean-pool a volume along z by an integer factor.

    Each output voxel is the float64 mean of ``factor`` consecutive input
    voxels, so the volume-wide mean intensity is preserved exactly. ``factor``
    must divide nz.
    """
    if not (isinstance(factor, (int, np.integer)) and factor >= 1):
        raise ValueError(f"factor must be an integer >= 1, got {factor!r}")
    geom = volume.geometry
    if geom.nz % factor != 0:
        raise ValueError(f"factor {factor} does not divide nz={geom.nz}")
    if factor == 1:
        return volume
    pooled = volume.intensities.reshape(geom.nx, geom.ny, geom.nz // factor, factor)
    pooled = pooled.mean(axis=3, dtype=np.float64)
    out_geom = VolumeGeometry(nx=geom.nx, ny=geom.ny, nz=geom.nz // factor,
                              extent_x_mm=geom.extent_x_mm,
                              extent_y_mm=geom.extent_y_mm,
                              extent_z_mm=geom.extent_z_mm)
    return OctVolume(geometry=out_geom, intensities=pooled)


def build_pyramid(volume: OctVolume, max_level: int = 4) -> dict[int, OctVolume]:
    """Return {level: volume} for levels 0..max_level (level L pooled by 2**L)."""
    if volume.geometry.nz % (2 ** max_level) != 0:
        raise ValueError(
            f"nz={volume.geometry.nz} is not divisible by 2**{max_level}")
    pyramid = {0: volume}
    for level in range(1, max_level + 1):
        pyramid[level] = downsample_z(pyramid[level - 1], 2)
    return pyramid


def upscale_surface(surface: Surface) -> Surface:
    """Map a surface one level finer: z -> 2z + 0.5 (block-center convention)."""
    if surface.level == 0:
        raise ValueError("surface is already at level 0")
    return Surface(level=surface.level - 1, heights=2.0 * surface.heights + 0.5)


def surface_to_level(surface: Surface, level: int) -> Surface:
    """Re-express a surface at another pyramid level (block-center convention).

    Going coarser inverts :func:`upscale_surface`; heights become fractional.
    """
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    heights = surface.heights
    shift = level - surface.level
    if shift > 0:
        heights = (heights - ((2.0 ** shift) - 1.0) / 2.0) / (2.0 ** shift)
    elif shift < 0:
        factor = 2.0 ** (-shift)
        heights = factor * heights + (factor - 1.0) / 2.0
    return Surface(level=level, heights=heights)


def write_surface_csv(path: str | Path, surface: Surface) -> None:
    """Write ``nx,ny,level`` then the height grid, one x-row per line."""
    nx, ny = surface.shape
    lines = [f"{nx},{ny},{surface.level}"]
    for row in surface.heights:
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_surface_csv(path: str | Path) -> Surface:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty surface file")
    header = lines[0].split(",")
    if len(header) != 3:
        raise ValueError(f"{path}:1: header must be 'nx,ny,level', got {lines[0]!r}")
    try:
        nx, ny, level = (int(part) for part in header)
    except ValueError as exc:
        raise ValueError(f"{path}:1: non-integer header field in {lines[0]!r}") from exc
    body = [line for line in lines[1:] if line.strip()]
    if len(body) != nx:
        raise ValueError(f"{path}: expected {nx} height rows, found {len(body)}")
    heights = np.empty((nx, ny), dtype=np.float64)
    for i, line in enumerate(body):
        parts = line.split(",")
        if len(parts) != ny:
            raise ValueError(f"{path}:{i + 2}: expected {ny} values, found {len(parts)}")
        heights[i] = [float(p) for p in parts]
    return Surface(level=level, heights=heights)
