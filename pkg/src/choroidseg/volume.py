"""OCT volume data model and raw-file I/O.

A volume is a 3-D scalar field on a regular grid. In-memory axis order is
``(x, y, z)``: x = A-scan position within a B-scan, y = B-scan index,
z = depth along the A-scan (z=0 at the vitreous side). Intensities are
float64 in [0, 1]; 8-bit raw files map byte k to k/255.

The canonical raw layout stores one A-scan contiguously: z varies fastest,
then x, then y. Scanner exports with other axis orders or flipped axes are
described by an :class:`AxisLayout` and rearranged on load.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "VolumeGeometry",
    "AxisLayout",
    "OctVolume",
    "CIRRUS",
    "SPECTRALIS",
    "GEOMETRY_PRESETS",
    "geometry_from_config",
    "geometry_to_config",
    "read_raw_volume",
    "write_raw_volume",
    "voxel_to_um",
    "um_to_voxel",
]

_AXES = ("x", "y", "z")


@dataclass(frozen=True)
class VolumeGeometry:
    """Grid dimensions (voxels) and physical extents (mm) of a volume.

    Spacings are derived, in micrometres per voxel, as 1000 * extent / n.
    """

    nx: int
    ny: int
    nz: int
    extent_x_mm: float
    extent_y_mm: float
    extent_z_mm: float

    def __post_init__(self) -> None:
        for axis in _AXES:
            n = getattr(self, f"n{axis}")
            extent = getattr(self, f"extent_{axis}_mm")
            if not (isinstance(n, (int, np.integer)) and n >= 2):
                raise ValueError(f"n{axis} must be an integer >= 2, got {n!r}")
            if not (extent > 0 and np.isfinite(extent)):
                raise ValueError(f"extent_{axis}_mm must be finite and > 0, got {extent!r}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def spacing_x_um(self) -> float:
        return 1000.0 * self.extent_x_mm / self.nx

    @property
    def spacing_y_um(self) -> float:
        return 1000.0 * self.extent_y_mm / self.ny

    @property
    def spacing_z_um(self) -> float:
        return 1000.0 * self.extent_z_mm / self.nz

    def spacing_um(self, axis: str) -> float:
        if axis not in _AXES:
            raise ValueError(f"axis must be one of {_AXES}, got {axis!r}")
        return getattr(self, f"spacing_{axis}_um")

    @property
    def n_voxels(self) -> int:
        return self.nx * self.ny * self.nz


CIRRUS = VolumeGeometry(nx=200, ny=200, nz=1024,
                        extent_x_mm=6.0, extent_y_mm=6.0, extent_z_mm=2.0)

SPECTRALIS = VolumeGeometry(nx=512, ny=49, nz=496,
                            extent_x_mm=6.0, extent_y_mm=6.0, extent_z_mm=1.92)

GEOMETRY_PRESETS = {"cirrus": CIRRUS, "spectralis": SPECTRALIS}


def geometry_from_config(pairs: dict[str, str]) -> VolumeGeometry:
    """Build a geometry from flat config keys ``geometry.{nx,...,extent_z_mm}``."""
    required = ["nx", "ny", "nz", "extent_x_mm", "extent_y_mm", "extent_z_mm"]
    values = {}
    for name in required:
        key = f"geometry.{name}"
        if key not in pairs:
            raise ValueError(f"missing config key {key!r}")
        text = pairs[key]
        try:
            values[name] = int(text) if name.startswith("n") else float(text)
        except ValueError as exc:
            raise ValueError(f"config key {key!r}: cannot parse {text!r}") from exc
    return VolumeGeometry(**values)


def geometry_to_config(geometry: VolumeGeometry) -> dict[str, str]:
    return {
        "geometry.nx": str(geometry.nx),
        "geometry.ny": str(geometry.ny),
        "geometry.nz": str(geometry.nz),
        "geometry.extent_x_mm": repr(geometry.extent_x_mm),
        "geometry.extent_y_mm": repr(geometry.extent_y_mm),
        "geometry.extent_z_mm": repr(geometry.extent_z_mm),
    }


@dataclass(frozen=True)
class AxisLayout:
    """How a raw file's byte order maps onto the (x, y, z) grid.

    ``order`` lists the volume axes from slowest- to fastest-varying in the
    file; the canonical layout is ``"yxz"``. ``flip`` names axes whose file
    coordinate runs opposite to the volume coordinate.
    """

    order: str = "yxz"
    flip: str = ""

    def __post_init__(self) -> None:
        if sorted(self.order) != ["x", "y", "z"]:
            raise ValueError(f"order must be a permutation of 'xyz', got {self.order!r}")
        if len(set(self.flip)) != len(self.flip) or any(c not in _AXES for c in self.flip):
            raise ValueError(f"flip must be a subset of 'xyz' without repeats, got {self.flip!r}")

    @classmethod
    def parse(cls, text: str) -> "AxisLayout":
        """Parse ``"yxz"`` or ``"yxz:flip=z"`` descriptor strings."""
        order, _, rest = text.partition(":")
        flip = ""
        if rest:
            if not rest.startswith("flip="):
                raise ValueError(f"unrecognized layout modifier {rest!r}")
            flip = rest[len("flip="):]
        return cls(order=order, flip=flip)

    def describe(self) -> str:
        return self.order + (f":flip={self.flip}" if self.flip else "")


CANONICAL_LAYOUT = AxisLayout()


@dataclass(frozen=True, eq=False)
class OctVolume:
    """A volume's geometry plus its float64 intensity grid in [0, 1]."""

    geometry: VolumeGeometry
    intensities: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.intensities, dtype=np.float64)
        if arr.shape != self.geometry.shape:
            raise ValueError(
                f"intensity shape {arr.shape} does not match geometry {self.geometry.shape}")
        object.__setattr__(self, "intensities", arr)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.geometry.shape


def _file_shape(geometry: VolumeGeometry, layout: AxisLayout) -> tuple[int, ...]:
    return tuple(getattr(geometry, f"n{axis}") for axis in layout.order)


def read_raw_volume(path: str | Path, geometry: VolumeGeometry,
                    layout: AxisLayout = CANONICAL_LAYOUT) -> OctVolume:
    """Load an 8-bit raw volume, rearranging axes per ``layout``.

    The file must contain exactly nx*ny*nz bytes; anything else is a hard
    error naming both sizes, since a wrong geometry silently shears the
    volume otherwise.
    """
    path = Path(path)
    data = np.fromfile(path, dtype=np.uint8)
    expected = geometry.n_voxels
    if data.size != expected:
        raise ValueError(
            f"{path}: file holds {data.size} bytes but geometry "
            f"{geometry.nx}x{geometry.ny}x{geometry.nz} requires {expected}")
    arr = data.reshape(_file_shape(geometry, layout))
    for axis in layout.flip:
        arr = np.flip(arr, axis=layout.order.index(axis))
    arr = arr.transpose([layout.order.index(axis) for axis in _AXES])
    intensities = np.ascontiguousarray(arr, dtype=np.float64) / 255.0
    return OctVolume(geometry=geometry, intensities=intensities)


def write_raw_volume(path: str | Path, volume: OctVolume,
                     layout: AxisLayout = CANONICAL_LAYOUT) -> None:
    """Write a volume as 8-bit raw bytes in the given layout.

    Intensities are mapped back with round(v * 255) clipped to [0, 255], the
    inverse of the loader's k/255 for values already on that grid.
    """
    arr = np.clip(np.round(volume.intensities * 255.0), 0, 255).astype(np.uint8)
    arr = arr.transpose([_AXES.index(axis) for axis in layout.order])
    for axis in layout.flip:
        arr = np.flip(arr, axis=layout.order.index(axis))
    Path(path).write_bytes(np.ascontiguousarray(arr).tobytes())


def voxel_to_um(geometry: VolumeGeometry, axis: str, distance_voxels: float) -> float:
    """Convert a voxel distance along ``axis`` to micrometres."""
    return distance_voxels * geometry.spacing_um(axis)


def um_to_voxel(geometry: VolumeGeometry, axis: str, distance_um: float) -> int:
    """Convert micrometres to the nearest whole number of voxels along ``axis``."""
    return int(round(distance_um / geometry.spacing_um(axis)))
