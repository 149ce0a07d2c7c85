"""Synthetic macular OCT phantoms with analytic ground truth.

A phantom is a stack of five homogeneous layers separated by four smooth
surfaces (ILM, BM-EIS, BM, CSI), optionally with dark vessel cylinders
running along x inside the choroid, multiplicative speckle, and a final
quantization to the 1/255 intensity grid so raw-file round trips are exact.

All randomness comes from one seeded generator; the draw order is fixed
(vessels first, then speckle) so the same seed places the same vessels
whether or not speckle is enabled. Ground truth is evaluated analytically
on the full-resolution grid, independent of any segmentation code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .pyramid import Surface
from .volume import CIRRUS, OctVolume, VolumeGeometry

__all__ = [
    "SurfaceModel",
    "LayerLevels",
    "VesselSpec",
    "PhantomSpec",
    "PhantomTruth",
    "default_phantom_spec",
    "generate_phantom",
]

MIN_GAP_VOXELS = 2
EDGE_MARGIN_VOXELS = 2


@dataclass(frozen=True)
class SurfaceModel:
    """Analytic depth field: base + sum of separable sinusoidal terms (um).

    Each term is (amplitude_um, cycles_x, cycles_y, phase_x, phase_y) and
    contributes amp * sin(2*pi*(cycles_x * x/nx + phase_x))
                    * sin(2*pi*(cycles_y * y/ny + phase_y)).
    A pure-x wave uses cycles_y=0, phase_y=0.25 (the y factor is then 1).
    """

    base_um: float
    terms: tuple[tuple[float, float, float, float, float], ...] = ()

    def evaluate_um(self, nx: int, ny: int) -> np.ndarray:
        x = np.arange(nx, dtype=np.float64)[:, None] / nx
        y = np.arange(ny, dtype=np.float64)[None, :] / ny
        depth = np.full((nx, ny), self.base_um, dtype=np.float64)
        for amp, cx, cy, px, py in self.terms:
            depth += (amp * np.sin(2.0 * math.pi * (cx * x + px))
                          * np.sin(2.0 * math.pi * (cy * y + py)))
        return depth


@dataclass(frozen=True)
class LayerLevels:
    """Homogeneous intensity of each layer, top to bottom, in [0, 1]."""

    vitreous: float = 0.05
    retina: float = 0.45
    rpe_band: float = 0.85
    choroid: float = 0.35
    sclera: float = 0.55

    def as_tuple(self) -> tuple[float, ...]:
        return (self.vitreous, self.retina, self.rpe_band, self.choroid, self.sclera)


@dataclass(frozen=True)
class VesselSpec:
    """Dark cylinders along x inside the choroid (lumen darker than stroma)."""

    count: int = 40
    radius_um_min: float = 15.0
    radius_um_max: float = 50.0
    intensity: float = 0.10
    # placement margins keep lumen edges clear of BM above and CSI below
    margin_above_um: float = 25.0
    margin_below_um: float = 15.0


@dataclass(frozen=True)
class PhantomSpec:
    geometry: VolumeGeometry = CIRRUS
    ilm: SurfaceModel = SurfaceModel(390.0)
    bmeis: SurfaceModel = SurfaceModel(684.0)
    bm: SurfaceModel = SurfaceModel(762.0)
    csi: SurfaceModel = SurfaceModel(1055.0)
    levels: LayerLevels = field(default_factory=LayerLevels)
    vessels: VesselSpec | None = None
    speckle: float = 0.0
    seed: int = 0
    # separate noise stream so one anatomy (seed) can be "re-scanned";
    # None keeps speckle on the main stream
    speckle_seed: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.speckle < 1.0:
            raise ValueError(f"speckle must be in [0, 1), got {self.speckle!r}")


@dataclass(frozen=True, eq=False)
class PhantomTruth:
    """Analytic layer boundaries at level 0, in fractional voxel units."""

    ilm: Surface
    bmeis: Surface
    bm: Surface
    csi: Surface

    def as_dict(self) -> dict[str, Surface]:
        return {"ilm": self.ilm, "bmeis": self.bmeis, "bm": self.bm, "csi": self.csi}


def default_phantom_spec(seed: int = 0, *, speckle: float = 0.0,
                         with_vessels: bool = False,
                         csi_base_um: float = 1055.0,
                         speckle_seed: int | None = None) -> PhantomSpec:
    """A Cirrus-sized phantom with gently undulating surfaces.

    Amplitudes keep every pair of surfaces inside the coarse-level
    separation corridors the segmentation assumes, with margin to spare.
    ``csi_base_um`` varies choroidal thickness across synthetic subjects;
    ``speckle_seed`` re-scans one anatomy with fresh noise.
    """
    return PhantomSpec(
        geometry=CIRRUS,
        ilm=SurfaceModel(390.0, terms=((20.0, 1.0, 0.0, 0.0, 0.25),)),
        bmeis=SurfaceModel(684.0, terms=((10.0, 0.7, 0.5, 0.15, 0.1),)),
        bm=SurfaceModel(762.0, terms=((12.0, 0.7, 0.5, 0.15, 0.1),)),
        csi=SurfaceModel(csi_base_um, terms=((20.0, 1.3, 0.8, 0.4, 0.05),)),
        vessels=VesselSpec() if with_vessels else None,
        speckle=speckle,
        seed=seed,
        speckle_seed=speckle_seed,
    )


def _truth_voxels(spec: PhantomSpec) -> dict[str, np.ndarray]:
    geom = spec.geometry
    sz = geom.spacing_z_um
    return {
        name: model.evaluate_um(geom.nx, geom.ny) / sz
        for name, model in (("ilm", spec.ilm), ("bmeis", spec.bmeis),
                            ("bm", spec.bm), ("csi", spec.csi))
    }


def _check_ordering(spec: PhantomSpec, truth: dict[str, np.ndarray]) -> None:
    geom = spec.geometry
    names = ["ilm", "bmeis", "bm", "csi"]
    stack = [np.full(truth["ilm"].shape, float(EDGE_MARGIN_VOXELS))]
    stack += [truth[name] for name in names]
    stack.append(np.full(truth["ilm"].shape, float(geom.nz - 1 - EDGE_MARGIN_VOXELS)))
    labels = ["top margin"] + names + ["bottom margin"]
    for above, below, la, lb in zip(stack, stack[1:], labels, labels[1:]):
        gap = below - above
        # margins only need clearance, interior surfaces need a 2-voxel layer
        required = MIN_GAP_VOXELS if la in names and lb in names else 0
        bad = gap < required
        if bad.any():
            x, y = np.unravel_index(np.argmax(bad), bad.shape)
            raise ValueError(
                f"surface ordering violated at column (x={x}, y={y}): "
                f"{lb} - {la} = {gap[x, y]:.2f} voxels < {required}")


def _paint_layers(spec: PhantomSpec, truth: dict[str, np.ndarray]) -> np.ndarray:
    geom = spec.geometry
    z = np.arange(geom.nz, dtype=np.float64)
    vol = np.full(geom.shape, spec.levels.vitreous, dtype=np.float64)
    below_levels = (spec.levels.retina, spec.levels.rpe_band,
                    spec.levels.choroid, spec.levels.sclera)
    for name, level in zip(("ilm", "bmeis", "bm", "csi"), below_levels):
        vol[z[None, None, :] >= truth[name][:, :, None]] = level
    return vol


def _add_vessels(vol: np.ndarray, spec: PhantomSpec,
                 truth: dict[str, np.ndarray], rng: np.random.Generator) -> None:
    assert spec.vessels is not None
    geom = spec.geometry
    vs = spec.vessels
    sy, sz = geom.spacing_y_um, geom.spacing_z_um
    y_um = np.arange(geom.ny, dtype=np.float64) * sy
    z_um = np.arange(geom.nz, dtype=np.float64) * sz
    bm_um = truth["bm"] * sz
    csi_um = truth["csi"] * sz
    for _ in range(vs.count):
        radius = rng.uniform(vs.radius_um_min, vs.radius_um_max)
        y0 = rng.uniform(radius, (geom.ny - 1) * sy - radius)
        frac = rng.uniform(0.0, 1.0)
        near = np.abs(y_um - y0) <= radius + sy
        z_lo = bm_um[:, near].max() + vs.margin_above_um + radius
        z_hi = csi_um[:, near].min() - vs.margin_below_um - radius
        if z_hi <= z_lo:
            continue  # corridor too narrow for this radius; skip, keep draw order
        z0 = z_lo + frac * (z_hi - z_lo)
        mask = ((y_um[:, None] - y0) ** 2 + (z_um[None, :] - z0) ** 2) <= radius ** 2
        vol[:, mask] = vs.intensity


def generate_phantom(spec: PhantomSpec) -> tuple[OctVolume, PhantomTruth]:
    """Render a phantom volume and its analytic ground-truth surfaces."""
    truth_vox = _truth_voxels(spec)
    _check_ordering(spec, truth_vox)
    rng = np.random.default_rng(spec.seed)
    vol = _paint_layers(spec, truth_vox)
    if spec.vessels is not None and spec.vessels.count > 0:
        _add_vessels(vol, spec, truth_vox, rng)
    if spec.speckle > 0.0:
        noise_rng = rng if spec.speckle_seed is None else \
            np.random.default_rng(spec.speckle_seed)
        noise = noise_rng.random(vol.shape, dtype=np.float64)
        vol *= 1.0 + spec.speckle * (2.0 * noise - 1.0)
        np.clip(vol, 0.0, 1.0, out=vol)
    np.round(vol * 255.0, out=vol)
    vol /= 255.0
    truth = PhantomTruth(**{name: Surface(level=0, heights=h)
                            for name, h in truth_vox.items()})
    return OctVolume(geometry=spec.geometry, intensities=vol), truth
