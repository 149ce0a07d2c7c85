"""Shared fixtures: small geometries and phantoms sized for fast tests."""

from __future__ import annotations

import numpy as np
import pytest

from choroidseg import (OctVolume, PhantomSpec, SurfaceModel, VesselSpec,
                        VolumeGeometry, generate_phantom, segment_choroid)

# unit-test grid: same axial spacing family as the clinical presets but tiny
SMALL = VolumeGeometry(nx=16, ny=12, nz=128,
                       extent_x_mm=2.0, extent_y_mm=2.0, extent_z_mm=1.0)

# pipeline-test grid: full 5-level ladder fits (512 = 16 * 32) and the axial
# spacing matches the 6x6x2 mm / 1024 preset exactly, so the micrometre-pinned
# band arithmetic exercises the same voxel counts per stage
PIPE = VolumeGeometry(nx=48, ny=40, nz=512,
                      extent_x_mm=6.0, extent_y_mm=6.0, extent_z_mm=1.0)


def make_pipe_spec(seed: int = 0, *, speckle: float = 0.0,
                   with_vessels: bool = False, csi_base_um: float = 700.0,
                   speckle_seed: int | None = None,
                   shift_um: float = 0.0) -> PhantomSpec:
    """Phantom spec on the PIPE grid with all separation corridors satisfied.

    ``shift_um`` moves every surface deeper by the same amount, which keeps
    all inter-surface distances (and hence the painted layer stack) intact.
    """
    return PhantomSpec(
        geometry=PIPE,
        ilm=SurfaceModel(190.0 + shift_um, terms=((10.0, 1.0, 0.0, 0.0, 0.25),)),
        bmeis=SurfaceModel(340.0 + shift_um, terms=((6.0, 0.7, 0.5, 0.15, 0.1),)),
        bm=SurfaceModel(420.0 + shift_um, terms=((8.0, 0.7, 0.5, 0.15, 0.1),)),
        csi=SurfaceModel(csi_base_um + shift_um,
                         terms=((12.0, 1.3, 0.8, 0.4, 0.05),)),
        vessels=VesselSpec(count=10) if with_vessels else None,
        speckle=speckle,
        seed=seed,
        speckle_seed=speckle_seed,
    )


@pytest.fixture(scope="session")
def small_geometry() -> VolumeGeometry:
    return SMALL


@pytest.fixture(scope="session")
def pipe_geometry() -> VolumeGeometry:
    return PIPE


@pytest.fixture(scope="session")
def pipe_phantom():
    """Noise-free phantom on the PIPE grid, shared across pipeline tests."""
    return generate_phantom(make_pipe_spec(seed=0))


@pytest.fixture(scope="session")
def pipe_segmentation(pipe_phantom):
    """One full coarse-to-fine run on the shared phantom."""
    volume, _ = pipe_phantom
    return segment_choroid(volume)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def ramp_volume(geometry: VolumeGeometry) -> OctVolume:
    """Deterministic structured volume: axial ramp with lateral modulation."""
    x = np.arange(geometry.nx)[:, None, None]
    y = np.arange(geometry.ny)[None, :, None]
    z = np.arange(geometry.nz)[None, None, :]
    vals = (0.2 + 0.6 * z / (geometry.nz - 1)
            + 0.1 * np.sin(2 * np.pi * x / geometry.nx)
            * np.cos(2 * np.pi * y / geometry.ny))
    return OctVolume(geometry=geometry,
                     intensities=np.clip(vals, 0.0, 1.0))
