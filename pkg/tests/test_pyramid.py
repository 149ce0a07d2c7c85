import numpy as np
import pytest

from choroidseg import (OctVolume, Surface, VolumeGeometry, build_pyramid,
                        downsample_z, read_surface_csv, surface_to_level,
                        upscale_surface, write_surface_csv)
from conftest import ramp_volume


def test_downsample_preserves_mean(small_geometry, rng):
    vol = OctVolume(small_geometry, rng.random(small_geometry.shape))
    pooled = downsample_z(vol, 4)
    assert pooled.geometry.nz == small_geometry.nz // 4
    assert pooled.geometry.spacing_z_um == 4 * small_geometry.spacing_z_um
    np.testing.assert_allclose(pooled.intensities.mean(),
                               vol.intensities.mean(), rtol=0, atol=1e-15)


def test_downsample_block_means_exact():
    geom = VolumeGeometry(2, 2, 4, 1.0, 1.0, 1.0)
    vals = np.arange(16, dtype=np.float64).reshape(2, 2, 4)
    pooled = downsample_z(OctVolume(geom, vals), 2)
    np.testing.assert_array_equal(
        pooled.intensities, vals.reshape(2, 2, 2, 2).mean(axis=3))


def test_downsample_factor_must_divide(small_geometry):
    vol = ramp_volume(small_geometry)
    with pytest.raises(ValueError, match="divide"):
        downsample_z(vol, 3)
    assert downsample_z(vol, 1) is vol


def test_build_pyramid_levels(small_geometry):
    vol = ramp_volume(small_geometry)
    pyr = build_pyramid(vol, max_level=4)
    assert sorted(pyr) == [0, 1, 2, 3, 4]
    assert pyr[0] is vol
    for level in range(1, 5):
        assert pyr[level].geometry.nz == small_geometry.nz // 2 ** level
        # pooling twice by 2 equals pooling once by 4
        np.testing.assert_allclose(
            pyr[level].intensities,
            downsample_z(vol, 2 ** level).intensities, atol=1e-12)


def test_build_pyramid_requires_divisible_depth():
    vol = ramp_volume(VolumeGeometry(4, 4, 24, 1.0, 1.0, 1.0))
    with pytest.raises(ValueError, match="divisible"):
        build_pyramid(vol, max_level=4)
    assert len(build_pyramid(vol, max_level=3)) == 4


def test_upscale_block_center_convention():
    s = Surface(level=2, heights=np.array([[3.0, 0.0]]))
    up = upscale_surface(s)
    assert up.level == 1
    np.testing.assert_array_equal(up.heights, [[6.5, 0.5]])
    with pytest.raises(ValueError):
        upscale_surface(Surface(level=0, heights=np.zeros((1, 2))))


def test_surface_to_level_inverts_upscale(rng):
    s = Surface(level=3, heights=rng.uniform(0, 10, size=(4, 5)))
    down = surface_to_level(upscale_surface(s), 3)
    np.testing.assert_allclose(down.heights, s.heights, atol=1e-12)
    # multi-level hop equals repeated single hops
    fine = surface_to_level(s, 0)
    step = upscale_surface(upscale_surface(upscale_surface(s)))
    np.testing.assert_allclose(fine.heights, step.heights, atol=1e-12)
    assert surface_to_level(s, 3).heights is s.heights


def test_surface_validation():
    with pytest.raises(ValueError):
        Surface(level=-1, heights=np.zeros((2, 2)))
    with pytest.raises(ValueError):
        Surface(level=0, heights=np.zeros(4))
    with pytest.raises(ValueError):
        Surface(level=0, heights=np.array([[np.nan, 0.0]]))


def test_surface_csv_roundtrip(tmp_path, rng):
    s = Surface(level=2, heights=rng.uniform(0, 63, size=(6, 4)))
    path = tmp_path / "surf.csv"
    write_surface_csv(path, s)
    back = read_surface_csv(path)
    assert back.level == 2
    np.testing.assert_array_equal(back.heights, s.heights)


def test_surface_csv_errors(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("2,2\n0,0\n0,0\n")
    with pytest.raises(ValueError, match="header"):
        read_surface_csv(path)
    path.write_text("2,2,0\n0.0,1.0\n")
    with pytest.raises(ValueError, match="2 height rows"):
        read_surface_csv(path)
    path.write_text("2,2,0\n0.0,1.0\n2.0\n")
    with pytest.raises(ValueError, match="expected 2 values"):
        read_surface_csv(path)
    path.write_text("")
    with pytest.raises(ValueError, match="empty"):
        read_surface_csv(path)
