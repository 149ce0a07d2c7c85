"""On-surface cost volumes: directional edge terms and vessel evidence.

Edge costs reward strong intensity transitions of a given polarity along z.
The vessel term is a multiscale Sato line measure on the Hessian of the
Gaussian-smoothed volume; for the CSI it is turned into a bonus just below
vessels via the rectified negative z-derivative of the vesselness field.

Every function here can evaluate on a restricted z window and reproduce the
full-volume values bit for bit inside that window (reads clamp against the
full volume, and the z smoothing pass always uses the same narrow-output
kernel code). The multi-resolution pipeline relies on this to price only the
voxels its bands can reach.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .volume import OctVolume, VolumeGeometry

__all__ = [
    "DARK_TO_BRIGHT",
    "BRIGHT_TO_DARK",
    "CostVolume",
    "gaussian_smooth_xz",
    "edge_cost",
    "vesselness",
    "vesselness_response",
    "csi_cost",
    "minmax_normalize",
]

DARK_TO_BRIGHT = "dark_to_bright"
BRIGHT_TO_DARK = "bright_to_dark"
_POLARITIES = (DARK_TO_BRIGHT, BRIGHT_TO_DARK)

GAUSS_TRUNCATE = 3.0
SATO_ALPHA = 0.25


@dataclass(frozen=True, eq=False)
class CostVolume:
    """Non-negative per-voxel on-surface costs, lower = more surface-like."""

    kind: str
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"values must be 3-D (nx, ny, nz), got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("cost values must be finite")
        if arr.min(initial=0.0) < 0.0:
            raise ValueError("cost values must be non-negative")
        object.__setattr__(self, "values", arr)


def gauss_kernel_radius(sigma_vox: float) -> int:
    return int(GAUSS_TRUNCATE * sigma_vox + 0.5)


def gaussian_smooth_xz(volume: OctVolume, sigma: float = 1.0) -> OctVolume:
    """Gaussian-smooth along x and z only; B-scans (y) never mix.

    Borders replicate the edge value. ``sigma`` is in voxels and applies to
    both smoothed axes.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma!r}")
    out = gaussian_filter1d(volume.intensities, sigma, axis=0,
                            mode="nearest", truncate=GAUSS_TRUNCATE)
    gaussian_filter1d(out, sigma, axis=2, mode="nearest",
                      truncate=GAUSS_TRUNCATE, output=out)
    return OctVolume(geometry=volume.geometry, intensities=out)


def edge_cost(volume: OctVolume, polarity: str) -> CostVolume:
    """Cost M - rectified z-gradient of the requested polarity.

    dark-to-bright keeps positive z-gradients, bright-to-dark negative ones;
    M is the largest rectified gradient in the volume so costs are >= 0 and
    the strongest matching transition costs 0. Wrong-polarity transitions
    cost exactly M.
    """
    if polarity not in _POLARITIES:
        raise ValueError(f"polarity must be one of {_POLARITIES}, got {polarity!r}")
    if volume.geometry.nz < 3:
        raise ValueError(f"edge cost needs nz >= 3, got nz={volume.geometry.nz}")
    grad = np.gradient(volume.intensities, axis=2)
    if polarity == BRIGHT_TO_DARK:
        np.negative(grad, out=grad)
    np.maximum(grad, 0.0, out=grad)
    peak = grad.max()
    return CostVolume(kind=f"edge_{polarity}", values=peak - grad)


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    """Affine map onto [0, 1]; a constant field maps to all zeros."""
    lo = float(values.min())
    hi = float(values.max())
    if hi == lo:
        return np.zeros_like(values, dtype=np.float64)
    return (values - lo) / (hi - lo)


def _gaussian_weights(sigma_vox: float) -> np.ndarray:
    radius = gauss_kernel_radius(sigma_vox)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-0.5 * (offsets / sigma_vox) ** 2)
    return w / w.sum()


def _narrow_gaussian_z(arr: np.ndarray, sigma_vox: float,
                       z0: int, z1: int) -> np.ndarray:
    """Gaussian z-smoothing evaluated only on output slices [z0, z1].

    Reads from the full array with edge replication; used for every z pass so
    windowed and full-volume evaluations sum in the same order.
    """
    nz = arr.shape[2]
    w = _gaussian_weights(sigma_vox)
    radius = len(w) // 2
    out = np.zeros(arr.shape[:2] + (z1 - z0 + 1,), dtype=np.float64)
    zs = np.arange(z0, z1 + 1)
    for k, wk in enumerate(w):
        src = np.clip(zs + (k - radius), 0, nz - 1)
        out += wk * arr[:, :, src]
    return out


def _smooth3(intensities: np.ndarray, sigmas_vox: tuple[float, float, float],
             z0: int, z1: int) -> np.ndarray:
    """Separable 3-D Gaussian; z pass first (narrow output), then x, then y."""
    sx, sy, sz = sigmas_vox
    block = _narrow_gaussian_z(intensities, sz, z0, z1)
    gaussian_filter1d(block, sx, axis=0, mode="nearest",
                      truncate=GAUSS_TRUNCATE, output=block)
    gaussian_filter1d(block, sy, axis=1, mode="nearest",
                      truncate=GAUSS_TRUNCATE, output=block)
    return block


def _symmetric_eigvals_desc(hxx, hyy, hzz, hxy, hxz, hyz):
    """Eigenvalues of symmetric 3x3 fields, descending, by the trig formula."""
    q = (hxx + hyy + hzz) / 3.0
    dxx, dyy, dzz = hxx - q, hyy - q, hzz - q
    p2 = (dxx ** 2 + dyy ** 2 + dzz ** 2
          + 2.0 * (hxy ** 2 + hxz ** 2 + hyz ** 2))
    p = np.sqrt(p2 / 6.0)
    safe_p = np.where(p > 0.0, p, 1.0)
    bxx, byy, bzz = dxx / safe_p, dyy / safe_p, dzz / safe_p
    bxy, bxz, byz = hxy / safe_p, hxz / safe_p, hyz / safe_p
    det_b = (bxx * (byy * bzz - byz ** 2)
             - bxy * (bxy * bzz - byz * bxz)
             + bxz * (bxy * byz - byy * bxz))
    r = np.clip(det_b / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    e1 = q + 2.0 * p * np.cos(phi)
    e3 = q + 2.0 * p * np.cos(phi + 2.0 * math.pi / 3.0)
    e2 = 3.0 * q - e1 - e3
    return e1, e2, e3


def _sato_measure(e1, e2, e3, alpha: float) -> np.ndarray:
    """Sato line measure for bright tubes (wants e3 <= e2 < 0, e1 small)."""
    abs_e2 = np.abs(e2)
    abs_e3 = np.abs(e3)
    tube = (e2 < 0.0) & (e3 < 0.0)
    safe_e3 = np.where(abs_e3 > 0.0, abs_e3, 1.0)
    safe_e2 = np.where(abs_e2 > 0.0, abs_e2, 1.0)
    base = abs_e3 * (abs_e2 / safe_e3)
    factor = np.where(e1 <= 0.0,
                      1.0 + e1 / safe_e2,
                      1.0 - alpha * e1 / safe_e2)
    factor = np.maximum(factor, 0.0)
    response = np.where(tube, base * factor, 0.0)
    return response


def vesselness_response(volume: OctVolume, scales_um: tuple[float, ...],
                        z0: int | None = None, z1: int | None = None,
                        alpha: float = SATO_ALPHA) -> np.ndarray:
    """Unnormalized multiscale Sato response on output slices [z0, z1].

    Bright tubular structures score high; the caller inverts intensities
    first when vessels are dark. Hessians are taken in physical (um) units
    on the sigma-smoothed volume and responses are scale-normalized by
    sigma**2, then maximized over scales. Memory scales with the window, so
    pass a window on large volumes.
    """
    geom = volume.geometry
    if not scales_um:
        raise ValueError("at least one scale is required")
    if any(s <= 0 for s in scales_um):
        raise ValueError(f"scales must be > 0, got {scales_um!r}")
    nz = geom.nz
    z0 = 0 if z0 is None else int(z0)
    z1 = nz - 1 if z1 is None else int(z1)
    if not 0 <= z0 <= z1 <= nz - 1:
        raise ValueError(f"invalid z window [{z0}, {z1}] for nz={nz}")
    spacings = (geom.spacing_x_um, geom.spacing_y_um, geom.spacing_z_um)
    best = np.zeros((geom.nx, geom.ny, z1 - z0 + 1), dtype=np.float64)
    for sigma_um in scales_um:
        sigmas_vox = tuple(sigma_um / s for s in spacings)
        # two z-gradient passes each eat one exact slice at the block edge
        pad = 2
        b0, b1 = max(0, z0 - pad), min(nz - 1, z1 + pad)
        block = _smooth3(volume.intensities, sigmas_vox, b0, b1)
        sx, sy, sz = spacings
        gx = np.gradient(block, sx, axis=0)
        hxx = np.gradient(gx, sx, axis=0)
        hxy = np.gradient(gx, sy, axis=1)
        hxz = np.gradient(gx, sz, axis=2)
        del gx
        gy = np.gradient(block, sy, axis=1)
        hyy = np.gradient(gy, sy, axis=1)
        hyz = np.gradient(gy, sz, axis=2)
        del gy
        gz = np.gradient(block, sz, axis=2)
        hzz = np.gradient(gz, sz, axis=2)
        del gz, block
        e1, e2, e3 = _symmetric_eigvals_desc(hxx, hyy, hzz, hxy, hxz, hyz)
        del hxx, hyy, hzz, hxy, hxz, hyz
        response = (sigma_um ** 2) * _sato_measure(e1, e2, e3, alpha)
        lo, hi = z0 - b0, z0 - b0 + (z1 - z0)
        np.maximum(best, response[:, :, lo:hi + 1], out=best)
    return best


def vesselness(volume: OctVolume, scales_um: tuple[float, ...] = (30.0, 60.0),
               alpha: float = SATO_ALPHA) -> np.ndarray:
    """Full-volume multiscale vesselness, min-max normalized to [0, 1]."""
    return minmax_normalize(vesselness_response(volume, scales_um, alpha=alpha))


def csi_cost(volume: OctVolume, vessel_field: np.ndarray,
             weight: float = 1.0) -> CostVolume:
    """Choroid-sclera interface cost: edge term plus below-vessel bonus.

    cost = minmax(dark-to-bright edge cost)
         + weight * (1 - minmax(max(0, -d/dz vesselness)))

    The bonus is invariant to any positive affine rescaling of the vessel
    field, so normalized and raw vesselness give identical costs. With no
    vessel evidence at all the second term degenerates to the constant
    ``weight`` and the edge term alone decides.
    """
    if weight < 0:
        raise ValueError(f"weight must be >= 0, got {weight!r}")
    vessel_field = np.asarray(vessel_field, dtype=np.float64)
    if vessel_field.shape != volume.geometry.shape:
        raise ValueError(
            f"vessel field shape {vessel_field.shape} does not match "
            f"volume shape {volume.geometry.shape}")
    edge = minmax_normalize(edge_cost(volume, DARK_TO_BRIGHT).values)
    below = np.maximum(-np.gradient(vessel_field, axis=2), 0.0)
    bonus = minmax_normalize(below)
    return CostVolume(kind="csi", values=edge + weight * (1.0 - bonus))
