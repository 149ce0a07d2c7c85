"""Coarse-to-fine choroidal layer segmentation.

The full-resolution search is intractable and unnecessary: retinal anchors
are found on a 16x depth-pooled volume, the choroidal surfaces on an 8x
volume inside a narrow band below the BM-EIS anchor, and the BM/CSI results
are then refined through levels 2, 1, 0 inside an 11-voxel band around the
previous level's answer. Every graph is built only over its band, which is
what keeps node counts and memory flat across levels. The final CSI is
smoothed with a thin plate spline fitted at the per-patch thickest columns,
which rejects local dips at vessel shadows.

All stage outputs are deterministic functions of the volume and parameters.
"""

from __future__ import annotations

import logging
import resource
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import costs as costmod
from .costs import BRIGHT_TO_DARK, DARK_TO_BRIGHT
from .graphseg import GraphSegProblem, SurfaceSolution, solve
from .pyramid import Surface, build_pyramid, downsample_z, upscale_surface
from .tps import fit_tps
from .volume import OctVolume, VolumeGeometry, um_to_voxel

__all__ = [
    "PipelineParams",
    "ChoroidSegmentation",
    "PipelineStageError",
    "segment_level4",
    "segment_level3",
    "refine_surface",
    "smooth_csi",
    "segment_choroid",
    "mean_thickness_in_circle",
    "pad_depth",
]

logger = logging.getLogger(__name__)

# cost slabs extend past the band so smoothing and gradients see the same
# neighbourhood they would in the full volume (kernel radius 3 + stencil 1)
_SLAB_PAD = 4


class PipelineStageError(RuntimeError):
    """A pipeline stage failed; carries the stage identifier."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"stage {stage}: {message}")


@dataclass(frozen=True)
class PipelineParams:
    """Tuning knobs with defaults chosen for 6x6x2 mm macular volumes.

    Band sizes are voxel counts at the stage's own resolution. On the
    default Cirrus ladder the level-3 values correspond to roughly 30 um
    above and 400 um below the anchor (15.625 um voxels) and the refinement
    band to roughly 86 um at level 2; the TPS patch is 600 um, which tiles
    a Cirrus en-face grid into 10 x 10 patches (100 control points).
    """

    sigma_smooth: float = 1.0
    delta_x: int = 2
    delta_y: int = 2
    level4_separation: tuple[int, int] = (2, 16)
    band_above_anchor: int = 2
    band_below_anchor: int = 26
    sep_bmeis_bm: tuple[int, int] = (1, 8)
    sep_bm_csi: tuple[int, int] = (1, 28)
    refine_band: int = 11
    vessel_scales_um: tuple[float, ...] = (30.0, 60.0)
    vessel_weight: float = 1.0
    tps_patch_um: float = 600.0
    quantization: float = 1.0e4
    max_level: int = 4

    def __post_init__(self) -> None:
        if not self.sigma_smooth > 0:
            raise ValueError("sigma_smooth must be > 0")
        if self.delta_x < 0 or self.delta_y < 0:
            raise ValueError("smoothness deltas must be >= 0")
        for name in ("level4_separation", "sep_bmeis_bm", "sep_bm_csi"):
            gmin, gmax = getattr(self, name)
            if not 0 <= gmin <= gmax:
                raise ValueError(f"{name} must satisfy 0 <= min <= max")
        if self.band_above_anchor < 0 or self.band_below_anchor < 1:
            raise ValueError("anchor band extents must be positive")
        if self.refine_band < 3 or self.refine_band % 2 == 0:
            raise ValueError("refine_band must be an odd count >= 3")
        if not self.tps_patch_um > 0:
            raise ValueError("tps_patch_um must be > 0")
        if not self.quantization > 0:
            raise ValueError("quantization must be > 0")
        if self.max_level < 1:
            raise ValueError("max_level must be >= 1")
        if not self.vessel_scales_um or any(s <= 0 for s in self.vessel_scales_um):
            raise ValueError("vessel_scales_um must be positive")
        if self.vessel_weight < 0:
            raise ValueError("vessel_weight must be >= 0")


@dataclass(frozen=True, eq=False)
class ChoroidSegmentation:
    """Final level-0 products plus run provenance (params, timings, sizes)."""

    bm: Surface
    csi: Surface
    csi_smoothed: Surface
    thickness_um: np.ndarray
    provenance: dict


def _slab(volume: OctVolume, lo: np.ndarray, hi: np.ndarray) -> tuple[OctVolume, int]:
    """Extract the z-slab covering [lo, hi] plus the shared padding."""
    geom = volume.geometry
    z0 = max(0, int(lo.min()) - _SLAB_PAD)
    z1 = min(geom.nz - 1, int(hi.max()) + _SLAB_PAD)
    nzs = z1 - z0 + 1
    slab_geom = VolumeGeometry(nx=geom.nx, ny=geom.ny, nz=nzs,
                               extent_x_mm=geom.extent_x_mm,
                               extent_y_mm=geom.extent_y_mm,
                               extent_z_mm=geom.extent_z_mm * nzs / geom.nz)
    return OctVolume(slab_geom, volume.intensities[:, :, z0:z1 + 1]), z0


def _vessel_window(volume: OctVolume, z0: int, z1: int,
                   params: PipelineParams) -> np.ndarray:
    """Vesselness of the intensity-inverted volume on output slices [z0, z1]."""
    inverted = OctVolume(volume.geometry, 1.0 - volume.intensities)
    return costmod.vesselness_response(inverted, params.vessel_scales_um,
                                       z0=z0, z1=z1)


def _slope_scan(values: np.ndarray, slope: int, axis: int) -> np.ndarray:
    """Min-convolution with slope*|d| along one axis (forward + backward)."""
    v = np.moveaxis(values, axis, -1)
    ramp = slope * np.arange(v.shape[-1], dtype=np.int64)
    out = np.minimum.accumulate(v - ramp, axis=-1) + ramp
    out = (np.minimum.accumulate(out[..., ::-1] - ramp, axis=-1)
           + ramp)[..., ::-1]
    return np.moveaxis(out, -1, axis)


def _lipschitz_center(center: np.ndarray, delta_x: int,
                      delta_y: int) -> np.ndarray:
    """Nearest field whose column-to-column steps respect the deltas.

    The up-scaled parent can out-run the smoothness constraint of the finer
    level (its own delta doubles on upscaling), which would make a band
    around it jointly infeasible. The midpoint of the lower and upper
    slope-limited envelopes is delta-compatible, so a band centered on it
    always admits at least one valid surface; already-compatible centers
    are returned unchanged.
    """
    lower = _slope_scan(_slope_scan(center, delta_x, 0), delta_y, 1)
    upper = -_slope_scan(_slope_scan(-center, delta_x, 0), delta_y, 1)
    return (lower + upper) // 2


def _anchor_band(center: np.ndarray, above: int, below: int, nz: int,
                 stage: str, params: PipelineParams
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Integer band [center-above, center+below], clamped with a warning."""
    c = np.rint(center).astype(np.int64)
    c = _lipschitz_center(c, params.delta_x, params.delta_y)
    c = np.clip(c, 0, nz - 1)
    lo = c - above
    hi = c + below
    clipped = int((lo < 0).sum() + (hi > nz - 1).sum())
    if clipped:
        logger.warning("stage %s: band clipped at the volume border in %d columns",
                       stage, clipped)
    return np.clip(lo, 0, nz - 1), np.clip(hi, 0, nz - 1)


def _stage_solve(stage: str, costs: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                 separations: tuple[tuple[int, int], ...],
                 params: PipelineParams, backend: str | None) -> SurfaceSolution:
    try:
        problem = GraphSegProblem(costs=costs, band_lo=lo, band_hi=hi,
                                  delta_x=params.delta_x, delta_y=params.delta_y,
                                  separations=separations,
                                  quantization=params.quantization)
        return solve(problem, backend=backend)
    except (ValueError, RuntimeError) as exc:
        raise PipelineStageError(stage, str(exc)) from exc


def _segment_level4(vol4: OctVolume, params: PipelineParams,
                    backend: str | None) -> tuple[Surface, Surface, SurfaceSolution]:
    smoothed = costmod.gaussian_smooth_xz(vol4, params.sigma_smooth)
    edge = costmod.minmax_normalize(costmod.edge_cost(smoothed,
                                                      DARK_TO_BRIGHT).values)
    nx, ny, nz4 = vol4.geometry.shape
    lo = np.zeros((nx, ny), dtype=np.int64)
    hi = np.full((nx, ny), nz4 - 1, dtype=np.int64)
    solution = _stage_solve("level4_double", np.stack([edge, edge]), lo, hi,
                            (params.level4_separation,), params, backend)
    return (Surface(4, solution.heights[0].astype(np.float64)),
            Surface(4, solution.heights[1].astype(np.float64)),
            solution)


def _segment_level3(vol3: OctVolume, bmeis4: Surface, params: PipelineParams,
                    backend: str | None
                    ) -> tuple[Surface, Surface, Surface, SurfaceSolution]:
    nz3 = vol3.geometry.nz
    center = upscale_surface(bmeis4).heights
    lo, hi = _anchor_band(center, params.band_above_anchor,
                          params.band_below_anchor, nz3, "level3_triple",
                          params)
    slab, z0 = _slab(vol3, lo, hi)
    smoothed = costmod.gaussian_smooth_xz(slab, params.sigma_smooth)
    # per-surface normalization keeps the three cost scales commensurate;
    # otherwise the joint solve trades anchor placement against the csi term
    edge_up = costmod.minmax_normalize(
        costmod.edge_cost(smoothed, DARK_TO_BRIGHT).values)
    edge_down = costmod.minmax_normalize(
        costmod.edge_cost(smoothed, BRIGHT_TO_DARK).values)
    vessel = _vessel_window(vol3, z0, z0 + slab.geometry.nz - 1, params)
    csi = costmod.csi_cost(smoothed, vessel, params.vessel_weight).values
    stacked = np.stack([edge_up, edge_down, csi])
    solution = _stage_solve("level3_triple", stacked, lo - z0, hi - z0,
                            (params.sep_bmeis_bm, params.sep_bm_csi),
                            params, backend)
    surfaces = tuple(Surface(3, (solution.heights[i] + z0).astype(np.float64))
                     for i in range(3))
    return surfaces[0], surfaces[1], surfaces[2], solution


def _refine_surface(vol: OctVolume, parent: Surface, polarity: str,
                    csi_term: bool, params: PipelineParams,
                    backend: str | None) -> tuple[Surface, SurfaceSolution]:
    level = parent.level - 1
    stage = f"refine_level{level}_{'csi' if csi_term else polarity}"
    if vol.geometry.shape[:2] != parent.shape:
        raise PipelineStageError(stage, "parent surface lattice mismatch")
    nz = vol.geometry.nz
    half = (params.refine_band - 1) // 2
    center = upscale_surface(parent).heights
    lo, hi = _anchor_band(center, half, half, nz, stage, params)
    slab, z0 = _slab(vol, lo, hi)
    smoothed = costmod.gaussian_smooth_xz(slab, params.sigma_smooth)
    if csi_term:
        vessel = _vessel_window(vol, z0, z0 + slab.geometry.nz - 1, params)
        cost = costmod.csi_cost(smoothed, vessel, params.vessel_weight).values
    else:
        cost = costmod.minmax_normalize(
            costmod.edge_cost(smoothed, polarity).values)
    solution = _stage_solve(stage, cost[None], lo - z0, hi - z0, (),
                            params, backend)
    return Surface(level, (solution.heights[0] + z0).astype(np.float64)), solution


def segment_level4(volume: OctVolume, params: PipelineParams | None = None,
                   backend: str | None = None) -> tuple[Surface, Surface]:
    """Find the ILM and BM-EIS anchors on the 16x depth-pooled volume.

    ``volume`` is the full-resolution scan (nz divisible by 16). Both
    surfaces come from one double-surface solve with dark-to-bright costs.
    """
    params = params or PipelineParams()
    vol4 = downsample_z(volume, 2 ** params.max_level)
    ilm, bmeis, _ = _segment_level4(vol4, params, backend)
    return ilm, bmeis


def segment_level3(volume: OctVolume, bmeis4: Surface,
                   params: PipelineParams | None = None,
                   backend: str | None = None) -> tuple[Surface, Surface, Surface]:
    """Solve BM-EIS, BM and CSI jointly at level 3 inside the anchor band.

    The band runs from ``band_above_anchor`` voxels above to
    ``band_below_anchor`` voxels below the up-scaled level-4 BM-EIS; surface
    order is enforced by separation constraints.
    """
    params = params or PipelineParams()
    vol3 = downsample_z(volume, 2 ** (params.max_level - 1))
    bmeis, bm, csi, _ = _segment_level3(vol3, bmeis4, params, backend)
    return bmeis, bm, csi


def refine_surface(volume: OctVolume, parent: Surface, polarity: str,
                   csi_term: bool = False,
                   params: PipelineParams | None = None,
                   backend: str | None = None) -> Surface:
    """Re-solve one surface at the next finer level around its parent.

    ``volume`` must already be at level ``parent.level - 1``. The band is
    ``refine_band`` voxels tall, centered on the up-scaled parent. With
    ``csi_term`` the cost adds the below-vessel bonus to the dark-to-bright
    edge term; otherwise ``polarity`` picks the plain edge cost.
    """
    params = params or PipelineParams()
    surface, _ = _refine_surface(volume, parent, polarity, csi_term,
                                 params, backend)
    return surface


def smooth_csi(bm: Surface, csi: Surface, geometry: VolumeGeometry,
               params: PipelineParams | None = None,
               patch_um: float | None = None) -> Surface:
    """Replace the CSI with a thin plate spline through per-patch anchors.

    The en-face grid is tiled into patches of roughly ``patch_um`` (default
    from params, 600 um); in each patch the column with the largest
    CSI - BM distance provides one control point (its pre-smoothing CSI
    height). Vessel shadows pull the solved CSI up, never down, so
    per-patch thickest columns avoid them. The spline is evaluated
    everywhere and clamped to [BM, nz-1].
    """
    params = params or PipelineParams()
    patch = params.tps_patch_um if patch_um is None else float(patch_um)
    if not patch > 0:
        raise ValueError("patch_um must be > 0")
    if bm.level != 0 or csi.level != 0:
        raise ValueError("smoothing expects level-0 surfaces")
    if bm.shape != csi.shape or bm.shape != (geometry.nx, geometry.ny):
        raise ValueError("surface lattices must match the geometry")
    nx, ny = bm.shape
    n_px = max(1, int(round(geometry.extent_x_mm * 1000.0 / patch)))
    n_py = max(1, int(round(geometry.extent_y_mm * 1000.0 / patch)))
    x_edges = [(i * nx) // n_px for i in range(n_px + 1)]
    y_edges = [(j * ny) // n_py for j in range(n_py + 1)]
    thickness = csi.heights - bm.heights
    points = np.empty((n_px * n_py, 2), dtype=np.float64)
    values = np.empty(n_px * n_py, dtype=np.float64)
    k = 0
    for i in range(n_px):
        for j in range(n_py):
            block = thickness[x_edges[i]:x_edges[i + 1], y_edges[j]:y_edges[j + 1]]
            flat = int(np.argmax(block))
            dx, dy = np.unravel_index(flat, block.shape)
            px, py = x_edges[i] + int(dx), y_edges[j] + int(dy)
            points[k, 0] = px * geometry.spacing_x_um
            points[k, 1] = py * geometry.spacing_y_um
            values[k] = csi.heights[px, py] * geometry.spacing_z_um
            k += 1
    spline = fit_tps(points, values)
    gx = (np.arange(nx, dtype=np.float64) * geometry.spacing_x_um)
    gy = (np.arange(ny, dtype=np.float64) * geometry.spacing_y_um)
    grid = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1).reshape(-1, 2)
    heights = spline(grid).reshape(nx, ny) / geometry.spacing_z_um
    heights = np.minimum(np.maximum(heights, bm.heights), geometry.nz - 1)
    return Surface(0, heights)


def segment_choroid(volume: OctVolume, params: PipelineParams | None = None,
                    backend: str | None = None,
                    keep_stage_surfaces: bool = False) -> ChoroidSegmentation:
    """Run the full anchor -> triple-surface -> refinement -> TPS pipeline."""
    params = params or PipelineParams()
    geom = volume.geometry
    factor = 2 ** params.max_level
    if geom.nz % factor != 0:
        raise ValueError(
            f"nz={geom.nz} is not divisible by {factor}; pad the volume first "
            f"(see pad_depth)")
    timings: dict[str, float] = {}
    graph_nodes: dict[str, int] = {}
    stage_surfaces: dict[str, dict[int, Surface]] = {"bm": {}, "csi": {}}

    def timed(stage, fn):
        start = time.perf_counter()
        result = fn()
        timings[stage] = time.perf_counter() - start
        return result

    pyramid = timed("pyramid", lambda: build_pyramid(volume, params.max_level))
    ilm4, bmeis4, sol4 = timed(
        "level4_double",
        lambda: _segment_level4(pyramid[params.max_level], params, backend))
    graph_nodes["level4_double"] = sol4.n_nodes
    bmeis3, bm, csi, sol3 = timed(
        "level3_triple",
        lambda: _segment_level3(pyramid[params.max_level - 1], bmeis4,
                                params, backend))
    graph_nodes["level3_triple"] = sol3.n_nodes
    stage_surfaces["bm"][3] = bm
    stage_surfaces["csi"][3] = csi
    for level in range(params.max_level - 2, -1, -1):
        vol = pyramid[level]
        bm, sol_bm = timed(
            f"refine_level{level}_bm",
            lambda v=vol, p=bm: _refine_surface(v, p, BRIGHT_TO_DARK, False,
                                                params, backend))
        graph_nodes[f"refine_level{level}_bm"] = sol_bm.n_nodes
        csi, sol_csi = timed(
            f"refine_level{level}_csi",
            lambda v=vol, p=csi: _refine_surface(v, p, DARK_TO_BRIGHT, True,
                                                 params, backend))
        graph_nodes[f"refine_level{level}_csi"] = sol_csi.n_nodes
        stage_surfaces["bm"][level] = bm
        stage_surfaces["csi"][level] = csi
    try:
        csi_smoothed = timed("smooth_csi",
                             lambda: smooth_csi(bm, csi, geom, params))
    except ValueError as exc:
        raise PipelineStageError("smooth_csi", str(exc)) from exc
    thickness = np.maximum(csi_smoothed.heights - bm.heights, 0.0)
    thickness *= geom.spacing_z_um
    peak_rss_mb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0
    provenance = {
        "params": params,
        "backend": sol4.backend,
        "timings_s": timings,
        "graph_nodes": graph_nodes,
        "peak_rss_mb": peak_rss_mb,
        "anchors": {"ilm4": ilm4, "bmeis4": bmeis4, "bmeis3": bmeis3},
    }
    if keep_stage_surfaces:
        provenance["stage_surfaces"] = stage_surfaces
    return ChoroidSegmentation(bm=bm, csi=csi, csi_smoothed=csi_smoothed,
                               thickness_um=thickness, provenance=provenance)


def mean_thickness_in_circle(thickness_um: np.ndarray, geometry: VolumeGeometry,
                             radius_mm: float = 3.0) -> float:
    """Mean thickness over columns within ``radius_mm`` of the centre column.

    Column (ix, iy) sits at physical position (ix * spacing, iy * spacing);
    the circle is centred on the central column (nx//2, ny//2). A radius
    beyond the half-extent is allowed but clips to the grid with a warning.
    """
    thickness_um = np.asarray(thickness_um, dtype=np.float64)
    if thickness_um.shape != (geometry.nx, geometry.ny):
        raise ValueError(
            f"thickness map shape {thickness_um.shape} does not match "
            f"geometry ({geometry.nx}, {geometry.ny})")
    if not radius_mm > 0:
        raise ValueError("radius_mm must be > 0")
    half_extent = min(geometry.extent_x_mm, geometry.extent_y_mm) / 2.0
    if radius_mm > half_extent:
        logger.warning("radius %.3f mm exceeds the half-extent %.3f mm; "
                       "circle clipped to the grid", radius_mm, half_extent)
    sx, sy = geometry.spacing_x_um, geometry.spacing_y_um
    dx = (np.arange(geometry.nx) - geometry.nx // 2) * sx
    dy = (np.arange(geometry.ny) - geometry.ny // 2) * sy
    inside = (dx[:, None] ** 2 + dy[None, :] ** 2) <= (radius_mm * 1000.0) ** 2
    return float(thickness_um[inside].mean())


def pad_depth(volume: OctVolume, multiple: int = 16) -> tuple[OctVolume, int]:
    """Zero-pad the volume bottom so nz divides ``multiple``.

    Returns the padded volume and the original nz; voxel indices of real
    data are unchanged, so surfaces only need clamping to the original
    depth afterwards.
    """
    geom = volume.geometry
    if geom.nz % multiple == 0:
        return volume, geom.nz
    target = ((geom.nz + multiple - 1) // multiple) * multiple
    padded = np.zeros((geom.nx, geom.ny, target), dtype=np.float64)
    padded[:, :, :geom.nz] = volume.intensities
    new_geom = VolumeGeometry(nx=geom.nx, ny=geom.ny, nz=target,
                              extent_x_mm=geom.extent_x_mm,
                              extent_y_mm=geom.extent_y_mm,
                              extent_z_mm=geom.extent_z_mm * target / geom.nz)
    return OctVolume(new_geom, padded), geom.nz
