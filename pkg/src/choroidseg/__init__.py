"""Choroidal layer segmentation for macular OCT volumes.

Segments the Bruch's membrane (BM) and choroid-sclera interface (CSI)
surfaces of a 3-D OCT scan with a coarse-to-fine multi-surface graph
search, smooths the CSI with a thin plate spline anchored at per-patch
thickest points, and produces choroidal thickness maps. A companion
statistics module covers accuracy (border/thickness errors, Dice) and
repeatability (paired t, Bland-Altman, ICC, CV, RC) evaluation.
"""

__version__ = "0.1.0"

from .volume import (AxisLayout, OctVolume, VolumeGeometry, CIRRUS, SPECTRALIS,
                     GEOMETRY_PRESETS, read_raw_volume, write_raw_volume)
from .pyramid import (Surface, build_pyramid, downsample_z, upscale_surface,
                      surface_to_level, read_surface_csv, write_surface_csv)
from .costs import (CostVolume, DARK_TO_BRIGHT, BRIGHT_TO_DARK,
                    gaussian_smooth_xz, edge_cost, vesselness, csi_cost)
from .graphseg import (GraphSegProblem, InfeasibleProblemError,
                       SurfaceSolution, propagate_bands, solve,
                       available_backends, default_backend)
from .tps import ThinPlateSpline, fit_tps, evaluate_tps
from .phantom import (PhantomSpec, PhantomTruth, SurfaceModel, VesselSpec,
                      default_phantom_spec, generate_phantom)
from .pipeline import (ChoroidSegmentation, PipelineParams, PipelineStageError,
                       segment_level4, segment_level3, refine_surface,
                       smooth_csi, segment_choroid, mean_thickness_in_circle,
                       pad_depth)
from .metrics import (SurfacePairSample, PairedMeasurements, BorderErrors,
                      TTestResult, BlandAltmanResult, IccResult,
                      average_surfaces, border_errors, thickness_errors, dice,
                      paired_t_test, bland_altman, icc_two_way_random, cv, rc,
                      read_paired_csv, write_paired_csv)

__all__ = [
    "__version__",
    "AxisLayout", "OctVolume", "VolumeGeometry", "CIRRUS", "SPECTRALIS",
    "GEOMETRY_PRESETS", "read_raw_volume", "write_raw_volume",
    "Surface", "build_pyramid", "downsample_z", "upscale_surface",
    "surface_to_level", "read_surface_csv", "write_surface_csv",
    "CostVolume", "DARK_TO_BRIGHT", "BRIGHT_TO_DARK",
    "gaussian_smooth_xz", "edge_cost", "vesselness", "csi_cost",
    "GraphSegProblem", "InfeasibleProblemError", "SurfaceSolution",
    "propagate_bands", "solve", "available_backends", "default_backend",
    "ThinPlateSpline", "fit_tps", "evaluate_tps",
    "PhantomSpec", "PhantomTruth", "SurfaceModel", "VesselSpec",
    "default_phantom_spec", "generate_phantom",
    "ChoroidSegmentation", "PipelineParams", "PipelineStageError",
    "segment_level4", "segment_level3", "refine_surface", "smooth_csi",
    "segment_choroid", "mean_thickness_in_circle", "pad_depth",
    "SurfacePairSample", "PairedMeasurements", "BorderErrors", "TTestResult",
    "BlandAltmanResult", "IccResult", "average_surfaces", "border_errors",
    "thickness_errors", "dice", "paired_t_test", "bland_altman",
    "icc_two_way_random", "cv", "rc", "read_paired_csv", "write_paired_csv",
]
