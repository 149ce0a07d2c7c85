"""Command-line entry point for segmentation, phantoms and evaluation.

Subcommands: ``segment`` (raw volume -> surfaces + thickness products),
``phantom`` (synthetic volume + ground truth), ``eval`` (accuracy metrics
against a reference or two graders), ``repro`` (repeatability statistics
from paired measurements), ``info``.

Configuration is flat dotted key=value text; command-line flags override
file values, which override built-in defaults. Every accepted run writes
its fully resolved configuration beside its outputs, and outputs are staged
in a temporary directory and renamed into place only on success.

Exit codes: 0 success, 1 usage/config error, 2 data error,
3 internal error or infeasibility.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import logging
import os
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .graphseg import InfeasibleProblemError, available_backends, default_backend
from .kvconfig import ConfigError, format_kv, read_kv
from .metrics import (PairedMeasurements, SurfacePairSample, average_surfaces,
                      bland_altman, border_errors, cv, dice, icc_two_way_random,
                      paired_t_test, rc, read_paired_csv, thickness_errors)
from .phantom import default_phantom_spec, generate_phantom
from .pipeline import (PipelineParams, PipelineStageError,
                       mean_thickness_in_circle, pad_depth, segment_choroid)
from .pyramid import Surface, read_surface_csv, write_surface_csv
from .volume import (GEOMETRY_PRESETS, AxisLayout, VolumeGeometry,
                     geometry_from_config, geometry_to_config,
                     read_raw_volume, write_raw_volume)

__all__ = ["main", "RunConfig", "cmd_segment", "cmd_phantom", "cmd_eval",
           "cmd_repro", "cmd_info"]

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    exit_code = EXIT_USAGE


class DataError(Exception):
    exit_code = EXIT_DATA


def _int_pair(text: str) -> tuple[int, int]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected two comma-separated integers, got {text!r}")
    return int(parts[0]), int(parts[1])


def _float_tuple(text: str) -> tuple[float, ...]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError("expected at least one number")
    return tuple(float(p) for p in parts)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


_PIPELINE_PARSERS = {
    "sigma_smooth": float,
    "delta_x": int,
    "delta_y": int,
    "level4_separation": _int_pair,
    "band_above_anchor": int,
    "band_below_anchor": int,
    "sep_bmeis_bm": _int_pair,
    "sep_bm_csi": _int_pair,
    "refine_band": int,
    "vessel_scales_um": _float_tuple,
    "vessel_weight": float,
    "tps_patch_um": float,
    "quantization": float,
    "max_level": int,
}

_PHANTOM_KEYS = {
    "seed": int,
    "speckle": float,
    "vessels": _bool,
    "csi_base_um": float,
}

_RUN_KEYS = {
    "seed": int,
    "radius_mm": float,
    "jobs": int,
    "backend": str,
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings for one command invocation."""

    subcommand: str
    inputs: tuple[str, ...]
    out_dir: str
    geometry: VolumeGeometry
    layout: AxisLayout
    params: PipelineParams
    seed: int = 0
    speckle: float = 0.0
    with_vessels: bool = False
    csi_base_um: float = 1055.0
    radius_mm: float = 3.0
    mask_bscans: tuple[int, ...] | None = None
    jobs: int = 1
    backend: str | None = None

    def to_kv(self) -> dict[str, str]:
        cfg: dict[str, str] = {"run.subcommand": self.subcommand}
        for i, item in enumerate(self.inputs):
            cfg[f"run.input_{i}"] = str(item)
        cfg["run.out_dir"] = str(self.out_dir)
        cfg["run.seed"] = str(self.seed)
        cfg["run.radius_mm"] = repr(self.radius_mm)
        cfg["run.jobs"] = str(self.jobs)
        if self.backend is not None:
            cfg["run.backend"] = self.backend
        if self.mask_bscans is not None:
            cfg["run.mask_bscans"] = ",".join(str(i) for i in self.mask_bscans)
        cfg.update(geometry_to_config(self.geometry))
        cfg["layout.order"] = self.layout.order
        cfg["layout.flip"] = self.layout.flip
        for f in dataclasses.fields(PipelineParams):
            value = getattr(self.params, f.name)
            if isinstance(value, tuple):
                cfg[f"pipeline.{f.name}"] = ",".join(repr(v) if isinstance(v, float)
                                                     else str(v) for v in value)
            elif isinstance(value, float):
                cfg[f"pipeline.{f.name}"] = repr(value)
            else:
                cfg[f"pipeline.{f.name}"] = str(value)
        if self.subcommand == "phantom":
            cfg["phantom.seed"] = str(self.seed)
            cfg["phantom.speckle"] = repr(self.speckle)
            cfg["phantom.vessels"] = "true" if self.with_vessels else "false"
            cfg["phantom.csi_base_um"] = repr(self.csi_base_um)
        return cfg


def _resolve_geometry(text: str) -> VolumeGeometry:
    """A preset name, or a path to a key-value file with geometry.* keys."""
    if text in GEOMETRY_PRESETS:
        return GEOMETRY_PRESETS[text]
    path = Path(text)
    if not path.exists():
        raise UsageError(
            f"unknown geometry {text!r}: not a preset "
            f"({', '.join(sorted(GEOMETRY_PRESETS))}) and no such file")
    try:
        return geometry_from_config(read_kv(path))
    except (ConfigError, ValueError) as exc:
        raise UsageError(f"bad geometry file {text}: {exc}") from exc


def _load_params_file(path: str) -> dict[str, str]:
    try:
        return read_kv(Path(path))
    except FileNotFoundError:
        raise UsageError(f"params file not found: {path}") from None
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc


def _split_config(cfg: dict[str, str]) -> dict[str, dict[str, str]]:
    """Validate dotted namespaces and reject unknown keys."""
    out: dict[str, dict[str, str]] = {"geometry": {}, "layout": {},
                                      "pipeline": {}, "phantom": {}, "run": {}}
    for key, value in cfg.items():
        head, _, rest = key.partition(".")
        if head not in out or not rest:
            raise UsageError(f"unknown config key: {key}")
        known = {"geometry": {"preset", "nx", "ny", "nz", "extent_x_mm",
                              "extent_y_mm", "extent_z_mm"},
                 "layout": {"order", "flip"},
                 "pipeline": set(_PIPELINE_PARSERS),
                 "phantom": set(_PHANTOM_KEYS),
                 "run": set(_RUN_KEYS)}[head]
        if rest not in known:
            raise UsageError(f"unknown config key: {key}")
        out[head][rest] = value
    return out


def _parse_typed(section: str, raw: dict[str, str], parsers: dict) -> dict:
    parsed = {}
    for name, value in raw.items():
        try:
            parsed[name] = parsers[name](value)
        except ValueError as exc:
            raise UsageError(f"bad value for {section}.{name}: {exc}") from exc
    return parsed


def _build_config(args: argparse.Namespace) -> RunConfig:
    file_cfg = _load_params_file(args.params) if args.params else {}
    sections = _split_config(file_cfg)

    if args.geometry is not None:
        geometry = _resolve_geometry(args.geometry)
    elif sections["geometry"]:
        geo = dict(sections["geometry"])
        preset = geo.pop("preset", None)
        if preset is not None:
            if geo:
                raise UsageError("geometry.preset excludes explicit geometry keys")
            if preset not in GEOMETRY_PRESETS:
                raise UsageError(f"unknown geometry preset {preset!r}")
            geometry = GEOMETRY_PRESETS[preset]
        else:
            try:
                geometry = geometry_from_config(
                    {f"geometry.{k}": v for k, v in geo.items()})
            except (ConfigError, ValueError) as exc:
                raise UsageError(f"bad geometry config: {exc}") from exc
    else:
        geometry = GEOMETRY_PRESETS["cirrus"]

    layout_text = args.layout
    if layout_text is None:
        order = sections["layout"].get("order", "yxz")
        flip = sections["layout"].get("flip", "")
        layout_text = f"{order}:flip={flip}" if flip else order
    try:
        layout = AxisLayout.parse(layout_text)
    except ValueError as exc:
        raise UsageError(f"bad layout: {exc}") from exc

    pipe_kwargs = _parse_typed("pipeline", sections["pipeline"],
                               _PIPELINE_PARSERS)
    try:
        params = dataclasses.replace(PipelineParams(), **pipe_kwargs)
    except ValueError as exc:
        raise UsageError(f"bad pipeline params: {exc}") from exc

    phantom_cfg = _parse_typed("phantom", sections["phantom"], _PHANTOM_KEYS)
    run_cfg = _parse_typed("run", sections["run"], _RUN_KEYS)

    seed = run_cfg.get("seed", phantom_cfg.get("seed", 0))
    if args.seed is not None:
        seed = args.seed
    radius = run_cfg.get("radius_mm", 3.0)
    if getattr(args, "radius_mm", None) is not None:
        radius = args.radius_mm
    jobs = run_cfg.get("jobs", 1)
    if getattr(args, "jobs", None) is not None:
        jobs = args.jobs
    if jobs < 1:
        raise UsageError("--jobs must be >= 1")
    backend = run_cfg.get("backend")
    if getattr(args, "backend", None) is not None:
        backend = args.backend
    if backend is not None and backend not in available_backends():
        raise UsageError(
            f"backend {backend!r} not available; have: "
            f"{', '.join(available_backends())}")

    mask_bscans = None
    if getattr(args, "mask_bscans", None) is not None:
        try:
            mask_bscans = tuple(sorted({int(p) for p in
                                        args.mask_bscans.split(",") if p.strip()}))
        except ValueError:
            raise UsageError(
                f"bad --mask-bscans {args.mask_bscans!r}: expected "
                f"comma-separated integers") from None
        if not mask_bscans:
            raise UsageError("--mask-bscans selects no B-scans")

    inputs = tuple(str(p) for p in (getattr(args, "inputs", None) or ()))
    return RunConfig(subcommand=args.subcommand,
                     inputs=inputs,
                     out_dir=str(args.out_dir),
                     geometry=geometry,
                     layout=layout,
                     params=params,
                     seed=int(seed),
                     speckle=phantom_cfg.get("speckle", 0.0),
                     with_vessels=phantom_cfg.get("vessels", False),
                     csi_base_um=phantom_cfg.get("csi_base_um", 1055.0),
                     radius_mm=float(radius),
                     mask_bscans=mask_bscans,
                     jobs=int(jobs),
                     backend=backend)


@contextlib.contextmanager
def _staged_dir(target: Path):
    """Stage outputs in a sibling temp dir; move into place on success."""
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.parent / f".{target.name}.tmp{os.getpid()}"
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir()
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    target.mkdir(exist_ok=True)
    for item in sorted(tmp.iterdir()):
        os.replace(item, target / item.name)
    tmp.rmdir()


def _write_kv_file(path: Path, cfg: dict[str, str]) -> None:
    path.write_text(format_kv(cfg), encoding="utf-8")


def _grid_csv(path: Path, grid: np.ndarray) -> None:
    write_surface_csv(path, Surface(0, np.asarray(grid, dtype=np.float64)))


def _segment_one(config: RunConfig, input_path: str) -> None:
    src = Path(input_path)
    if not src.exists():
        raise DataError(f"input volume not found: {src}")
    try:
        volume = read_raw_volume(src, config.geometry, config.layout)
    except ValueError as exc:
        raise DataError(f"{src}: {exc}") from exc

    padded, orig_nz = pad_depth(volume, 2 ** config.params.max_level)
    try:
        result = segment_choroid(padded, config.params, backend=config.backend)
    except (PipelineStageError, InfeasibleProblemError) as exc:
        raise RuntimeError(f"{src}: {exc}") from exc

    zmax = float(orig_nz - 1)
    bm_h = np.minimum(result.bm.heights, zmax)
    csi_h = np.minimum(result.csi.heights, zmax)
    smooth_h = np.minimum(result.csi_smoothed.heights, zmax)
    thickness = np.maximum(smooth_h - bm_h, 0.0) * config.geometry.spacing_z_um
    foveal = mean_thickness_in_circle(thickness, config.geometry,
                                      config.radius_mm)

    target = Path(config.out_dir) / src.stem
    with _staged_dir(target) as tmp:
        write_surface_csv(tmp / "bm.csv", Surface(0, bm_h))
        write_surface_csv(tmp / "csi.csv", Surface(0, csi_h))
        write_surface_csv(tmp / "csi_smoothed.csv", Surface(0, smooth_h))
        _grid_csv(tmp / "thickness_um.csv", thickness)
        summary = {
            "segment.foveal_mean_thickness_um": repr(float(foveal)),
            "segment.radius_mm": repr(float(config.radius_mm)),
            "segment.thickness_mean_um": repr(float(thickness.mean())),
            "segment.thickness_min_um": repr(float(thickness.min())),
            "segment.thickness_max_um": repr(float(thickness.max())),
            "segment.n_columns": str(thickness.size),
        }
        _write_kv_file(tmp / "summary.txt", summary)
        prov = result.provenance
        meta = {
            "meta.package_version": __version__,
            "meta.backend": str(prov["backend"]),
            "meta.numpy_version": np.__version__,
            "meta.peak_rss_mb": repr(float(prov["peak_rss_mb"])),
            "meta.padded_nz": str(padded.geometry.nz),
            "meta.original_nz": str(orig_nz),
        }
        for stage, seconds in prov["timings_s"].items():
            meta[f"meta.time_{stage}_s"] = repr(float(seconds))
        for stage, nodes in prov["graph_nodes"].items():
            meta[f"meta.nodes_{stage}"] = str(nodes)
        _write_kv_file(tmp / "run_metadata.txt", meta)
        _write_kv_file(tmp / "resolved.cfg", config.to_kv())


def _segment_worker(payload: tuple[RunConfig, str]) -> tuple[str, int, str]:
    config, input_path = payload
    try:
        _segment_one(config, input_path)
        return input_path, EXIT_OK, ""
    except DataError as exc:
        return input_path, EXIT_DATA, str(exc)
    except (RuntimeError, ValueError) as exc:
        return input_path, EXIT_INTERNAL, str(exc)


def cmd_segment(config: RunConfig) -> int:
    if not config.inputs:
        raise UsageError("segment needs at least one input volume")
    stems = [Path(p).stem for p in config.inputs]
    if len(set(stems)) != len(stems):
        raise UsageError("input volumes must have distinct file stems")
    payloads = [(config, p) for p in config.inputs]
    if config.jobs == 1 or len(payloads) == 1:
        results = [_segment_worker(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_segment_worker, payloads))
    status = EXIT_OK
    for input_path, code, message in results:
        if code == EXIT_OK:
            logger.info("segmented %s", input_path)
        else:
            print(f"error: {message}", file=sys.stderr)
            status = max(status, code)
    return status


def cmd_phantom(config: RunConfig) -> int:
    try:
        spec = default_phantom_spec(seed=config.seed, speckle=config.speckle,
                                    with_vessels=config.with_vessels,
                                    csi_base_um=config.csi_base_um)
        spec = dataclasses.replace(spec, geometry=config.geometry)
        volume, truth = generate_phantom(spec)
    except ValueError as exc:
        raise DataError(f"phantom spec rejected: {exc}") from exc
    target = Path(config.out_dir)
    with _staged_dir(target) as tmp:
        write_raw_volume(tmp / "volume.raw", volume, config.layout)
        for name, surface in truth.as_dict().items():
            write_surface_csv(tmp / f"truth_{name}.csv", surface)
        _write_kv_file(tmp / "resolved.cfg", config.to_kv())
    return EXIT_OK


def _read_surface(path: str) -> Surface:
    p = Path(path)
    if not p.exists():
        raise DataError(f"surface file not found: {p}")
    try:
        return read_surface_csv(p)
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def _bscan_mask(config: RunConfig, shape: tuple[int, int]) -> np.ndarray | None:
    if config.mask_bscans is None:
        return None
    nx, ny = shape
    bad = [i for i in config.mask_bscans if i < 0 or i >= ny]
    if bad:
        raise DataError(f"--mask-bscans indices out of range [0, {ny - 1}]: "
                        f"{','.join(str(b) for b in bad)}")
    mask = np.zeros(shape, dtype=bool)
    mask[:, list(config.mask_bscans)] = True
    return mask


def cmd_eval(config: RunConfig, test_bm: str, test_csi: str,
             ref_bm: str | None, ref_csi: str | None,
             grader_files: tuple[str, str, str, str] | None) -> int:
    t_bm = _read_surface(test_bm)
    t_csi = _read_surface(test_csi)
    graders_used = grader_files is not None
    if graders_used:
        a_bm, a_csi, b_bm, b_csi = (_read_surface(p) for p in grader_files)
        try:
            r_bm = average_surfaces(a_bm, b_bm)
            r_csi = average_surfaces(a_csi, b_csi)
        except ValueError as exc:
            raise DataError(f"grader surfaces incompatible: {exc}") from exc
    else:
        r_bm = _read_surface(ref_bm)
        r_csi = _read_surface(ref_csi)

    shapes = {s.shape for s in (t_bm, t_csi, r_bm, r_csi)}
    if len(shapes) != 1:
        raise DataError(f"surface lattices differ: {sorted(shapes)}")
    if t_bm.shape != (config.geometry.nx, config.geometry.ny):
        raise DataError(
            f"surface lattice {t_bm.shape} does not match geometry "
            f"({config.geometry.nx}, {config.geometry.ny})")
    mask = _bscan_mask(config, t_bm.shape)

    geom = config.geometry
    bm_err = border_errors(SurfacePairSample(t_bm, r_bm, geom, mask))
    csi_err = border_errors(SurfacePairSample(t_csi, r_csi, geom, mask))
    try:
        th_err = thickness_errors(t_bm, t_csi, r_bm, r_csi, geom, mask)
        overlap = dice(t_bm, t_csi, r_bm, r_csi, mask)
    except ValueError as exc:
        raise DataError(str(exc)) from exc

    m = mask if mask is not None else np.ones(t_bm.shape, dtype=bool)
    t_th = (t_csi.heights[m] - t_bm.heights[m]) * geom.spacing_z_um
    r_th = (r_csi.heights[m] - r_bm.heights[m]) * geom.spacing_z_um
    cols = np.argwhere(m)
    subjects = tuple(f"{ix}_{iy}" for ix, iy in cols)
    ba = bland_altman(PairedMeasurements(subjects, t_th, r_th))

    report = {
        "eval.n_columns": str(bm_err.n_columns),
        "eval.reference": "grader_average" if graders_used else "given",
        "eval.bm_unsigned_mean_um": repr(bm_err.unsigned_mean_um),
        "eval.bm_signed_mean_um": repr(bm_err.signed_mean_um),
        "eval.bm_unsigned_sd_um": repr(bm_err.unsigned_sd_um),
        "eval.bm_signed_sd_um": repr(bm_err.signed_sd_um),
        "eval.csi_unsigned_mean_um": repr(csi_err.unsigned_mean_um),
        "eval.csi_signed_mean_um": repr(csi_err.signed_mean_um),
        "eval.csi_unsigned_sd_um": repr(csi_err.unsigned_sd_um),
        "eval.csi_signed_sd_um": repr(csi_err.signed_sd_um),
        "eval.thickness_unsigned_mean_um": repr(th_err.unsigned_mean_um),
        "eval.thickness_signed_mean_um": repr(th_err.signed_mean_um),
        "eval.thickness_unsigned_sd_um": repr(th_err.unsigned_sd_um),
        "eval.thickness_signed_sd_um": repr(th_err.signed_sd_um),
        "eval.dice": repr(overlap),
        "eval.ba_bias_um": repr(ba.bias),
        "eval.ba_loa_low_um": repr(ba.loa_low),
        "eval.ba_loa_high_um": repr(ba.loa_high),
    }
    target = Path(config.out_dir)
    with _staged_dir(target) as tmp:
        _write_kv_file(tmp / "metrics.txt", report)
        with open(tmp / "bland_altman_points.csv", "w", encoding="utf-8") as fh:
            fh.write("ix,iy,mean_um,diff_um\n")
            for (ix, iy), mean, diff in zip(cols, ba.means, ba.diffs):
                fh.write(f"{ix},{iy},{float(mean)!r},{float(diff)!r}\n")
        for name, err in (("bm", bm_err), ("csi", csi_err),
                          ("thickness", th_err)):
            with open(tmp / f"errors_{name}.csv", "w", encoding="utf-8") as fh:
                fh.write("ix,iy,signed_um\n")
                for (ix, iy), value in zip(err.columns, err.signed_um):
                    fh.write(f"{ix},{iy},{float(value)!r}\n")
        if graders_used:
            write_surface_csv(tmp / "reference_bm.csv", r_bm)
            write_surface_csv(tmp / "reference_csi.csv", r_csi)
        _write_kv_file(tmp / "resolved.cfg", config.to_kv())
    return EXIT_OK


def cmd_repro(config: RunConfig, pairs_csv: str) -> int:
    path = Path(pairs_csv)
    if not path.exists():
        raise DataError(f"paired measurements file not found: {path}")
    try:
        pairs = read_paired_csv(path)
        icc = icc_two_way_random(pairs)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    variation = cv(pairs)
    repeat = rc(pairs)
    ttest = paired_t_test(pairs)
    ba = bland_altman(pairs)

    report = {
        "repro.n_subjects": str(pairs.n),
        "repro.icc": repr(icc.icc),
        "repro.icc_ci_low": repr(icc.ci_low),
        "repro.icc_ci_high": repr(icc.ci_high),
        "repro.icc_variant": icc.variant,
        "repro.icc_degenerate": "true" if icc.degenerate else "false",
        "repro.cv_percent": repr(variation),
        "repro.rc_um": repr(repeat),
        "repro.ttest_t": repr(ttest.t),
        "repro.ttest_df": str(ttest.df),
        "repro.ttest_p": "undefined" if ttest.p is None else repr(ttest.p),
        "repro.ba_bias_um": repr(ba.bias),
        "repro.ba_loa_low_um": repr(ba.loa_low),
        "repro.ba_loa_high_um": repr(ba.loa_high),
    }
    target = Path(config.out_dir)
    with _staged_dir(target) as tmp:
        _write_kv_file(tmp / "repro_metrics.txt", report)
        with open(tmp / "bland_altman.csv", "w", encoding="utf-8") as fh:
            fh.write("subject,mean_um,diff_um\n")
            for subject, mean, diff in zip(pairs.subjects, ba.means, ba.diffs):
                fh.write(f"{subject},{float(mean)!r},{float(diff)!r}\n")
        _write_kv_file(tmp / "resolved.cfg", config.to_kv())
    return EXIT_OK


def cmd_info() -> int:
    lines = [f"choroidseg {__version__}"]
    lines.append(f"backends: {', '.join(available_backends())} "
                 f"(default: {default_backend()})")
    for name, geom in sorted(GEOMETRY_PRESETS.items()):
        lines.append(f"preset {name}: {geom.nx}x{geom.ny}x{geom.nz} voxels, "
                     f"{geom.extent_x_mm}x{geom.extent_y_mm}x"
                     f"{geom.extent_z_mm} mm")
    print("\n".join(lines))
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="choroidseg",
        description="Choroidal layer segmentation and evaluation for "
                    "macular OCT volumes.")
    parser.add_argument("--version", action="version",
                        version=f"choroidseg {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, jobs=False):
        p.add_argument("--geometry", default=None,
                       help="geometry preset (cirrus, spectralis) or a "
                            "key-value file with geometry.* entries")
        p.add_argument("--layout", default=None,
                       help="axis order of the raw file, e.g. yxz or "
                            "yxz:flip=z (default yxz)")
        p.add_argument("--params", default=None,
                       help="key-value config file; flags override it")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out-dir", default="out")
        p.add_argument("--backend", choices=("compiled", "python"),
                       default=None)
        p.add_argument("-v", "--verbose", action="count", default=0)
        if jobs:
            p.add_argument("--jobs", type=int, default=None,
                           help="worker processes for batch runs "
                                "(default 1)")

    p_seg = sub.add_parser("segment", help="segment raw OCT volumes")
    p_seg.add_argument("inputs", nargs="+", metavar="VOLUME.raw")
    p_seg.add_argument("--radius-mm", type=float, default=None,
                       help="foveal circle radius for the summary "
                            "(default 3.0)")
    common(p_seg, jobs=True)

    p_ph = sub.add_parser("phantom", help="generate a synthetic volume "
                                          "with ground truth")
    p_ph.add_argument("--speckle", type=float, default=None)
    p_ph.add_argument("--vessels", action="store_true", default=None)
    p_ph.add_argument("--csi-base-um", type=float, default=None)
    common(p_ph)

    p_ev = sub.add_parser("eval", help="accuracy metrics against a "
                                       "reference or two graders")
    p_ev.add_argument("--test-bm", required=True)
    p_ev.add_argument("--test-csi", required=True)
    p_ev.add_argument("--ref-bm")
    p_ev.add_argument("--ref-csi")
    p_ev.add_argument("--grader1-bm")
    p_ev.add_argument("--grader1-csi")
    p_ev.add_argument("--grader2-bm")
    p_ev.add_argument("--grader2-csi")
    p_ev.add_argument("--mask-bscans", default=None,
                      help="comma-separated B-scan (y) indices to evaluate, "
                           "e.g. 50,100,150")
    common(p_ev)

    p_rp = sub.add_parser("repro", help="repeatability statistics from "
                                        "paired measurements")
    p_rp.add_argument("pairs_csv", metavar="PAIRS.csv",
                      help="CSV with header subject,m1,m2")
    common(p_rp)

    sub.add_parser("info", help="show version, backends and presets")
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    if args.subcommand == "info":
        return cmd_info()

    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    config = _build_config(args)
    if args.subcommand == "segment":
        return cmd_segment(config)
    if args.subcommand == "phantom":
        over = {}
        if args.speckle is not None:
            over["speckle"] = args.speckle
        if args.vessels:
            over["with_vessels"] = True
        if args.csi_base_um is not None:
            over["csi_base_um"] = args.csi_base_um
        if over:
            config = dataclasses.replace(config, **over)
        return cmd_phantom(config)
    if args.subcommand == "eval":
        have_ref = args.ref_bm is not None and args.ref_csi is not None
        grader_args = (args.grader1_bm, args.grader1_csi,
                       args.grader2_bm, args.grader2_csi)
        have_graders = all(g is not None for g in grader_args)
        if any(g is not None for g in grader_args) and not have_graders:
            raise UsageError("grader mode needs all four --grader*-bm/csi files")
        if have_ref == have_graders:
            raise UsageError("give either --ref-bm/--ref-csi or all four "
                             "grader files")
        return cmd_eval(config, args.test_bm, args.test_csi,
                        args.ref_bm, args.ref_csi,
                        grader_args if have_graders else None)
    if args.subcommand == "repro":
        return cmd_repro(config, args.pairs_csv)
    raise UsageError(f"unknown subcommand {args.subcommand!r}")


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems; 0 for --help/--version
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        return _dispatch(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (PipelineStageError, InfeasibleProblemError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
