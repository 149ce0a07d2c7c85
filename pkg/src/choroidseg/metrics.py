"""Accuracy and repeatability statistics for surface segmentations.

Accuracy side: signed/unsigned border position errors against a reference
surface, thickness errors, and a continuous per-column Dice coefficient for
the layer between two surfaces. Repeatability side: paired t test,
Bland-Altman limits of agreement, two-way random single-measure ICC with an
F-based confidence interval, coefficient of variation from duplicate
measurements, and the repeatability coefficient.

All physical quantities are in micrometres. Sample standard deviations use
the n-1 denominator throughout.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _sstats

from .pyramid import Surface
from .volume import VolumeGeometry

__all__ = [
    "SurfacePairSample",
    "PairedMeasurements",
    "BorderErrors",
    "TTestResult",
    "BlandAltmanResult",
    "IccResult",
    "average_surfaces",
    "border_errors",
    "thickness_errors",
    "dice",
    "paired_t_test",
    "bland_altman",
    "icc_two_way_random",
    "cv",
    "rc",
    "read_paired_csv",
    "write_paired_csv",
]

logger = logging.getLogger(__name__)

# ICC variant fixed to two-way random, absolute agreement, single measure
ICC_VARIANT = "ICC(2,1)"


def _as_heights(surface: Surface | np.ndarray) -> np.ndarray:
    if isinstance(surface, Surface):
        return surface.heights
    arr = np.asarray(surface, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("surface heights must be a 2-D array")
    return arr


@dataclass(frozen=True, eq=False)
class SurfacePairSample:
    """A test surface paired with its reference on one lattice.

    ``mask`` selects the columns that enter the statistics (for instance
    the few B-scans that were traced by hand); None means all columns.
    """

    test: Surface | np.ndarray
    reference: Surface | np.ndarray
    geometry: VolumeGeometry
    mask: np.ndarray | None = None

    def __post_init__(self) -> None:
        t = _as_heights(self.test)
        r = _as_heights(self.reference)
        if t.shape != r.shape:
            raise ValueError(f"surface shapes differ: {t.shape} vs {r.shape}")
        if t.shape != (self.geometry.nx, self.geometry.ny):
            raise ValueError(
                f"surface shape {t.shape} does not match geometry "
                f"({self.geometry.nx}, {self.geometry.ny})")
        if self.mask is not None:
            m = np.asarray(self.mask)
            if m.shape != t.shape:
                raise ValueError(
                    f"mask shape {m.shape} does not match surface {t.shape}")
            if not m.astype(bool).any():
                raise ValueError("mask selects no columns")

    def resolved_mask(self) -> np.ndarray:
        t = _as_heights(self.test)
        if self.mask is None:
            return np.ones(t.shape, dtype=bool)
        return np.asarray(self.mask).astype(bool)


@dataclass(frozen=True)
class PairedMeasurements:
    """Per-subject duplicate scalar measurements (um)."""

    subjects: tuple[str, ...]
    m1: np.ndarray
    m2: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.m1, dtype=np.float64)
        b = np.asarray(self.m2, dtype=np.float64)
        if a.ndim != 1 or b.ndim != 1:
            raise ValueError("measurements must be 1-D")
        if not (len(self.subjects) == a.size == b.size):
            raise ValueError("subjects, m1 and m2 must have equal length")
        if a.size < 2:
            raise ValueError("need at least two subjects")
        if not (np.isfinite(a).all() and np.isfinite(b).all()):
            raise ValueError("measurements must be finite")
        object.__setattr__(self, "subjects", tuple(str(s) for s in self.subjects))
        object.__setattr__(self, "m1", a)
        object.__setattr__(self, "m2", b)

    @property
    def n(self) -> int:
        return self.m1.size

    @property
    def diffs(self) -> np.ndarray:
        return self.m1 - self.m2


@dataclass(frozen=True)
class BorderErrors:
    """Per-column signed errors (um) plus their summary statistics.

    ``signed_um`` has one entry per evaluated column and ``columns`` the
    matching (ix, iy) indices; positive means the test value is larger
    (surface deeper, or layer thicker). Summary fields are the mean and
    sample standard deviation of the signed and unsigned errors.
    """

    signed_um: np.ndarray
    columns: np.ndarray
    signed_mean_um: float
    signed_sd_um: float
    unsigned_mean_um: float
    unsigned_sd_um: float
    n_columns: int


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p: float | None
    mean_diff: float
    degenerate: bool


@dataclass(frozen=True)
class BlandAltmanResult:
    means: np.ndarray
    diffs: np.ndarray
    bias: float
    sd_diff: float
    loa_low: float
    loa_high: float


@dataclass(frozen=True)
class IccResult:
    icc: float
    ci_low: float
    ci_high: float
    msr: float
    msc: float
    mse: float
    n_subjects: int
    n_raters: int
    degenerate: bool
    variant: str = field(default=ICC_VARIANT)


def _sd(values: np.ndarray) -> float:
    if values.size < 2:
        return float("nan")
    return float(np.std(values, ddof=1))


def _summarize(signed: np.ndarray, mask: np.ndarray) -> BorderErrors:
    unsigned = np.abs(signed)
    columns = np.argwhere(mask)
    return BorderErrors(signed_um=signed,
                        columns=columns,
                        signed_mean_um=float(signed.mean()),
                        signed_sd_um=_sd(signed),
                        unsigned_mean_um=float(unsigned.mean()),
                        unsigned_sd_um=_sd(unsigned),
                        n_columns=int(signed.size))


def average_surfaces(a: Surface, b: Surface) -> Surface:
    """Pointwise mean of two same-level, same-shape surfaces."""
    if a.level != b.level or a.shape != b.shape:
        raise ValueError("surfaces must share level and lattice")
    return Surface(a.level, (a.heights + b.heights) / 2.0)


def border_errors(sample: SurfacePairSample) -> BorderErrors:
    """Signed and unsigned border position errors in micrometres.

    Signed error per column is (z_test - z_ref) * spacing_z, so a test
    surface above the reference (smaller z) scores negative.
    """
    t = _as_heights(sample.test)
    r = _as_heights(sample.reference)
    m = sample.resolved_mask()
    signed = (t[m] - r[m]) * sample.geometry.spacing_z_um
    return _summarize(signed, m)


def thickness_errors(bm_test: Surface | np.ndarray, csi_test: Surface | np.ndarray,
                     bm_ref: Surface | np.ndarray, csi_ref: Surface | np.ndarray,
                     geometry: VolumeGeometry,
                     mask: np.ndarray | None = None) -> BorderErrors:
    """Thickness (CSI - BM) errors in micrometres, same summary as borders.

    Negative signed error means the test layer is thinner than the
    reference.
    """
    bt, ct = _as_heights(bm_test), _as_heights(csi_test)
    br, cr = _as_heights(bm_ref), _as_heights(csi_ref)
    if not (bt.shape == ct.shape == br.shape == cr.shape):
        raise ValueError("all four surfaces must share one lattice")
    if mask is None:
        m = np.ones(bt.shape, dtype=bool)
    else:
        m = np.asarray(mask)
        if m.shape != bt.shape:
            raise ValueError(f"mask shape {m.shape} does not match surface "
                             f"{bt.shape}")
        m = m.astype(bool)
        if not m.any():
            raise ValueError("mask selects no columns")
    signed = ((ct[m] - bt[m]) - (cr[m] - br[m])) * geometry.spacing_z_um
    return _summarize(signed, m)


def dice(top_a: Surface | np.ndarray, bottom_a: Surface | np.ndarray,
         top_b: Surface | np.ndarray, bottom_b: Surface | np.ndarray,
         mask: np.ndarray | None = None) -> float:
    """Continuous Dice overlap of two layers given by bounding surfaces.

    Each column contributes the interval [top, bottom] in voxel units;
    the coefficient is 2 * sum(|A inter B|) / (sum |A| + sum |B|) over the
    masked columns. Requires bottom >= top everywhere. Two empty layers are
    identical, so the value is 1.0 (with a warning, it carries no signal).
    """
    ta, ba = _as_heights(top_a), _as_heights(bottom_a)
    tb, bb = _as_heights(top_b), _as_heights(bottom_b)
    if not (ta.shape == ba.shape == tb.shape == bb.shape):
        raise ValueError("all four surfaces must share one lattice")
    if (ba < ta).any() or (bb < tb).any():
        raise ValueError("bottom surface must not lie above the top surface")
    if mask is None:
        m = np.ones(ta.shape, dtype=bool)
    else:
        m = np.asarray(mask).astype(bool)
        if m.shape != ta.shape:
            raise ValueError("mask shape does not match the surfaces")
        if not m.any():
            raise ValueError("mask selects no columns")
    inter = np.minimum(ba[m], bb[m]) - np.maximum(ta[m], tb[m])
    inter = np.maximum(inter, 0.0)
    total = (ba[m] - ta[m]).sum() + (bb[m] - tb[m]).sum()
    if total == 0.0:
        warnings.warn("both layers are empty; Dice defined as 1.0",
                      stacklevel=2)
        return 1.0
    return float(2.0 * inter.sum() / total)


def paired_t_test(pairs: PairedMeasurements) -> TTestResult:
    """Two-sided paired t test on the per-subject differences.

    With zero variance of the differences the statistic is undefined; the
    result is flagged degenerate and ``p`` is None (t is +/-inf for a
    nonzero mean difference, 0 for all-zero differences).
    """
    d = pairs.diffs
    n = d.size
    mean = float(d.mean())
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        t = 0.0 if mean == 0.0 else float(np.copysign(np.inf, mean))
        return TTestResult(t=t, df=n - 1, p=None, mean_diff=mean,
                           degenerate=True)
    t = mean / (sd / np.sqrt(n))
    p = 2.0 * _sstats.t.sf(abs(t), n - 1)
    return TTestResult(t=float(t), df=n - 1, p=float(p), mean_diff=mean,
                       degenerate=False)


def bland_altman(pairs: PairedMeasurements) -> BlandAltmanResult:
    """Bland-Altman agreement: per-pair means/differences and 95% limits."""
    means = (pairs.m1 + pairs.m2) / 2.0
    diffs = pairs.diffs
    bias = float(diffs.mean())
    sd = float(np.std(diffs, ddof=1))
    return BlandAltmanResult(means=means, diffs=diffs, bias=bias, sd_diff=sd,
                             loa_low=bias - 1.96 * sd,
                             loa_high=bias + 1.96 * sd)


def icc_two_way_random(pairs: PairedMeasurements,
                       alpha: float = 0.05) -> IccResult:
    """ICC(2,1): two-way random effects, absolute agreement, single measure.

    The confidence interval follows the standard F-based construction with
    Satterthwaite degrees of freedom; the MSE == 0 case uses its analytic
    limit v = (n-1)(k-1). When between-subject variance vanishes, agreement
    cannot be distinguished from noise and the coefficient is 0 by
    convention (warned).
    """
    if pairs.n < 3:
        raise ValueError("need at least 3 subjects")
    x = np.stack([pairs.m1, pairs.m2], axis=1)
    n, k = x.shape
    row_means = x.mean(axis=1)
    col_means = x.mean(axis=0)
    grand = x.mean()
    msr = k * float(np.square(row_means - grand).sum()) / (n - 1)
    msc = n * float(np.square(col_means - grand).sum()) / (k - 1)
    ss_total = float(np.square(x - grand).sum())
    mse = (ss_total - msr * (n - 1) - msc * (k - 1)) / ((n - 1) * (k - 1))
    mse = max(mse, 0.0)

    denom = msr + (k - 1) * mse + (k / n) * (msc - mse)
    if denom <= 0.0 or msr <= mse:
        warnings.warn("no between-subject variance; ICC defined as 0",
                      stacklevel=2)
        return IccResult(icc=0.0, ci_low=0.0, ci_high=0.0, msr=msr, msc=msc,
                         mse=mse, n_subjects=n, n_raters=k, degenerate=True)
    icc = (msr - mse) / denom

    if mse == 0.0:
        v = float((n - 1) * (k - 1))
    else:
        fj = msc / mse
        vn = ((k - 1) * (n - 1)
              * (k * icc * fj + n * (1 + (k - 1) * icc) - k * icc) ** 2)
        vd = ((n - 1) * k ** 2 * icc ** 2 * fj ** 2
              + (n * (1 + (k - 1) * icc) - k * icc) ** 2)
        v = vn / vd
    f_l = _sstats.f.ppf(1 - alpha / 2, n - 1, v)
    f_u = _sstats.f.ppf(1 - alpha / 2, v, n - 1)
    ci_low = (n * (msr - f_l * mse)
              / (f_l * (k * msc + (k * n - k - n) * mse) + n * msr))
    ci_high = (n * (f_u * msr - mse)
               / (k * msc + (k * n - k - n) * mse + n * f_u * msr))
    return IccResult(icc=float(icc), ci_low=float(ci_low),
                     ci_high=float(ci_high), msr=msr, msc=msc, mse=mse,
                     n_subjects=n, n_raters=k, degenerate=False)


def cv(pairs: PairedMeasurements) -> float:
    """Mean within-subject coefficient of variation, in percent.

    Per subject the two-point standard deviation is |m1 - m2| / sqrt(2) and
    the CV is that over the subject mean. Subjects with zero mean have no
    defined CV and are excluded with a warning.
    """
    means = (pairs.m1 + pairs.m2) / 2.0
    sds = np.abs(pairs.diffs) / np.sqrt(2.0)
    ok = means != 0.0
    if not ok.all():
        warnings.warn(f"{int((~ok).sum())} subject(s) with zero mean excluded "
                      f"from the CV", stacklevel=2)
    if not ok.any():
        raise ValueError("no subject has a nonzero mean")
    return float((sds[ok] / np.abs(means[ok])).mean() * 100.0)


def rc(pairs: PairedMeasurements) -> float:
    """Repeatability coefficient: 1.96 times the sample SD of differences."""
    return float(1.96 * np.std(pairs.diffs, ddof=1))


def write_paired_csv(path, pairs: PairedMeasurements) -> None:
    """Write repeated measurements as ``subject,m1,m2`` rows with a header."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("subject,m1,m2\n")
        for name, x, y in zip(pairs.subjects, pairs.m1, pairs.m2):
            if "," in name or "\n" in name:
                raise ValueError(f"subject id {name!r} contains a delimiter")
            fh.write(f"{name},{float(x)!r},{float(y)!r}\n")


def read_paired_csv(path) -> PairedMeasurements:
    """Read ``subject,m1,m2`` rows; malformed lines report their number."""
    subjects: list[str] = []
    first: list[float] = []
    second: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "subject,m1,m2":
        raise ValueError(f"{path}: line 1: expected header 'subject,m1,m2'")
    for idx, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ValueError(f"{path}: line {idx}: expected 3 fields, "
                             f"got {len(parts)}")
        name, s1, s2 = (p.strip() for p in parts)
        try:
            v1, v2 = float(s1), float(s2)
        except ValueError:
            raise ValueError(f"{path}: line {idx}: measurements must be "
                             f"numbers, got {s1!r}, {s2!r}") from None
        if not (np.isfinite(v1) and np.isfinite(v2)):
            raise ValueError(f"{path}: line {idx}: measurements must be finite")
        subjects.append(name)
        first.append(v1)
        second.append(v2)
    if len(subjects) < 2:
        raise ValueError(f"{path}: need at least two data rows")
    return PairedMeasurements(subjects=tuple(subjects),
                              m1=np.asarray(first), m2=np.asarray(second))
