"""Thin plate spline interpolation of scattered surface heights.

Exact interpolation with kernel U(r) = r^2 * log(r^2) plus an affine part.
The fitted spline minimizes bending energy among all interpolants, so plane
data is reproduced exactly. Coordinates are rescaled to a unit box before
solving purely for conditioning; uniform coordinate scaling does not change
the interpolant (the kernel's extra r^2*log(c) term is quadratic with
coefficients annihilated by the side conditions sum(w) = sum(w*x) =
sum(w*y) = 0, up to a constant absorbed by the affine part).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ThinPlateSpline", "fit_tps", "evaluate_tps"]


def _kernel(r2: np.ndarray) -> np.ndarray:
    # U(r) = r^2 * log(r^2), continuously extended by U(0) = 0
    out = np.zeros_like(r2)
    np.log(r2, out=out, where=r2 > 0)
    return r2 * out


@dataclass(frozen=True, eq=False)
class ThinPlateSpline:
    """Fitted spline: evaluate with :meth:`__call__` at (n, 2) points."""

    points: np.ndarray       # (n, 2) control coordinates, original units
    weights: np.ndarray      # (n,) kernel weights
    affine: np.ndarray       # (3,) constant, x, y coefficients
    scale: float             # unit-box conditioning factor used during fit
    origin: np.ndarray       # (2,) coordinate shift used during fit

    def __call__(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=np.float64)
        squeeze = xy.ndim == 1
        pts = np.atleast_2d(xy)
        if pts.shape[1] != 2:
            raise ValueError(f"query points must be (n, 2), got {xy.shape}")
        q = (pts - self.origin) / self.scale
        p = (self.points - self.origin) / self.scale
        d2 = ((q[:, None, :] - p[None, :, :]) ** 2).sum(axis=2)
        values = (_kernel(d2) @ self.weights
                  + self.affine[0] + q @ self.affine[1:])
        return values[0] if squeeze else values


def fit_tps(points: np.ndarray, values: np.ndarray) -> ThinPlateSpline:
    """Fit an exact-interpolation thin plate spline to (x, y) -> z data.

    ``points`` is (n, 2) in any consistent physical unit, ``values`` (n,).
    Requires n >= 3 points not all on one line; degenerate geometry makes
    the system singular and is rejected.
    """
    points = np.asarray(points, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError(f"points must be (n, 2), got {points.shape}")
    n = points.shape[0]
    if values.shape != (n,):
        raise ValueError(f"values must be ({n},), got {values.shape}")
    if n < 3:
        raise ValueError(f"need at least 3 control points, got {n}")
    if not (np.all(np.isfinite(points)) and np.all(np.isfinite(values))):
        raise ValueError("control points and values must be finite")

    origin = points.min(axis=0)
    span = float((points.max(axis=0) - origin).max())
    scale = span if span > 0 else 1.0
    p = (points - origin) / scale

    # LU can return a finite "solution" for exactly collinear points (the
    # interpolation conditions are still satisfiable along the line), so
    # degeneracy needs its own check
    singvals = np.linalg.svd(p - p.mean(axis=0), compute_uv=False)
    if singvals[1] <= 1.0e-9 * max(singvals[0], 1.0):
        raise ValueError("control points are collinear or duplicated; "
                         "thin plate spline system is singular")

    d2 = ((p[:, None, :] - p[None, :, :]) ** 2).sum(axis=2)
    system = np.zeros((n + 3, n + 3), dtype=np.float64)
    system[:n, :n] = _kernel(d2)
    system[:n, n] = 1.0
    system[:n, n + 1:] = p
    system[n, :n] = 1.0
    system[n + 1:, :n] = p.T
    rhs = np.concatenate([values, np.zeros(3)])
    try:
        solution = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise ValueError("control points are collinear or duplicated; "
                         "thin plate spline system is singular") from exc
    if not np.all(np.isfinite(solution)):
        raise ValueError("thin plate spline system is numerically singular")
    fitted = system[:n] @ solution
    tolerance = 1.0e-6 * max(1.0, float(np.abs(values).max()))
    if np.abs(fitted - values).max() > tolerance:
        # solve() only raises on exact singularity; catch near-singular fits
        raise ValueError("control points are (nearly) collinear; "
                         "thin plate spline fit failed to interpolate")
    return ThinPlateSpline(points=points.copy(), weights=solution[:n],
                           affine=solution[n:], scale=scale, origin=origin)


def evaluate_tps(model: ThinPlateSpline, x, y):
    """Spline height at (x, y); scalars in give a scalar back."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    scalar = x.ndim == 0 and y.ndim == 0
    queries = np.stack(np.broadcast_arrays(x, y), axis=-1).reshape(-1, 2)
    out = model(queries)
    if scalar:
        return float(out[0])
    return out.reshape(np.broadcast_shapes(x.shape, y.shape))
