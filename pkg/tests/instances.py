"""Random banded multi-surface instances small enough to enumerate."""

from __future__ import annotations

import numpy as np


def random_instance(rng: np.random.Generator, *, max_surfaces: int = 3,
                    max_side: int = 3, max_nz: int = 6,
                    budget: int = 200_000):
    """Draw (costs, lo, hi, delta_x, delta_y, separations) with the total
    assignment count under ``budget`` so exhaustive enumeration stays cheap.

    Costs are integers on the 1e-4 grid divided back out, so the solver's
    quantization is exactly invertible and totals can be compared as ints.
    """
    while True:
        n_surf = int(rng.integers(1, max_surfaces + 1))
        nx = int(rng.integers(1, max_side + 1))
        ny = int(rng.integers(1, max_side + 1))
        nz = int(rng.integers(2, max_nz + 1))
        lo = rng.integers(0, nz, size=(nx, ny))
        width = rng.integers(1, nz + 1, size=(nx, ny))
        hi = np.minimum(lo + width - 1, nz - 1)
        count = float(np.prod((hi - lo + 1).astype(float)) ** n_surf)
        if count > budget:
            continue
        quantized = rng.integers(0, 10_000, size=(n_surf, nx, ny, nz))
        costs = quantized.astype(np.float64) / 1.0e4
        delta_x = int(rng.integers(0, 3))
        delta_y = int(rng.integers(0, 3))
        separations = []
        for _ in range(n_surf - 1):
            gmin = int(rng.integers(0, 3))
            gmax = gmin + int(rng.integers(0, nz))
            separations.append((gmin, gmax))
        return (costs, quantized, lo, hi, delta_x, delta_y,
                tuple(separations))
