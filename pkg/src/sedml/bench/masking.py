"""MCAR cell masking for imputation ground truth."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..datamodel import DataError, DataMatrix

DEFAULT_RATES = (0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65)


class RateTooHighError(DataError):
    pass


@dataclass(frozen=True)
class MaskingProtocol:
    rates: tuple[float, ...] = DEFAULT_RATES
    repeats: int = 10
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if not self.rates:
            raise ValueError("at least one missing rate is required")
        if any(not 0 < r < 1 for r in self.rates):
            raise ValueError(f"missing rates must lie in (0, 1), got {self.rates}")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")

    def mask_seed(self, rate: float, repeat: int) -> np.random.SeedSequence:
        # keyed by the rate value so a rate's masks do not depend on the rest of the grid
        return np.random.SeedSequence(self.seed, spawn_key=(int(round(rate * 10_000)), repeat))


@dataclass(frozen=True)
class HiddenCells:
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return self.rows.size


def mask_cells(complete: DataMatrix, rate: float, seed, max_attempts: int = 1000):
    """Hide ``floor(rate * n_cells)`` uniformly chosen cells.

    Draws that would leave a column without observations are rejected and
    redrawn.  ``seed`` may be an int or a ``SeedSequence``.

    Returns
    -------
    masked : DataMatrix
    hidden : HiddenCells
        Row, column and true value of every hidden cell, in row-major order.
    """
    if not complete.is_complete:
        raise DataError("masking needs a fully observed matrix")
    n, p = complete.shape
    n_hide = math.floor(rate * n * p + 1e-9)
    if n_hide < 1:
        raise DataError(f"rate {rate} hides no cells of a {n}x{p} matrix")
    if n_hide > n * p - p:
        raise RateTooHighError(f"rate {rate} cannot leave one observation per column in a {n}x{p} matrix")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        flat = np.sort(rng.choice(n * p, size=n_hide, replace=False))
        mask = np.ones(n * p, dtype=bool)
        mask[flat] = False
        mask = mask.reshape(n, p)
        if mask.any(axis=0).all():
            break
    else:
        raise RateTooHighError(f"no admissible mask found for rate {rate} after {max_attempts} draws")
    rows, cols = np.divmod(flat, p)
    hidden = HiddenCells(rows, cols, complete.values[rows, cols].copy())
    return complete.with_values(complete.values, mask), hidden
