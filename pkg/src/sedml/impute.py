"""Missing-value imputation: column mean, kNN, iterative SVD and round-robin regression.

Every imputer returns a fully observed :class:`DataMatrix` and copies the
observed cells of its input through untouched.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .datamodel import DataMatrix
from .errors import ConvergenceWarning
from .regressors import make_regressor


class ImputationError(ValueError):
    pass


class AllMissingColumnError(ImputationError):
    def __init__(self, col: str):
        super().__init__(f"column {col!r} has no observed values")
        self.col = col


class KTooLargeError(ImputationError):
    pass


class RankTooLargeError(ImputationError):
    pass


class Method(str, enum.Enum):
    MEAN = "Mean"
    KNN = "KNN"
    SVD = "SVD"
    ITERATIVE = "Iterative"


class Estimator(str, enum.Enum):
    BAYESIAN_RIDGE = "BayesianRidge"
    DECISION_TREE = "DecisionTree"
    EXTRA_TREES = "ExtraTrees"


def _coerce(enum_cls, value):
    if isinstance(value, enum_cls):
        return value
    for member in enum_cls:
        if str(value).lower() in (member.value.lower(), member.name.lower()):
            return member
    raise ValueError(f"{value!r} is not a valid {enum_cls.__name__}")


@dataclass(frozen=True)
class ImputerSpec:
    """Imputer choice and knobs.

    ``rank=None`` picks the smallest rank holding 90% of the squared
    singular-value mass of the mean-filled matrix.  ``tolerance`` is measured
    on a scale-free basis: RMS change over the observed RMS for SVD,
    max change in standardised units for the iterative imputer.
    """

    method: Method = Method.MEAN
    k: int = 5
    rank: int | None = None
    estimator: Estimator = Estimator.BAYESIAN_RIDGE
    n_trees: int = 10
    max_rounds: int = 10
    tolerance: float = 1e-3
    seed: int = 0
    energy: float = 0.9

    def __post_init__(self):
        object.__setattr__(self, "method", _coerce(Method, self.method))
        object.__setattr__(self, "estimator", _coerce(Estimator, self.estimator))
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.rank is not None and self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")

    @property
    def label(self) -> str:
        m = self.method
        if m is Method.KNN:
            return f"kNN(k={self.k})"
        if m is Method.SVD:
            return "SVD" if self.rank is None else f"SVD(rank={self.rank})"
        if m is Method.ITERATIVE:
            if self.estimator is Estimator.EXTRA_TREES:
                return f"Iterative-ExtraTrees(n={self.n_trees})"
            return f"Iterative-{self.estimator.value}"
        return "Mean"

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "k": self.k,
            "rank": self.rank,
            "estimator": self.estimator.value,
            "n_trees": self.n_trees,
            "max_rounds": self.max_rounds,
            "tolerance": self.tolerance,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ImputerSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown imputer fields: {sorted(unknown)}")
        return cls(**d)


def _check_columns(data: DataMatrix) -> None:
    for j, name in enumerate(data.col_names):
        if not data.mask[:, j].any():
            raise AllMissingColumnError(name)


def column_means(data: DataMatrix) -> np.ndarray:
    _check_columns(data)
    X = np.where(data.mask, data.values, 0.0)
    return X.sum(axis=0) / data.mask.sum(axis=0)


def _finish(data: DataMatrix, filled: np.ndarray) -> DataMatrix:
    out = np.where(data.mask, data.values, filled)
    return data.with_values(out)


def impute_mean(data: DataMatrix) -> DataMatrix:
    means = column_means(data)
    return _finish(data, np.broadcast_to(means, data.shape))


# ---------------------------------------------------------------- kNN

def masked_distances(values: np.ndarray, mask: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Pairwise Euclidean distance over mutually observed coordinates.

    The squared sum is rescaled by ``n_cols / n_common``; pairs with nothing
    in common get ``inf``.
    """
    n, p = values.shape
    X = np.where(mask, values, 0.0)
    M = mask.astype(np.float64)
    out = np.empty((n, n))
    for start in range(0, n, chunk):
        sl = slice(start, min(start + chunk, n))
        diff = X[sl, None, :] - X[None, :, :]
        both = M[sl, None, :] * M[None, :, :]
        sq = np.einsum("ijk,ijk->ij", diff * diff, both)
        common = both.sum(axis=2)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.sqrt(sq * (p / common))
        d[common == 0] = np.inf
        out[sl] = d
    return out


def impute_knn(data: DataMatrix, spec: ImputerSpec) -> DataMatrix:
    if spec.k > data.n_rows - 1:
        raise KTooLargeError(f"k={spec.k} exceeds n_rows - 1 = {data.n_rows - 1}")
    means = column_means(data)
    if data.is_complete:
        return data
    D = masked_distances(data.values, data.mask)
    np.fill_diagonal(D, np.inf)
    filled = np.array(data.values, dtype=np.float64)
    for i in np.flatnonzero(~data.mask.all(axis=1)):
        # stable sort: equal distances keep ascending row order
        order = np.argsort(D[i], kind="stable")
        order = order[np.isfinite(D[i, order])]
        for j in np.flatnonzero(~data.mask[i]):
            donors = order[data.mask[order, j]][: spec.k]
            filled[i, j] = data.values[donors, j].mean() if donors.size else means[j]
    return _finish(data, filled)


# ---------------------------------------------------------------- SVD

@dataclass(frozen=True)
class SVDInfo:
    rank: int
    n_iter: int
    converged: bool
    last_change: float


def energy_rank(X: np.ndarray, energy: float = 0.9) -> int:
    s2 = np.linalg.svd(X, compute_uv=False) ** 2
    if s2.sum() == 0:
        return 1
    cum = np.cumsum(s2) / s2.sum()
    return int(np.searchsorted(cum, energy - 1e-12) + 1)


def impute_svd(data: DataMatrix, spec: ImputerSpec, return_info: bool = False):
    """Hard-impute by repeated truncated SVD.

    Missing cells start at their column means and are overwritten with the
    rank-``r`` reconstruction until the relative RMS change on those cells
    drops below ``spec.tolerance``.  Hitting ``max_rounds`` only warns.
    """
    max_rank = min(data.shape)
    if spec.rank is not None and spec.rank > max_rank:
        raise RankTooLargeError(f"rank={spec.rank} exceeds min(n_rows, n_cols) = {max_rank}")
    means = column_means(data)
    X = np.where(data.mask, data.values, means)
    rank = spec.rank if spec.rank is not None else energy_rank(X, spec.energy)
    missing = ~data.mask
    if not missing.any() or rank == max_rank:
        # full-rank reconstruction is lossless: the fixed point is the start
        info = SVDInfo(rank, 0, True, 0.0)
        out = data if not missing.any() else data.with_values(X)
        return (out, info) if return_info else out

    scale = np.sqrt(np.mean(data.values[data.mask] ** 2)) or 1.0
    converged, change, it = False, np.inf, 0
    for it in range(1, spec.max_rounds + 1):
        U, S, Vt = np.linalg.svd(X, full_matrices=False)
        recon = (U[:, :rank] * S[:rank]) @ Vt[:rank]
        delta = recon[missing] - X[missing]
        X[missing] = recon[missing]
        change = float(np.sqrt(np.mean(delta**2)) / scale)
        if change < spec.tolerance:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"SVD imputation stopped after {spec.max_rounds} rounds (change {change:.3g})",
            ConvergenceWarning,
            stacklevel=2,
        )
    out = _finish(data, X)
    info = SVDInfo(rank, it, converged, change)
    return (out, info) if return_info else out


# ---------------------------------------------------------------- iterative

@dataclass(frozen=True)
class IterativeInfo:
    n_rounds: int
    converged: bool
    last_change: float
    order: tuple[int, ...] = field(default=())


def impute_iterative(data: DataMatrix, spec: ImputerSpec, return_info: bool = False):
    """Round-robin regression imputation on standardised columns.

    Columns with missing entries are visited in descending missing-count
    order (ties by position).  Each is regressed on all other columns at
    their current values.  Stops when the largest change of an imputed cell,
    in standard-deviation units, falls below ``spec.tolerance``.
    """
    means = column_means(data)
    missing = ~data.mask
    if not missing.any():
        info = IterativeInfo(0, True, 0.0)
        return (data, info) if return_info else data
    if data.n_cols < 2:
        raise ImputationError("iterative imputation needs at least two columns")

    obs = np.where(data.mask, data.values, 0.0)
    counts = data.mask.sum(axis=0)
    sd = np.sqrt(np.where(data.mask, (obs - means) ** 2, 0.0).sum(axis=0) / counts)
    sd[sd == 0] = 1.0
    Z = np.where(data.mask, (obs - means) / sd, 0.0)

    n_missing = missing.sum(axis=0)
    order = [int(j) for j in np.lexsort((np.arange(data.n_cols), -n_missing)) if n_missing[j] > 0]
    root = np.random.SeedSequence(spec.seed)
    converged, change, rnd = False, np.inf, 0
    for rnd in range(1, spec.max_rounds + 1):
        before = Z[missing].copy()
        seeds = root.spawn(len(order))
        for j, ss in zip(order, seeds):
            rows = data.mask[:, j]
            others = np.r_[0:j, j + 1 : data.n_cols]
            reg = make_regressor(
                spec.estimator.value,
                n_trees=spec.n_trees,
                seed=int(ss.generate_state(1)[0]),
            )
            reg.fit(Z[rows][:, others], Z[rows, j])
            Z[~rows, j] = reg.predict(Z[~rows][:, others])
        change = float(np.max(np.abs(Z[missing] - before)))
        if change < spec.tolerance:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"iterative imputation stopped after {spec.max_rounds} rounds (change {change:.3g})",
            ConvergenceWarning,
            stacklevel=2,
        )
    out = _finish(data, Z * sd + means)
    info = IterativeInfo(rnd, converged, change, tuple(order))
    return (out, info) if return_info else out


def impute(data: DataMatrix, spec: ImputerSpec) -> DataMatrix:
    m = spec.method
    if m is Method.MEAN:
        return impute_mean(data)
    if m is Method.KNN:
        return impute_knn(data, spec)
    if m is Method.SVD:
        return impute_svd(data, spec)
    return impute_iterative(data, spec)


def impute_standardized(data: DataMatrix, spec: ImputerSpec) -> DataMatrix:
    """Run ``spec`` on z-scored columns and map the fills back.

    Column statistics come from observed cells only.  Observed cells are
    copied from the input, so they survive bitwise.
    """
    means = column_means(data)
    X = np.where(data.mask, data.values, means)
    dev = np.where(data.mask, X - means, 0.0)
    sd = np.sqrt((dev**2).sum(axis=0) / data.mask.sum(axis=0))
    sd = np.where(sd > 0, sd, 1.0)
    scaled = impute(data.with_values((X - means) / sd, data.mask), spec)
    return _finish(data, scaled.values * sd + means)
