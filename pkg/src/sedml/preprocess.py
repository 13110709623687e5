"""Feature scaling and SMOTE oversampling."""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .datamodel import DataError, DataMatrix, LabeledDataset


class ScaleMode(str, enum.Enum):
    ZSCORE = "ZScore"
    MINMAX = "MinMax"
    CENTER = "Center"


class ConstantColumnWarning(UserWarning):
    pass


class SingletonClassError(DataError):
    def __init__(self, label: str):
        super().__init__(f"class {label!r} has a single member and cannot be oversampled")
        self.label = label


@dataclass(frozen=True, eq=False)
class ScalerParams:
    mode: ScaleMode
    means: np.ndarray
    stds: np.ndarray
    mins: np.ndarray
    maxs: np.ndarray

    def _offset_scale(self):
        if self.mode is ScaleMode.ZSCORE:
            return self.means, self.stds
        if self.mode is ScaleMode.MINMAX:
            return self.mins, self.maxs - self.mins
        return self.means, np.ones_like(self.means)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "mins": self.mins.tolist(),
            "maxs": self.maxs.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerParams":
        return cls(
            ScaleMode(d["mode"]),
            *(np.asarray(d[k], dtype=np.float64) for k in ("means", "stds", "mins", "maxs")),
        )


def fit_scaler(data: DataMatrix, mode=ScaleMode.ZSCORE) -> ScalerParams:
    if not data.is_complete:
        raise DataError("scaler needs a fully observed matrix")
    mode = ScaleMode(mode)
    X = data.values
    lo, hi = X.min(axis=0), X.max(axis=0)
    # a constant column can show a roundoff-sized std; pin it to zero
    std = np.where(hi > lo, X.std(axis=0), 0.0)
    return ScalerParams(mode, X.mean(axis=0), std, lo, hi)


def apply_scaler(data: DataMatrix, params: ScalerParams) -> DataMatrix:
    offset, scale = params._offset_scale()
    if data.n_cols != offset.size:
        raise DataError(f"scaler fitted on {offset.size} columns, got {data.n_cols}")
    const = scale == 0
    if const.any() and params.mode is not ScaleMode.CENTER:
        names = [data.col_names[j] for j in np.flatnonzero(const)]
        warnings.warn(f"constant columns mapped to zero: {names}", ConstantColumnWarning, stacklevel=2)
    safe = np.where(const, 1.0, scale)
    out = np.where(const, 0.0, (data.values - offset) / safe)
    return data.with_values(out, data.mask)


def invert_scaler(data: DataMatrix, params: ScalerParams) -> DataMatrix:
    offset, scale = params._offset_scale()
    # constant columns collapse to their single training value
    return data.with_values(data.values * np.where(scale == 0, 0.0, scale) + offset, data.mask)


# ---------------------------------------------------------------- SMOTE

@dataclass(frozen=True)
class SmoteSpec:
    """``target`` is ``"balance"`` (grow every class to the majority count) or
    a mapping of class -> desired count."""

    k_neighbors: int = 5
    target: str | dict = "balance"
    seed: int = 0
    per_coordinate: bool = False

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if isinstance(self.target, str) and self.target not in ("balance", "balance-to-majority"):
            raise ValueError(f"unknown SMOTE target {self.target!r}")


@dataclass(frozen=True, eq=False)
class SmoteResult:
    dataset: LabeledDataset
    seed_index: np.ndarray  # row of the original dataset each synthetic row grew from
    neighbor_index: np.ndarray
    gap: np.ndarray  # (n_new, 1) or (n_new, n_features)


def _targets(counts: dict[str, int], spec: SmoteSpec) -> dict[str, int]:
    if isinstance(spec.target, str):
        top = max(counts.values())
        return {c: top for c in counts}
    targets = dict(counts)
    for c, t in spec.target.items():
        if c not in counts:
            raise DataError(f"SMOTE target for unknown class {c!r}")
        if t < counts[c]:
            raise ValueError(f"target {t} for class {c!r} is below its current count {counts[c]}")
        targets[c] = int(t)
    return targets


def _k_nearest(X: np.ndarray, k: int) -> np.ndarray:
    d = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d, np.inf)
    return np.argsort(d, axis=1, kind="stable")[:, :k]


def smote_with_provenance(data: LabeledDataset, spec: SmoteSpec = SmoteSpec()) -> SmoteResult:
    """Oversample minority classes by interpolating toward same-class neighbours.

    Each synthetic row is ``x + u * (x_nn - x)`` with ``x`` drawn uniformly
    from its class and ``x_nn`` drawn uniformly from the ``k`` nearest
    same-class rows.  Classes are processed in sorted order, each from its
    own child generator.
    """
    counts = data.class_counts()
    targets = _targets(counts, spec)
    X = data.X
    p = X.shape[1]
    new_rows, new_labels, seeds, nbrs, gaps = [], [], [], [], []
    classes = sorted(counts)
    children = np.random.SeedSequence(spec.seed).spawn(len(classes))
    for cls, ss in zip(classes, children):
        n_new = targets[cls] - counts[cls]
        if n_new <= 0:
            continue
        members = np.flatnonzero(data.labels == cls)
        if members.size < 2:
            raise SingletonClassError(cls)
        k = spec.k_neighbors
        if k > members.size - 1:
            warnings.warn(
                f"k_neighbors={k} clamped to {members.size - 1} for class {cls!r}", stacklevel=2
            )
            k = members.size - 1
        rng = np.random.default_rng(ss)
        nn = _k_nearest(X[members], k)
        base = rng.integers(0, members.size, n_new)
        pick = nn[base, rng.integers(0, k, n_new)]
        u = rng.random((n_new, p if spec.per_coordinate else 1))
        x, x_nn = X[members[base]], X[members[pick]]
        new_rows.append(x + u * (x_nn - x))
        new_labels += [cls] * n_new
        seeds.append(members[base])
        nbrs.append(members[pick])
        gaps.append(u)
    if not new_rows:
        return SmoteResult(data, np.empty(0, int), np.empty(0, int), np.empty((0, 1)))
    rows = np.vstack(new_rows)
    ids = [f"smote-{i}" for i in range(rows.shape[0])]
    features = data.features.append_rows(rows, ids)
    labels = np.concatenate([data.labels, np.array(new_labels)])
    width = p if spec.per_coordinate else 1
    return SmoteResult(
        LabeledDataset(features, labels),
        np.concatenate(seeds),
        np.concatenate(nbrs),
        np.vstack([g.reshape(-1, width) for g in gaps]),
    )


def smote(data: LabeledDataset, spec: SmoteSpec = SmoteSpec()) -> LabeledDataset:
    return smote_with_provenance(data, spec).dataset
