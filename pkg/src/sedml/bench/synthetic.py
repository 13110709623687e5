"""Seeded synthetic ground-truth tables for the benchmarks and tests.

Every generator returns strictly positive values so SMAPE stays
well-conditioned.
"""
from __future__ import annotations

import numpy as np

from ..datamodel import DataMatrix, LabeledDataset


def _names(prefix: str, p: int) -> list[str]:
    return [f"{prefix}{j + 1}" for j in range(p)]


def low_rank(n_rows: int = 200, n_cols: int = 25, rank: int = 2, seed: int = 0) -> DataMatrix:
    """Exact rank-``rank`` matrix ``U V'`` with positive uniform factors."""
    rng = np.random.default_rng(seed)
    U = rng.uniform(0.5, 2.0, (n_rows, rank))
    V = rng.uniform(0.5, 2.0, (rank, n_cols))
    return DataMatrix.from_array(U @ V, col_names=_names("x", n_cols))


def linear_correlated(n_rows: int = 200, n_cols: int = 10, n_latent: int = 3, noise: float = 0.05, seed: int = 0) -> DataMatrix:
    """Columns are positive linear mixtures of a few latent factors plus noise."""
    rng = np.random.default_rng(seed)
    Z = rng.uniform(1.0, 3.0, (n_rows, n_latent))
    W = rng.uniform(0.2, 1.0, (n_latent, n_cols))
    X = Z @ W + noise * rng.standard_normal((n_rows, n_cols))
    return DataMatrix.from_array(np.abs(X) + 1e-3, col_names=_names("x", n_cols))


def nonlinear_correlated(n_rows: int = 120, n_cols: int = 5, noise: float = 0.02, seed: int = 0) -> DataMatrix:
    """Every column is a different smooth nonlinear function of one latent ``t``.

    The dependence is strong but not linear, which is where tree-based
    iterative imputation has an edge over column means.
    """
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, 1.0, n_rows)
    funcs = [
        lambda s: 1.0 + s,
        lambda s: 1.0 + np.sin(np.pi * s),
        lambda s: 0.2 + s**2,
        lambda s: np.exp(1.5 * s),
        lambda s: 1.5 + np.cos(2 * np.pi * s),
        lambda s: 0.5 + np.abs(s - 0.5),
    ]
    cols = [funcs[j % len(funcs)](t) for j in range(n_cols)]
    X = np.column_stack(cols) * (1.0 + noise * rng.standard_normal((n_rows, n_cols)))
    return DataMatrix.from_array(np.abs(X) + 1e-3, col_names=_names("x", n_cols))


def clustered(
    n_clusters: int = 20, cluster_size: int = 4, n_cols: int = 10, spread: float = 0.05, seed: int = 0
) -> DataMatrix:
    """Tight, well separated clusters; rows from one cluster are contiguous."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(1.0, 10.0, (n_clusters, n_cols))
    X = np.repeat(centers, cluster_size, axis=0)
    X = X * (1.0 + spread * rng.standard_normal(X.shape))
    return DataMatrix.from_array(np.abs(X) + 1e-3, col_names=_names("x", n_cols))


def gaussian_classes(
    n_per_class: int = 100,
    n_features: int = 25,
    n_classes: int = 3,
    separation: float = 6.0,
    seed: int = 0,
    labels: tuple[str, ...] = ("A", "B", "C", "D", "E"),
) -> LabeledDataset:
    """Spherical unit-variance Gaussians whose means are pairwise ``separation`` apart.

    Means sit on scaled orthonormal axes, so every class is linearly
    separable from the union of the others.
    """
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((n_features, n_classes)))
    means = basis.T * (separation / np.sqrt(2.0))
    X = np.vstack([means[c] + rng.standard_normal((n_per_class, n_features)) for c in range(n_classes)])
    y = np.repeat(np.array(labels[:n_classes]), n_per_class)
    perm = rng.permutation(y.size)
    return LabeledDataset(DataMatrix.from_array(X[perm], col_names=_names("f", n_features)), y[perm])


# element, log-normal median as a multiple of background, log-sd
SEDIMENT_ELEMENTS = (
    ("Al", 1.0, 0.15), ("Fe", 1.0, 0.2), ("Mn", 1.1, 0.3), ("Ti", 1.0, 0.2), ("Cu", 1.6, 0.6),
    ("Zn", 1.8, 0.6), ("Pb", 1.7, 0.6), ("Cd", 2.0, 0.8), ("Cr", 1.2, 0.4), ("Ni", 1.1, 0.4),
    ("Co", 1.0, 0.3), ("As", 1.4, 0.5), ("Hg", 1.8, 0.8), ("V", 1.0, 0.3), ("Se", 1.2, 0.5),
    ("Ag", 1.5, 0.6), ("Ba", 1.0, 0.3), ("Mo", 1.2, 0.5), ("Sn", 1.3, 0.5), ("Sb", 1.3, 0.5),
    ("Li", 0.9, 0.3), ("Sr", 1.0, 0.3), ("Be", 0.9, 0.3), ("Tl", 1.0, 0.4), ("B", 1.0, 0.4),
)


def synthetic_sediment(
    n_rows: int = 240,
    seed: int = 0,
    background: dict | None = None,
    hotspot_fraction: float = 0.07,
    hotspot_intensity: float = 30.0,
) -> DataMatrix:
    """25-element concentration table (mg/kg) with a shared contamination factor.

    A per-sample contamination intensity scales the anthropogenic elements
    together, so they are correlated with each other and not with the
    lithogenic ones.  A small fraction of hotspot samples carries a much
    higher intensity; with the bundled profile the default mix labels
    roughly 45/50/5 percent of rows A/B/C.  Values are fully observed.
    """
    from ..indices import load_profile

    bg = background or load_profile()[0].background
    lithogenic = {"Al", "Fe", "Ti", "Li", "Be", "Sr", "Ba"}
    rng = np.random.default_rng(seed)
    intensity = rng.gamma(1.5, 1.0, n_rows)
    hot = rng.random(n_rows) < hotspot_fraction
    intensity = np.where(hot, hotspot_intensity * (1.0 + rng.random(n_rows)), intensity)
    cols = []
    for el, med, sd in SEDIMENT_ELEMENTS:
        boost = 1.0 if el in lithogenic else 1.0 + (med - 1.0) * intensity
        cols.append(bg[el] * boost * np.exp(sd * rng.standard_normal(n_rows)))
    X = np.column_stack(cols)
    ids = [f"S{i + 1:04d}" for i in range(n_rows)]
    return DataMatrix.from_array(X, col_names=[e for e, _, _ in SEDIMENT_ELEMENTS], row_ids=ids)


MAJOR_ELEMENTS = ("Al", "Fe", "Mn", "Ti")


def bundled_tables(seed: int = 0, n_rows: int = 240, missing_rate: float = 0.53) -> tuple[DataMatrix, DataMatrix]:
    """The shipped example pair: a complete table and its observed version.

    Major elements stay observed (the reference element must be measured);
    the remaining cells are hidden uniformly at random so the whole table
    misses ``missing_rate`` of its cells, each column keeping at least one
    observation.  Values are rounded to four significant figures, as a lab
    report would give them.
    """
    raw = synthetic_sediment(n_rows, seed)
    complete = raw.with_values(np.vectorize(lambda x: float(f"{x:.4g}"))(raw.values))
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    minor = np.array([c not in MAJOR_ELEMENTS for c in complete.col_names])
    n_hide = int(round(missing_rate * complete.n_rows * complete.n_cols))
    pool = np.flatnonzero(np.broadcast_to(minor, complete.shape).ravel())
    if n_hide > pool.size - minor.sum():
        raise ValueError(f"missing rate {missing_rate} is too high with the major elements kept")
    while True:
        mask = np.ones(complete.n_rows * complete.n_cols, dtype=bool)
        mask[rng.choice(pool, n_hide, replace=False)] = False
        mask = mask.reshape(complete.shape)
        if mask.any(axis=0).all():
            break
    return complete, complete.with_values(complete.values, mask)
