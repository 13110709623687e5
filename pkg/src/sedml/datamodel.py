"""Tabular containers, CSV ingestion and train/test splitting.

A :class:`DataMatrix` carries a dense float64 grid together with a boolean
mask (``True`` = observed).  Masked cells are never read by any consumer, so
their stored value is irrelevant; the loader puts ``nan`` there.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DEFAULT_MISSING_TOKENS = ("", "NA", "ND", "BDL")


class DataError(ValueError):
    """Base class for malformed input data."""


class RaggedRowError(DataError):
    def __init__(self, row: int, expected: int, got: int):
        super().__init__(f"row {row} has {got} fields, header has {expected}")
        self.row = row


class UnparsableCellError(DataError):
    def __init__(self, row: int, col: str, token: str):
        super().__init__(f"cannot parse {token!r} at row {row}, column {col!r}")
        self.row = row
        self.col = col
        self.token = token


class DegenerateSplitError(DataError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DataMatrix:
    values: np.ndarray
    mask: np.ndarray
    col_names: tuple[str, ...]
    row_ids: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if values.ndim != 2:
            raise DataError("values must be two-dimensional")
        if mask.shape != values.shape:
            raise DataError(f"mask shape {mask.shape} != values shape {values.shape}")
        col_names = tuple(str(c) for c in self.col_names)
        row_ids = tuple(str(r) for r in self.row_ids)
        if len(col_names) != values.shape[1]:
            raise DataError("col_names length does not match n_cols")
        if len(row_ids) != values.shape[0]:
            raise DataError("row_ids length does not match n_rows")
        if len(set(col_names)) != len(col_names):
            raise DataError("duplicate column names")
        if len(set(row_ids)) != len(row_ids):
            raise DataError("duplicate row ids")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "mask", _frozen(mask))
        object.__setattr__(self, "col_names", col_names)
        object.__setattr__(self, "row_ids", row_ids)

    @classmethod
    def from_array(cls, values, mask=None, col_names=None, row_ids=None) -> "DataMatrix":
        """Build from an array; ``nan`` cells are masked when ``mask`` is omitted."""
        values = np.asarray(values, dtype=np.float64)
        if mask is None:
            mask = ~np.isnan(values)
        n_rows, n_cols = values.shape
        if col_names is None:
            col_names = [f"x{j}" for j in range(n_cols)]
        if row_ids is None:
            row_ids = [str(i) for i in range(n_rows)]
        return cls(values, mask, tuple(col_names), tuple(row_ids))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def observed_fraction(self) -> float:
        return float(self.mask.sum()) / self.mask.size

    @property
    def missing_rate(self) -> float:
        return 1.0 - self.observed_fraction

    @property
    def is_complete(self) -> bool:
        return bool(self.mask.all())

    def as_nan_array(self) -> np.ndarray:
        """Writable copy with masked cells set to ``nan``."""
        out = np.array(self.values, dtype=np.float64)
        out[~self.mask] = np.nan
        return out

    def with_values(self, values, mask=None) -> "DataMatrix":
        mask = np.ones(self.shape, dtype=bool) if mask is None else mask
        return DataMatrix(values, mask, self.col_names, self.row_ids)

    def take_rows(self, idx) -> "DataMatrix":
        idx = np.asarray(idx, dtype=int)
        return DataMatrix(
            self.values[idx], self.mask[idx], self.col_names, tuple(self.row_ids[i] for i in idx)
        )

    def select_columns(self, names: Sequence[str]) -> "DataMatrix":
        pos = {c: j for j, c in enumerate(self.col_names)}
        missing = [n for n in names if n not in pos]
        if missing:
            raise DataError(f"unknown columns: {missing}")
        idx = [pos[n] for n in names]
        return DataMatrix(self.values[:, idx], self.mask[:, idx], tuple(names), self.row_ids)

    def column(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        j = self.col_names.index(name)
        return self.values[:, j], self.mask[:, j]

    def append_rows(self, values, row_ids: Sequence[str]) -> "DataMatrix":
        values = np.asarray(values, dtype=np.float64).reshape(-1, self.n_cols)
        return DataMatrix(
            np.vstack([self.values, values]),
            np.vstack([self.mask, np.ones(values.shape, dtype=bool)]),
            self.col_names,
            self.row_ids + tuple(row_ids),
        )


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    features: DataMatrix
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels).astype(str)
        if labels.ndim != 1 or labels.shape[0] != self.features.n_rows:
            raise DataError("labels length must equal features.n_rows")
        if not self.features.is_complete:
            raise DataError("LabeledDataset features must be fully observed")
        object.__setattr__(self, "labels", _frozen(labels))

    def __len__(self) -> int:
        return self.features.n_rows

    @property
    def X(self) -> np.ndarray:
        return self.features.values

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.labels.tolist())))

    def class_counts(self) -> dict[str, int]:
        values, counts = np.unique(self.labels, return_counts=True)
        return {str(v): int(c) for v, c in zip(values, counts)}

    def take_rows(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=int)
        return LabeledDataset(self.features.take_rows(idx), self.labels[idx])

    def with_features(self, features: DataMatrix) -> "LabeledDataset":
        return LabeledDataset(features, self.labels)


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")


def _round_half_up(x: float) -> int:
    # guard against 0.3 * 10 == 3.0000000000000004 style noise
    return int(math.floor(x + 0.5 + 1e-9))


def _stratified_test_counts(counts: np.ndarray, n_test: int) -> np.ndarray:
    # largest-remainder apportionment keeps each class within one sample of its share
    quota = counts * (n_test / counts.sum())
    base = np.floor(quota + 1e-9).astype(int)
    remainder = quota - base
    order = np.lexsort((np.arange(len(counts)), -remainder))
    for c in order[: n_test - base.sum()]:
        base[c] += 1
    return base


def train_test_split(data: LabeledDataset, spec: SplitSpec) -> tuple[LabeledDataset, LabeledDataset]:
    """Split into (train, test); deterministic for a fixed ``spec.seed``."""
    n = len(data)
    if n == 0:
        raise DegenerateSplitError("cannot split an empty dataset")
    n_test = _round_half_up(spec.test_fraction * n)
    if n_test <= 0 or n_test >= n:
        raise DegenerateSplitError(
            f"test_fraction={spec.test_fraction} on {n} rows leaves an empty partition"
        )
    rng = np.random.default_rng(spec.seed)
    if spec.stratified:
        classes, inverse, counts = np.unique(data.labels, return_inverse=True, return_counts=True)
        small = classes[counts < 2]
        if len(small):
            raise DegenerateSplitError(f"classes with fewer than 2 members: {list(small)}")
        per_class = _stratified_test_counts(counts, n_test)
        test_idx = []
        for c, k in enumerate(per_class):
            members = np.flatnonzero(inverse == c)
            test_idx.extend(rng.permutation(members)[:k].tolist())
        test_idx = np.array(sorted(test_idx), dtype=int)
    else:
        test_idx = np.sort(rng.permutation(n)[:n_test])
    is_test = np.zeros(n, dtype=bool)
    is_test[test_idx] = True
    train_idx = np.flatnonzero(~is_test)
    if len(train_idx) == 0 or len(test_idx) == 0:
        raise DegenerateSplitError("split produced an empty partition")
    return data.take_rows(train_idx), data.take_rows(test_idx)


def _parse_rows(rows: Iterable[list[str]]):
    for i, row in enumerate(rows):
        if not row or (len(row) == 1 and row[0].strip() == ""):
            continue
        if row[0].startswith("#"):
            continue
        yield i, row


def load_csv(
    path,
    missing_tokens: Sequence[str] = DEFAULT_MISSING_TOKENS,
    id_column: str | None = None,
    columns: Sequence[str] | None = None,
) -> DataMatrix:
    """Read a numeric CSV table.

    Cells equal (after stripping whitespace) to one of ``missing_tokens`` are
    masked.  Lines starting with ``#`` are skipped, which lets the loader read
    back the schema header that this package writes.  ``columns`` restricts
    the table to a subset of numeric columns; other non-id columns are then
    ignored instead of parsed.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    tokens = {t.strip() for t in missing_tokens}
    with path.open(newline="", encoding="utf-8-sig") as fh:
        parsed = _parse_rows(csv.reader(fh))
        try:
            _, header = next(parsed)
        except StopIteration:
            raise DataError(f"{path} has no header row") from None
        header = [h.strip() for h in header]
        id_pos = None
        if id_column is not None:
            if id_column not in header:
                raise DataError(f"id column {id_column!r} not in header")
            id_pos = header.index(id_column)
        if columns is None:
            keep = [j for j in range(len(header)) if j != id_pos]
        else:
            missing = [c for c in columns if c not in header]
            if missing:
                raise DataError(f"columns not in header: {missing}")
            keep = [header.index(c) for c in columns]
        values, mask, row_ids = [], [], []
        for n_data, (line, row) in enumerate(parsed):
            if len(row) != len(header):
                raise RaggedRowError(n_data, len(header), len(row))
            vrow, mrow = [], []
            for j in keep:
                tok = row[j].strip()
                if tok in tokens:
                    vrow.append(np.nan)
                    mrow.append(False)
                    continue
                try:
                    vrow.append(float(tok))
                except ValueError:
                    raise UnparsableCellError(n_data, header[j], tok) from None
                mrow.append(True)
            values.append(vrow)
            mask.append(mrow)
            row_ids.append(row[id_pos].strip() if id_pos is not None else str(n_data))
    shape = (len(values), len(keep))
    return DataMatrix(
        np.array(values, dtype=np.float64).reshape(shape),
        np.array(mask, dtype=bool).reshape(shape),
        tuple(header[j] for j in keep),
        tuple(row_ids),
    )


def format_float(x: float) -> str:
    return repr(float(x))


def write_csv(
    data: DataMatrix,
    path,
    missing_token: str = "NA",
    id_column: str | None = "sample_id",
    extra_columns: dict[str, Sequence] | None = None,
    header_line: str | None = None,
) -> None:
    """Write ``data`` with masked cells rendered as ``missing_token``.

    Values are written with ``repr`` so a reload reproduces them exactly.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    extra_columns = extra_columns or {}
    with path.open("w", newline="", encoding="utf-8") as fh:
        if header_line:
            fh.write(header_line.rstrip("\n") + "\n")
        w = csv.writer(fh, lineterminator="\n")
        head = ([id_column] if id_column else []) + list(data.col_names) + list(extra_columns)
        w.writerow(head)
        for i in range(data.n_rows):
            cells = [data.row_ids[i]] if id_column else []
            for j in range(data.n_cols):
                cells.append(format_float(data.values[i, j]) if data.mask[i, j] else missing_token)
            cells.extend(str(col[i]) for col in extra_columns.values())
            w.writerow(cells)


def load_labeled_csv(
    path,
    label_column: str = "label",
    id_column: str | None = None,
    missing_tokens: Sequence[str] = DEFAULT_MISSING_TOKENS,
) -> LabeledDataset:
    """Read a fully observed feature table with a class-label column."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        rows = [r for _, r in _parse_rows(csv.reader(fh))]
    header = [h.strip() for h in rows[0]]
    if label_column not in header:
        raise DataError(f"label column {label_column!r} not in header")
    lab = header.index(label_column)
    labels = [r[lab].strip() for r in rows[1:]]
    feature_cols = [h for h in header if h not in (label_column, id_column)]
    features = load_csv(path, missing_tokens, id_column=id_column, columns=feature_cols)
    return LabeledDataset(features, np.array(labels))


def write_labeled_csv(data: LabeledDataset, path, header_line: str | None = None) -> None:
    write_csv(
        data.features,
        path,
        extra_columns={"label": data.labels.tolist()},
        header_line=header_line,
    )
