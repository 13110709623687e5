"""Imputation error and classification metrics."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class MetricError(ValueError):
    pass


def smape(actual, predicted) -> float:
    """Symmetric MAPE on the 0-200 scale; 0/0 terms count as zero error."""
    a = np.asarray(actual, dtype=np.float64).ravel()
    p = np.asarray(predicted, dtype=np.float64).ravel()
    if a.shape != p.shape:
        raise MetricError(f"length mismatch: {a.size} vs {p.size}")
    if a.size == 0:
        raise MetricError("smape of an empty input")
    denom = np.abs(a) + np.abs(p)
    num = 2.0 * np.abs(p - a)
    terms = np.divide(num, denom, out=np.zeros_like(num), where=denom > 0)
    return float(100.0 * terms.mean())


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * (precision * recall) / (precision + recall)


@dataclass(frozen=True, eq=False)
class ClassificationReport:
    classes: tuple[str, ...]
    confusion: np.ndarray  # rows = true, cols = predicted
    precision: dict[str, float]
    recall: dict[str, float]
    f1: dict[str, float]
    support_classes: tuple[str, ...]  # classes present in the true labels

    @property
    def n(self) -> int:
        return int(self.confusion.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.confusion) / self.confusion.sum())

    def _macro(self, d: dict[str, float]) -> float:
        # zero-support classes stay in the average with score 0
        return float(np.mean([d[c] for c in self.classes]))

    @property
    def macro_precision(self) -> float:
        return self._macro(self.precision)

    @property
    def macro_recall(self) -> float:
        return self._macro(self.recall)

    @property
    def macro_f1(self) -> float:
        return self._macro(self.f1)

    def summary(self) -> dict[str, float]:
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
        }

    def to_text(self) -> str:
        lines = [f"{'class':>8} {'precision':>10} {'recall':>10} {'f1':>10}"]
        for c in self.classes:
            lines.append(f"{c:>8} {self.precision[c]:10.3f} {self.recall[c]:10.3f} {self.f1[c]:10.3f}")
        lines.append(f"accuracy {self.accuracy:.3f}  macro-F1 {self.macro_f1:.3f}")
        return "\n".join(lines)


def classification_report(true_labels, predicted_labels, classes: Sequence[str] | None = None):
    """Per-class precision/recall/F1 and macro averages.

    A class that is never predicted gets precision 0; one that never occurs
    gets recall 0.  Macro values average over the whole class alphabet, so
    a class absent from ``true_labels`` contributes zeros.
    """
    t = np.asarray(true_labels).astype(str)
    p = np.asarray(predicted_labels).astype(str)
    if t.shape != p.shape:
        raise MetricError(f"length mismatch: {t.size} vs {p.size}")
    if t.size == 0:
        raise MetricError("empty label arrays")
    if classes is None:
        classes = sorted(set(t.tolist()) | set(p.tolist()))
    classes = tuple(str(c) for c in classes)
    pos = {c: i for i, c in enumerate(classes)}
    unknown = (set(t.tolist()) | set(p.tolist())) - set(classes)
    if unknown:
        raise MetricError(f"labels outside the class alphabet: {sorted(unknown)}")
    cm = np.zeros((len(classes), len(classes)), dtype=np.int64)
    np.add.at(cm, ([pos[x] for x in t], [pos[x] for x in p]), 1)
    prec, rec, f1 = {}, {}, {}
    for c, i in pos.items():
        tp = cm[i, i]
        pp, ap = cm[:, i].sum(), cm[i, :].sum()
        prec[c] = float(tp / pp) if pp else 0.0
        rec[c] = float(tp / ap) if ap else 0.0
        f1[c] = f1_score(prec[c], rec[c])
    support = tuple(c for c in classes if cm[pos[c], :].sum() > 0)
    return ClassificationReport(classes, cm, prec, rec, f1, support)


TABLE_COLUMNS = ("model", "accuracy", "accuracy_std", "macro_precision", "macro_recall", "macro_f1")


def write_table(rows: list[dict], path, header_line: str | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        if header_line:
            fh.write(header_line + "\n")
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
