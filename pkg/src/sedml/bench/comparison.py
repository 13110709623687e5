"""Train/evaluate the classifier suite under one leakage-free protocol."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from ..datamodel import LabeledDataset, SplitSpec, train_test_split
from ..metrics import TABLE_COLUMNS, ClassificationReport, classification_report
from ..models import ClassifierSpec, TrainedModel, fit, predict
from ..preprocess import ScaleMode, SmoteSpec, apply_scaler, fit_scaler, smote


def derive_seed(seed: int, *key: int) -> int:
    """Child seed for the given key path; stable across platforms."""
    return int(np.random.SeedSequence(seed, spawn_key=tuple(key)).generate_state(1)[0])


@dataclass
class PreparedSplit:
    train: LabeledDataset
    test: LabeledDataset
    scaler: object


def prepare(
    dataset: LabeledDataset,
    split: SplitSpec,
    smote_spec: SmoteSpec | None,
    scale_mode: ScaleMode | None = ScaleMode.ZSCORE,
) -> PreparedSplit:
    """Split, fit the scaler on the training part only, oversample the
    scaled training part and scale the test part with the training
    statistics."""
    train, test = train_test_split(dataset, split)
    scaler = None
    if scale_mode is not None:
        scaler = fit_scaler(train.features, scale_mode)
        train = train.with_features(apply_scaler(train.features, scaler))
        test = test.with_features(apply_scaler(test.features, scaler))
    if smote_spec is not None:
        train = smote(train, smote_spec)
    return PreparedSplit(train, test, scaler)


@dataclass
class ModelRow:
    name: str
    reports: list[ClassificationReport] = field(default_factory=list)
    curves: list[dict] = field(default_factory=list)
    error: str | None = None
    model: TrainedModel | None = None

    def _stat(self, attr: str) -> tuple[float, float]:
        vals = [getattr(r, attr) for r in self.reports]
        if not vals or self.error:
            return float("nan"), float("nan")
        return float(np.mean(vals)), float(np.std(vals))

    @property
    def accuracy(self) -> tuple[float, float]:
        return self._stat("accuracy")

    def as_dict(self, digits: int | None = None) -> dict:
        fmt = (lambda x: repr(x)) if digits is None else (lambda x: f"{x:.{digits}f}")
        acc, acc_sd = self.accuracy
        out = {"model": self.name, "accuracy": fmt(acc), "accuracy_std": fmt(acc_sd)}
        for attr in ("macro_precision", "macro_recall", "macro_f1"):
            out[attr] = fmt(self._stat(attr)[0])
        out["repeats"] = len(self.reports)
        out["error"] = self.error or ""
        return out


@dataclass
class ModelReport:
    rows: list[ModelRow]

    def row(self, name: str) -> ModelRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def table(self, digits: int | None = None) -> list[dict]:
        return [r.as_dict(digits) for r in self.rows]

    def to_text(self) -> str:
        rows = self.table(digits=3)
        cols = list(TABLE_COLUMNS)
        widths = {c: max(len(c), *(len(str(r[c])) for r in rows)) for c in cols}
        lines = ["  ".join(c.ljust(widths[c]) for c in cols)]
        lines += ["  ".join(str(r[c]).ljust(widths[c]) for c in cols) for r in rows]
        return "\n".join(lines)

    def write(self, out_dir, header_line: str | None = None) -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = [out_dir / "model_comparison.csv", out_dir / "training_curves.csv"]
        rows = self.table()
        with paths[0].open("w", newline="", encoding="utf-8") as fh:
            if header_line:
                fh.write(header_line + "\n")
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        with paths[1].open("w", newline="", encoding="utf-8") as fh:
            if header_line:
                fh.write(header_line + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model", "repeat", "epoch", "train_acc", "test_acc"])
            for r in self.rows:
                for rep, c in enumerate(r.curves):
                    for e, (tr, te) in enumerate(zip(c["train_accuracy"], c["test_accuracy"]), start=1):
                        w.writerow([r.name, rep, e, repr(tr), repr(te)])
        return paths


def run_model_comparison(
    dataset: LabeledDataset,
    specs: Sequence[ClassifierSpec],
    split: SplitSpec = SplitSpec(),
    repeats: int = 1,
    smote_spec: SmoteSpec | None = SmoteSpec(),
    derive_seeds: bool = True,
    scale_mode: ScaleMode | None = ScaleMode.ZSCORE,
    keep_models: bool = False,
) -> ModelReport:
    """Evaluate each spec on the same stratified split.

    The split is fixed by ``split.seed``.  With ``derive_seeds`` every repeat
    gets its own SMOTE and model seed derived from the input seeds; without
    it all repeats reuse them, so deterministic models repeat exactly.
    Failures are recorded on the row and the run continues.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    prepared = []
    for rep in range(repeats):
        sm = smote_spec
        if smote_spec is not None and derive_seeds:
            sm = replace(smote_spec, seed=derive_seed(smote_spec.seed, rep))
        prepared.append(prepare(dataset, split, sm, scale_mode))
    rows = []
    for spec in specs:
        row = ModelRow(spec.label)
        try:
            for rep, ps in enumerate(prepared):
                s = spec.with_seed(derive_seed(spec.seed, rep)) if derive_seeds else spec
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    model = fit(s, ps.train, eval_set=ps.test)
                report = classification_report(ps.test.labels, predict(model, ps.test.features), dataset.classes)
                row.reports.append(report)
                hist = model.history
                if hist is not None:
                    row.curves.append({"train_accuracy": list(hist.train_accuracy), "test_accuracy": list(hist.test_accuracy)})
                if keep_models and rep == 0:
                    model.scaler = ps.scaler
                    row.model = model
        except Exception as exc:  # noqa: BLE001 - recorded per row
            row.error = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return ModelReport(rows)
