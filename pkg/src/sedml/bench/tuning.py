"""Staged DNN hyperparameter sweep with per-epoch accuracy curves."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..datamodel import LabeledDataset, SplitSpec
from ..models import DNN_HIDDEN, ClassifierSpec, fit
from ..preprocess import SmoteSpec
from .comparison import prepare

# hidden widths; a network with h hidden layers uses the first h
LAYER_TEMPLATE = (200, 400, 300, 100, 50, 25)
NEURON_CONFIGS = (
    (100, 200, 150, 50, 25),
    (200, 400, 300, 100, 50),
    (500, 1000, 750, 250, 50),
    (1000, 2000, 1500, 500, 250),
)
STAGES = ("layers", "neurons", "dropout", "batch_norm", "joint")


@dataclass(frozen=True)
class TuningGrid:
    layer_counts: tuple[int, ...] = (2, 3, 4, 5, 6)
    neuron_configs: tuple[tuple[int, ...], ...] = NEURON_CONFIGS
    dropout_rates: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4)
    batch_norm: tuple[bool, ...] = (False, True)
    epochs: int = 60
    base_hidden: tuple[int, ...] = DNN_HIDDEN
    layer_template: tuple[int, ...] = LAYER_TEMPLATE
    learning_rate: float = 1e-3
    batch_size: int = 32
    stages: tuple[str, ...] = STAGES

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if any(h < 1 or h > len(self.layer_template) for h in self.layer_counts):
            raise ValueError(f"layer counts must lie in 1..{len(self.layer_template)}")
        if any(not 0 <= d < 1 for d in self.dropout_rates):
            raise ValueError("dropout rates must lie in [0, 1)")
        unknown = set(self.stages) - set(STAGES)
        if unknown:
            raise ValueError(f"unknown tuning stages {sorted(unknown)}")

    def points(self, best_dropout: float | None = None) -> list[tuple[str, tuple[int, ...], float, bool]]:
        """(stage, hidden widths, dropout, batch norm) in run order.

        The joint stage pairs "neither" with "best dropout plus batch norm";
        it needs ``best_dropout`` and is left out when that is unknown.
        """
        base = tuple(self.base_hidden)
        out = []
        for stage in STAGES:
            if stage not in self.stages:
                continue
            if stage == "layers":
                out += [(stage, tuple(self.layer_template[:h]), 0.0, False) for h in self.layer_counts]
            elif stage == "neurons":
                out += [(stage, tuple(c), 0.0, False) for c in self.neuron_configs]
            elif stage == "dropout":
                out += [(stage, base, float(d), False) for d in self.dropout_rates]
            elif stage == "batch_norm":
                out += [(stage, base, 0.0, bool(b)) for b in self.batch_norm]
            elif best_dropout is not None:
                out += [(stage, base, 0.0, False), (stage, base, float(best_dropout), True)]
        return out


@dataclass
class TuningPoint:
    stage: str
    hidden: tuple[int, ...]
    dropout: float
    batch_norm: bool
    train_accuracy: list[float] = field(default_factory=list)
    test_accuracy: list[float] = field(default_factory=list)
    error: str | None = None

    @property
    def name(self) -> str:
        return f"{self.stage}:h={'-'.join(map(str, self.hidden))}:do={self.dropout:g}:bn={int(self.batch_norm)}"

    @property
    def final_test(self) -> float:
        return self.test_accuracy[-1] if self.test_accuracy and not self.error else float("nan")

    @property
    def final_train(self) -> float:
        return self.train_accuracy[-1] if self.train_accuracy and not self.error else float("nan")


@dataclass
class TuningResult:
    points: list[TuningPoint]
    best_dropout: float | None

    def stage(self, name: str) -> list[TuningPoint]:
        return [p for p in self.points if p.stage == name]

    def best(self, stage: str | None = None) -> TuningPoint | None:
        pool = [p for p in (self.stage(stage) if stage else self.points) if not p.error]
        if not pool:
            return None
        # first point wins ties
        return pool[int(np.argmax([p.final_test for p in pool]))]

    def write(self, out_dir, header_line: str | None = None) -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        curves, summary = out_dir / "tuning_curves.csv", out_dir / "tuning_summary.csv"
        with curves.open("w", newline="", encoding="utf-8") as fh:
            if header_line:
                fh.write(header_line + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["stage", "hidden", "dropout", "batch_norm", "epoch", "train_acc", "test_acc"])
            for p in self.points:
                h = "-".join(map(str, p.hidden))
                for e, (tr, te) in enumerate(zip(p.train_accuracy, p.test_accuracy), start=1):
                    w.writerow([p.stage, h, repr(p.dropout), int(p.batch_norm), e, repr(tr), repr(te)])
        with summary.open("w", newline="", encoding="utf-8") as fh:
            if header_line:
                fh.write(header_line + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["stage", "hidden", "dropout", "batch_norm", "final_train_acc", "final_test_acc", "best_in_stage", "error"])
            bests = {s: self.best(s) for s in STAGES}
            for p in self.points:
                w.writerow([
                    p.stage, "-".join(map(str, p.hidden)), repr(p.dropout), int(p.batch_norm),
                    repr(p.final_train), repr(p.final_test), int(bests[p.stage] is p), p.error or "",
                ])
            b = self.best()
            if b is not None:
                fh.write(f"# best overall: {b.name} test_acc={b.final_test!r}\n")
        return [curves, summary]


def _train_point(stage, hidden, dropout, bn, grid: TuningGrid, ps, seed: int) -> TuningPoint:
    pt = TuningPoint(stage, tuple(hidden), dropout, bn)
    spec = ClassifierSpec(
        "MLP",
        {
            "hidden_layers": list(hidden),
            "dropout_rate": dropout,
            "batch_norm": bn,
            "epochs": grid.epochs,
            "learning_rate": grid.learning_rate,
            "batch_size": grid.batch_size,
        },
        seed=seed,
    )
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model = fit(spec, ps.train, eval_set=ps.test)
        pt.train_accuracy = list(model.history.train_accuracy)
        pt.test_accuracy = list(model.history.test_accuracy)
    except Exception as exc:  # noqa: BLE001 - recorded per point
        pt.error = f"{type(exc).__name__}: {exc}"
    return pt


def run_dnn_tuning(
    dataset: LabeledDataset,
    grid: TuningGrid = TuningGrid(),
    split: SplitSpec = SplitSpec(),
    smote_spec: SmoteSpec | None = SmoteSpec(),
    seed: int = 0,
) -> TuningResult:
    """Train one network per grid point on a single prepared split.

    Every point uses the same split, scaling, oversampling and weight seed,
    so curves differ only by configuration.  A point that fails keeps its
    error and the sweep continues.
    """
    ps = prepare(dataset, split, smote_spec)
    points = [
        _train_point(st, h, d, bn, grid, ps, seed)
        for st, h, d, bn in grid.points()
        if st != "joint"
    ]
    best_dropout = None
    drop = [p for p in points if p.stage == "dropout" and not p.error]
    if drop:
        best_dropout = drop[int(np.argmax([p.final_test for p in drop]))].dropout
    elif grid.dropout_rates:
        best_dropout = float(grid.dropout_rates[0])
    if "joint" in grid.stages and best_dropout is not None:
        points += [
            _train_point(st, h, d, bn, grid, ps, seed)
            for st, h, d, bn in grid.points(best_dropout)
            if st == "joint"
        ]
    return TuningResult(points, best_dropout)
