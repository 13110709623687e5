"""Sediment pollution indicators and the merged 0-25 labelling scores.

Base indicators follow their usual geochemical definitions:

* geoaccumulation index ``Igeo = log2(C / (1.5 B))``
* enrichment factor ``EF = (C_x / C_ref) / (B_x / B_ref)``
* pollution load index, the geometric mean of contamination factors ``C / B``
* potential ecological risk ``PER = sum(Tr_i * CF_i)``

Each indicator is mapped onto a common [0, 25] scale by a clipped linear
score; the four scores are averaged and thresholded into a class label.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .datamodel import DataMatrix

try:  # pragma: no cover - depends on interpreter
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib


class IndicatorError(ValueError):
    """Base class for indicator failures."""


class NonPositiveBackgroundError(IndicatorError):
    pass


class NonPositiveInputError(IndicatorError):
    pass


class EmptyFactorListError(IndicatorError):
    pass


class NonPositiveFactorError(IndicatorError):
    pass


class MissingToxicResponseError(IndicatorError):
    def __init__(self, element: str):
        super().__init__(f"no toxic-response factor for {element!r}")
        self.element = element


class NonFiniteInputError(IndicatorError):
    pass


class InsufficientElementsError(IndicatorError):
    pass


class MissingReferenceError(IndicatorError):
    pass


# ---------------------------------------------------------------- indicators

def igeo(concentration: float, background: float) -> float:
    if not background > 0:
        raise NonPositiveBackgroundError(f"background must be > 0, got {background}")
    if concentration < 0:
        raise NonPositiveInputError(f"concentration must be >= 0, got {concentration}")
    if concentration == 0:
        return -math.inf
    return math.log2(concentration / (1.5 * background))


def enrichment_factor(c_x: float, c_ref: float, b_x: float, b_ref: float) -> float:
    if not (c_x > 0 and c_ref > 0 and b_x > 0 and b_ref > 0):
        raise NonPositiveInputError(
            f"enrichment factor inputs must be > 0, got {(c_x, c_ref, b_x, b_ref)}"
        )
    return (c_x / c_ref) / (b_x / b_ref)


def contamination_factor(concentration: float, background: float) -> float:
    if not background > 0:
        raise NonPositiveBackgroundError(f"background must be > 0, got {background}")
    return concentration / background


def pollution_load_index(contamination_factors: Sequence[float]) -> float:
    cf = np.asarray(list(contamination_factors), dtype=np.float64)
    if cf.size == 0:
        raise EmptyFactorListError("pollution load index needs at least one factor")
    if np.any(~(cf > 0)):
        raise NonPositiveFactorError("contamination factors must be > 0")
    # log-domain mean avoids overflow of the running product
    return float(np.exp(np.mean(np.log(cf))))


def potential_ecological_risk(
    contamination_factors: Mapping[str, float], toxic_response: Mapping[str, float]
) -> float:
    total = 0.0
    for element, cf in contamination_factors.items():
        if element not in toxic_response:
            raise MissingToxicResponseError(element)
        total += toxic_response[element] * cf
    return total


# ------------------------------------------------------------ merger scores

def _clipped_linear(x: float, lo: float, hi: float) -> float:
    if not math.isfinite(x):
        raise NonFiniteInputError(f"score input must be finite, got {x}")
    if x < lo:
        return 0.0
    if x > hi:
        return 25.0
    return 25.0 * (x - lo) / (hi - lo)


def score_igeo(x: float) -> float:
    if not math.isfinite(x):
        raise NonFiniteInputError(f"score input must be finite, got {x}")
    if x < 0:
        return 0.0
    if x > 5:
        return 25.0
    return 5.0 * x


def score_ef(x: float) -> float:
    return _clipped_linear(x, 2.0, 40.0)


def score_pli(x: float) -> float:
    return _clipped_linear(x, 1.0, 5.0)


def score_per(x: float) -> float:
    return _clipped_linear(x, 40.0, 320.0)


# ------------------------------------------------------------------ config

@dataclass(frozen=True)
class BackgroundProfile:
    background: Mapping[str, float]
    reference_element: str
    toxic_response: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        bad = {k: v for k, v in self.background.items() if not v > 0}
        if bad:
            raise NonPositiveBackgroundError(f"non-positive background values: {bad}")
        if self.reference_element not in self.background:
            raise ValueError(f"reference element {self.reference_element!r} has no background")
        bad = {k: v for k, v in self.toxic_response.items() if not v > 0}
        if bad:
            raise ValueError(f"non-positive toxic-response factors: {bad}")
        object.__setattr__(self, "background", dict(self.background))
        object.__setattr__(self, "toxic_response", dict(self.toxic_response))


@dataclass(frozen=True)
class LabellingConfig:
    """How per-element scores collapse into one class label.

    ``thresholds`` are the ascending cut points on the combined score;
    ``labels`` has one more entry than ``thresholds``.  ``ef_on_missing_reference``
    is ``"error"`` or ``"skip"``; with ``"skip"`` the combined score averages the
    remaining three indicator scores.
    """

    aggregation: str = "mean"
    thresholds: tuple[float, ...] = (5.0, 15.0)
    labels: tuple[str, ...] = ("A", "B", "C")
    ef_on_missing_reference: str = "error"

    def __post_init__(self):
        if self.aggregation not in ("mean", "max"):
            raise ValueError(f"aggregation must be 'mean' or 'max', got {self.aggregation!r}")
        if len(self.labels) != len(self.thresholds) + 1:
            raise ValueError("labels must have exactly one more entry than thresholds")
        if list(self.thresholds) != sorted(self.thresholds):
            raise ValueError("thresholds must be ascending")
        if self.ef_on_missing_reference not in ("error", "skip"):
            raise ValueError("ef_on_missing_reference must be 'error' or 'skip'")
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))

    def classify(self, combined: float) -> str:
        for cut, lab in zip(self.thresholds, self.labels):
            if combined < cut:
                return lab
        return self.labels[-1]


def _profile_from_dict(d: Mapping) -> tuple[BackgroundProfile, LabellingConfig]:
    profile = BackgroundProfile(
        background={k: float(v) for k, v in d["background"].items()},
        reference_element=str(d["reference_element"]),
        toxic_response={k: float(v) for k, v in d.get("toxic_response", {}).items()},
    )
    lab = d.get("labelling", {})
    config = LabellingConfig(
        aggregation=lab.get("aggregation", "mean"),
        thresholds=tuple(lab.get("thresholds", (5.0, 15.0))),
        labels=tuple(lab.get("labels", ("A", "B", "C"))),
        ef_on_missing_reference=lab.get("ef_on_missing_reference", "error"),
    )
    return profile, config


def load_profile(path=None) -> tuple[BackgroundProfile, LabellingConfig]:
    """Read a labelling TOML file; ``None`` loads the bundled defaults."""
    if path is None:
        text = resources.files("sedml").joinpath("data/default_profile.toml").read_text("utf-8")
    else:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(path)
        text = path.read_text("utf-8")
    return _profile_from_dict(tomllib.loads(text))


# ----------------------------------------------------------------- labelling

@dataclass(frozen=True)
class IndicatorScores:
    igeo: dict[str, float]
    ef: dict[str, float]
    pli: float
    per: float
    merged_scores: tuple[float, float, float, float]  # igeo, ef, pli, per
    combined: float
    label: str


def _aggregate(scores: list[float], mode: str) -> float:
    return max(scores) if mode == "max" else sum(scores) / len(scores)


def label_sample(
    row: Mapping[str, float],
    profile: BackgroundProfile,
    config: LabellingConfig = LabellingConfig(),
) -> IndicatorScores:
    """Score one sample.

    ``row`` maps element name to an observed concentration; absent or
    non-finite entries count as unobserved.  Elements without a background
    value, and non-positive concentrations (below detection), are left out.
    """
    conc = {
        e: float(v)
        for e, v in row.items()
        if e in profile.background and v is not None and math.isfinite(v) and v > 0
    }
    if not conc:
        raise InsufficientElementsError("no element has both a concentration and a background")

    bg = profile.background
    ig = {e: igeo(c, bg[e]) for e, c in conc.items()}
    cf = {e: contamination_factor(c, bg[e]) for e, c in conc.items()}

    ref = profile.reference_element
    ef: dict[str, float] = {}
    ef_score: float | None = None
    if ref in conc:
        ef = {
            e: enrichment_factor(c, conc[ref], bg[e], bg[ref]) for e, c in conc.items() if e != ref
        }
        if ef:
            ef_score = _aggregate([score_ef(v) for v in ef.values()], config.aggregation)
    if ef_score is None and config.ef_on_missing_reference == "error":
        raise MissingReferenceError(
            f"enrichment factor needs reference element {ref!r} and one other element"
        )

    pli = pollution_load_index(list(cf.values()))
    per_cf = {e: v for e, v in cf.items() if e in profile.toxic_response}
    per = potential_ecological_risk(per_cf, profile.toxic_response)

    s_igeo = _aggregate([score_igeo(v) for v in ig.values()], config.aggregation)
    s_pli = score_pli(pli)
    s_per = score_per(per)
    present = [s for s in (s_igeo, ef_score, s_pli, s_per) if s is not None]
    combined = sum(present) / len(present)
    merged = (s_igeo, math.nan if ef_score is None else ef_score, s_pli, s_per)
    return IndicatorScores(ig, ef, pli, per, merged, combined, config.classify(combined))


@dataclass(frozen=True)
class IndexReport:
    row_ids: tuple[str, ...]
    scores: tuple[IndicatorScores, ...]
    elements: tuple[str, ...]

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.scores])

    def label_distribution(self, labels: Sequence[str] | None = None) -> dict[str, int]:
        out = {lab: 0 for lab in (labels or ())}
        for s in self.scores:
            out[s.label] = out.get(s.label, 0) + 1
        return dict(sorted(out.items()))

    def header(self) -> list[str]:
        cols = ["sample_id"]
        cols += [f"igeo_{e}" for e in self.elements]
        cols += [f"ef_{e}" for e in self.elements]
        cols += ["pli", "per", "score_igeo", "score_ef", "score_pli", "score_per", "combined", "label"]
        return cols

    def rows(self):
        for rid, s in zip(self.row_ids, self.scores):
            cells = [rid]
            cells += [_fmt(s.igeo.get(e)) for e in self.elements]
            cells += [_fmt(s.ef.get(e)) for e in self.elements]
            cells += [_fmt(s.pli), _fmt(s.per)]
            cells += [_fmt(v) for v in s.merged_scores]
            cells += [_fmt(s.combined), s.label]
            yield cells

    def write_csv(self, path, header_line: str | None = None) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            if header_line:
                fh.write(header_line + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header())
            w.writerows(self.rows())


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "NA"
    return repr(float(v))


def label_matrix(
    data: DataMatrix, profile: BackgroundProfile, config: LabellingConfig = LabellingConfig()
) -> IndexReport:
    """Apply :func:`label_sample` to every row, skipping masked cells."""
    elements = tuple(c for c in data.col_names if c in profile.background)
    pos = [data.col_names.index(e) for e in elements]
    scores = []
    for i in range(data.n_rows):
        row = {e: data.values[i, j] for e, j in zip(elements, pos) if data.mask[i, j]}
        scores.append(label_sample(row, profile, config))
    return IndexReport(data.row_ids, tuple(scores), elements)
