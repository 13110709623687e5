import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from sedml.datamodel import DataMatrix
from sedml.indices import (
    BackgroundProfile,
    EmptyFactorListError,
    InsufficientElementsError,
    LabellingConfig,
    MissingReferenceError,
    MissingToxicResponseError,
    NonFiniteInputError,
    NonPositiveBackgroundError,
    NonPositiveInputError,
    contamination_factor,
    enrichment_factor,
    igeo,
    label_matrix,
    label_sample,
    load_profile,
    pollution_load_index,
    potential_ecological_risk,
    score_ef,
    score_igeo,
    score_per,
    score_pli,
)

# expected values below come from direct arithmetic: log2(48/1.5) = log2(32) = 5,
# (10/2)/(1/1) = 5, sqrt(4*1) = 2, cbrt(8*1*1) = 2, 30*2 = 60, 5*1 + 5*1 = 10


def test_igeo_examples():
    assert igeo(1.5, 1.0) == 0.0
    assert igeo(3.0, 1.0) == 1.0
    assert igeo(48.0, 1.0) == pytest.approx(math.log2(48 / 1.5), abs=1e-15)
    assert igeo(48.0, 1.0) == pytest.approx(5.0, abs=1e-12)


def test_enrichment_factor_examples():
    assert enrichment_factor(4.0, 2.0, 2.0, 1.0) == 1.0
    assert enrichment_factor(8.0, 2.0, 2.0, 1.0) == 2.0
    assert enrichment_factor(10.0, 2.0, 1.0, 1.0) == 5.0


def test_pli_examples():
    assert pollution_load_index([1.0, 1.0, 1.0]) == 1.0
    assert pollution_load_index([4.0, 1.0]) == pytest.approx(2.0, abs=1e-15)
    assert pollution_load_index([8.0, 1.0, 1.0]) == pytest.approx(2.0, abs=1e-15)


def test_per_examples():
    assert potential_ecological_risk({"Cu": 0.0}, {"Cu": 1.0}) == 0.0
    assert potential_ecological_risk({"Cd": 2.0}, {"Cd": 30.0}) == 60.0
    assert potential_ecological_risk({"Cu": 1.0, "Pb": 1.0}, {"Cu": 5.0, "Pb": 5.0}) == 10.0


def test_indicator_errors():
    with pytest.raises(NonPositiveBackgroundError):
        igeo(1.0, 0.0)
    with pytest.raises(NonPositiveInputError):
        igeo(-1.0, 1.0)
    assert igeo(0.0, 1.0) == -math.inf and score_igeo(-1e300) == 0.0
    with pytest.raises(NonPositiveInputError):
        enrichment_factor(0.0, 1.0, 1.0, 1.0)
    with pytest.raises(NonPositiveBackgroundError):
        contamination_factor(1.0, 0.0)
    with pytest.raises(EmptyFactorListError):
        pollution_load_index([])
    with pytest.raises(MissingToxicResponseError):
        potential_ecological_risk({"Zz": 1.0}, {"Cu": 5.0})
    with pytest.raises(NonFiniteInputError):
        score_pli(float("nan"))


def test_score_examples():
    assert score_igeo(-1) == 0 and score_igeo(2) == 10 and score_igeo(7) == 25
    assert score_ef(1) == 0 and score_ef(40) == 25
    assert score_ef(21) == pytest.approx(25 * 19 / 38, abs=1e-12) == 12.5
    assert score_pli(0.5) == 0 and score_pli(5) == 25 and score_pli(3) == 12.5
    assert score_per(30) == 0 and score_per(320) == 25 and score_per(180) == 12.5


@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6), st.floats(1e-3, 1e3))
def test_igeo_scale_covariance(c, b, k):
    assert igeo(c * k, b * k) == pytest.approx(igeo(c, b), abs=1e-9)


@given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=12), st.randoms())
def test_pli_permutation_invariance(cfs, rnd):
    shuffled = list(cfs)
    rnd.shuffle(shuffled)
    assert pollution_load_index(shuffled) == pytest.approx(pollution_load_index(cfs), rel=1e-12)


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_scores_monotone_and_bounded(x, y):
    lo, hi = min(x, y), max(x, y)
    for f in (score_igeo, score_ef, score_pli, score_per):
        assert 0.0 <= f(lo) <= f(hi) <= 25.0


PROFILE = BackgroundProfile(
    background={"Al": 1.0, "Cu": 1.0, "Pb": 1.0},
    reference_element="Al",
    toxic_response={"Cu": 5.0, "Pb": 5.0},
)


def test_background_level_sample_is_a():
    s = label_sample({"Al": 1.5, "Cu": 1.5, "Pb": 1.5}, PROFILE)
    # Igeo 0, EF 1, PLI 1.5, PER 15: only the PLI ramp contributes, 25*0.5/4
    assert s.merged_scores[:2] == (0.0, 0.0) and s.merged_scores[3] == 0.0
    assert s.combined == pytest.approx(25 * 0.5 / 4 / 4, abs=1e-12)
    assert s.label == "A"
    at_background = label_sample({"Al": 1.0, "Cu": 1.0, "Pb": 1.0}, PROFILE)
    assert at_background.combined == 0.0 and at_background.label == "A"


def test_saturated_sample_is_c():
    s = label_sample({"Al": 1.0, "Cu": 1e4, "Pb": 1e4}, PROFILE)
    # Al stays at background, so its Igeo is 0 and the mean Igeo score is 25*2/3
    assert s.merged_scores[1:] == (25.0, 25.0, 25.0)
    assert s.label == "C"
    assert label_sample({"Al": 1e4, "Cu": 1e6, "Pb": 1e6}, PROFILE).combined == 25.0


def test_mid_range_sample_composes_scalar_oracles():
    row = {"Al": 2.0, "Cu": 24.0, "Pb": 12.0}
    s = label_sample(row, PROFILE)
    ig = [math.log2(c / 1.5) for c in row.values()]
    ef = [(24.0 / 2.0), (12.0 / 2.0)]
    pli = (2.0 * 24.0 * 12.0) ** (1 / 3)
    per = 5 * 24.0 + 5 * 12.0
    expected = [
        np.mean([min(max(5 * v, 0), 25) for v in ig]),
        np.mean([min(max(25 * (v - 2) / 38, 0), 25) for v in ef]),
        min(max(25 * (pli - 1) / 4, 0), 25),
        min(max(25 * (per - 40) / 280, 0), 25),
    ]
    assert s.merged_scores == pytest.approx(tuple(expected), abs=1e-12)
    assert s.combined == pytest.approx(np.mean(expected), abs=1e-12)
    assert s.label == "B"


def test_aggregation_max_and_missing_reference():
    row = {"Al": 2.0, "Cu": 24.0, "Pb": 12.0}
    mean = label_sample(row, PROFILE)
    worst = label_sample(row, PROFILE, LabellingConfig(aggregation="max"))
    assert worst.merged_scores[0] >= mean.merged_scores[0]
    with pytest.raises(MissingReferenceError):
        label_sample({"Cu": 2.0, "Pb": 2.0}, PROFILE)
    skipped = label_sample({"Cu": 2.0, "Pb": 2.0}, PROFILE, LabellingConfig(ef_on_missing_reference="skip"))
    assert math.isnan(skipped.merged_scores[1])
    assert skipped.combined == pytest.approx(np.mean([skipped.merged_scores[i] for i in (0, 2, 3)]))
    with pytest.raises(InsufficientElementsError):
        label_sample({"Zn": 3.0}, PROFILE)


def test_elements_without_background_are_ignored():
    a = label_sample({"Al": 2.0, "Cu": 24.0, "Pb": 12.0}, PROFILE)
    b = label_sample({"Al": 2.0, "Cu": 24.0, "Pb": 12.0, "Unobtainium": 1e9}, PROFILE)
    assert a.combined == b.combined


@given(
    st.lists(st.floats(0.01, 1e4), min_size=3, max_size=3),
    st.lists(st.floats(1.0, 10.0), min_size=3, max_size=3),
)
def test_label_monotone_in_concentrations(conc, factors):
    row = dict(zip(("Al", "Cu", "Pb"), conc))
    up = {e: v * f for (e, v), f in zip(row.items(), factors)}
    # the EF double ratio falls when the reference rises faster than the others,
    # so monotonicity is claimed for a common multiplier on the numerator elements
    up["Al"] = row["Al"]
    order = {"A": 0, "B": 1, "C": 2}
    assert order[label_sample(up, PROFILE).label] >= order[label_sample(row, PROFILE).label]


@given(st.dictionaries(st.sampled_from(["Al", "Cu", "Pb"]), st.floats(1e-3, 1e5), min_size=1))
def test_combined_in_range(row):
    assume("Al" in row and len(row) > 1)
    s = label_sample(row, PROFILE)
    assert all(0 <= v <= 25 for v in s.merged_scores)
    assert 0 <= s.combined <= 25


def test_label_matrix_skips_masked_cells():
    m = DataMatrix.from_array([[2.0, 24.0, np.nan], [1.0, 1.0, 1.0], [2.0, 24.0, 12.0]], col_names=["Al", "Cu", "Pb"])
    rep = label_matrix(m, PROFILE)
    assert len(rep.scores) == 3
    assert rep.scores[0].combined == label_sample({"Al": 2.0, "Cu": 24.0}, PROFILE).combined
    assert rep.labels.tolist()[1] == "A"
    assert sum(rep.label_distribution().values()) == 3


def test_bundled_profile():
    profile, config = load_profile()
    assert profile.reference_element == "Al"
    assert len(profile.background) == 25
    assert config.thresholds == (5.0, 15.0) and config.labels == ("A", "B", "C")
    assert profile.toxic_response["Cd"] == 30.0 and profile.toxic_response["Hg"] == 40.0


def test_labelling_config_validation():
    with pytest.raises(ValueError):
        LabellingConfig(aggregation="median")
    with pytest.raises(ValueError):
        LabellingConfig(thresholds=(15.0, 5.0))
    with pytest.raises(ValueError):
        LabellingConfig(labels=("A", "B"))
    assert LabellingConfig().classify(4.999) == "A"
    assert LabellingConfig().classify(5.0) == "B"
    assert LabellingConfig().classify(15.0) == "C"


@given(st.lists(st.floats(0.01, 1e4), min_size=3, max_size=3), st.floats(1.0, 100.0))
def test_label_monotone_under_common_scaling(conc, k):
    row = dict(zip(("Al", "Cu", "Pb"), conc))
    up = {e: v * k for e, v in row.items()}
    order = {"A": 0, "B": 1, "C": 2}
    assert order[label_sample(up, PROFILE).label] >= order[label_sample(row, PROFILE).label]


def test_raising_the_reference_lowers_the_ef_score():
    # counterexample showing why the reference element is held fixed above
    row = {"Al": 1.0, "Cu": 30.0, "Pb": 30.0}
    up = {"Al": 1e3, "Cu": 30.0, "Pb": 30.0}
    assert label_sample(up, PROFILE).merged_scores[1] < label_sample(row, PROFILE).merged_scores[1]
