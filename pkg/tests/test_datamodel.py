import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sedml.datamodel import (
    DataError,
    DataMatrix,
    DegenerateSplitError,
    LabeledDataset,
    RaggedRowError,
    SplitSpec,
    UnparsableCellError,
    load_csv,
    load_labeled_csv,
    train_test_split,
    write_csv,
    write_labeled_csv,
)


def _write(tmp_path, text, name="t.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_empty_cell_is_the_only_masked_cell(tmp_path):
    m = load_csv(_write(tmp_path, "a,b\n1,2\n,4\n5,6\n"))
    assert m.shape == (3, 2)
    assert (~m.mask).sum() == 1 and not m.mask[1, 0]


def test_bdl_token_is_masked(tmp_path):
    m = load_csv(_write(tmp_path, "a,b\n1,BDL\n"))
    assert m.mask.tolist() == [[True, False]]


def test_custom_missing_tokens(tmp_path):
    m = load_csv(_write(tmp_path, "a,b\n1,<LOD\n"), missing_tokens=["<LOD"])
    assert m.mask.tolist() == [[True, False]]


def test_ragged_row_and_bad_cell(tmp_path):
    with pytest.raises(RaggedRowError):
        load_csv(_write(tmp_path, "a,b\n1,2,3\n"))
    with pytest.raises(UnparsableCellError):
        load_csv(_write(tmp_path, "a,b\n1,abc\n"))
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "nope.csv")


def test_id_column_and_comment_header(tmp_path):
    m = load_csv(_write(tmp_path, "# sedml-schema: x/1\nid,a\ns1,1\ns2,NA\n"), id_column="id")
    assert m.row_ids == ("s1", "s2") and m.col_names == ("a",)


def test_invariants_enforced():
    with pytest.raises(DataError):
        DataMatrix(np.zeros((2, 2)), np.ones((2, 3), bool), ("a", "b"), ("0", "1"))
    with pytest.raises(DataError):
        DataMatrix.from_array(np.zeros((2, 2)), col_names=["a", "a"])
    with pytest.raises(DataError):
        DataMatrix.from_array(np.zeros((2, 2)), row_ids=["r", "r"])
    with pytest.raises(DataError):
        LabeledDataset(DataMatrix.from_array([[1.0, np.nan]]), ["A"])
    with pytest.raises(DataError):
        LabeledDataset(DataMatrix.from_array([[1.0, 2.0]]), ["A", "B"])


def test_matrix_is_immutable():
    m = DataMatrix.from_array([[1.0, 2.0]])
    with pytest.raises(ValueError):
        m.values[0, 0] = 5.0


def test_bundled_table_schema():
    from conftest import DATA

    m = load_csv(DATA / "synthetic_sediment.csv", id_column="sample_id")
    assert m.shape == (240, 25)
    # masked to about 53% missing, in line with the refined field table
    assert abs(m.observed_fraction - 0.47) < 0.01
    assert abs(m.observed_fraction + m.missing_rate - 1.0) < 1e-15


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@given(
    arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 5)), elements=finite),
    st.data(),
)
def test_csv_round_trip(tmp_path_factory, values, data):
    mask = data.draw(arrays(bool, values.shape))
    m = DataMatrix.from_array(values, mask)
    path = tmp_path_factory.mktemp("rt") / "m.csv"
    write_csv(m, path, missing_token="NA")
    back = load_csv(path, id_column="sample_id")
    assert np.array_equal(back.mask, m.mask)
    assert np.array_equal(back.values[m.mask], m.values[m.mask])
    assert back.col_names == m.col_names and back.row_ids == m.row_ids


def test_labeled_round_trip(tmp_path):
    ds = LabeledDataset(DataMatrix.from_array([[1.5, 2.0], [3.0, 4.25]]), ["A", "C"])
    write_labeled_csv(ds, tmp_path / "l.csv", header_line="# sedml-schema: dataset/1")
    back = load_labeled_csv(tmp_path / "l.csv", id_column="sample_id")
    assert np.array_equal(back.X, ds.X) and back.labels.tolist() == ["A", "C"]


def _ten_rows(labels=None):
    labels = labels if labels is not None else ["A"] * 5 + ["B"] * 5
    return LabeledDataset(DataMatrix.from_array(np.arange(len(labels) * 2.0).reshape(-1, 2)), labels)


def test_split_cardinality_and_determinism():
    ds = _ten_rows()
    tr, te = train_test_split(ds, SplitSpec(0.3, seed=1, stratified=False))
    assert (len(tr), len(te)) == (7, 3)
    assert not set(tr.features.row_ids) & set(te.features.row_ids)
    tr2, te2 = train_test_split(ds, SplitSpec(0.3, seed=1, stratified=False))
    assert tr2.features.row_ids == tr.features.row_ids and te2.features.row_ids == te.features.row_ids


def _within_one(counts, n_part, n_total, totals):
    return all(abs(counts.get(c, 0) - totals[c] * n_part / n_total) <= 1 + 1e-9 for c in totals)


def test_stratified_split_matches_enumerated_oracle():
    ds = _ten_rows()
    tr, te = train_test_split(ds, SplitSpec(0.4, seed=3))
    assert te.class_counts() == {"A": 2, "B": 2}
    # oracle: enumerate all 4-subsets and keep those closest to the 40% quota of each class
    labels = np.array(ds.labels)
    deviation = {}
    for c in itertools.combinations(range(10), 4):
        n_a = int((labels[list(c)] == "A").sum())
        deviation.setdefault(max(abs(n_a - 2.0), abs(4 - n_a - 2.0)), set()).add((n_a, 4 - n_a))
    assert deviation[min(deviation)] == {(2, 2)}


@given(st.lists(st.sampled_from("ABC"), min_size=6, max_size=40), st.integers(0, 10_000), st.floats(0.1, 0.5))
def test_split_properties(labels, seed, frac):
    counts = {c: labels.count(c) for c in set(labels)}
    ds = _ten_rows(labels)
    spec = SplitSpec(frac, seed=seed)
    try:
        tr, te = train_test_split(ds, spec)
    except DegenerateSplitError:
        assert min(counts.values()) < 2 or round(frac * len(labels)) in (0, len(labels))
        return
    ids = set(tr.features.row_ids) | set(te.features.row_ids)
    assert len(tr) + len(te) == len(labels) and len(ids) == len(labels)
    assert _within_one(te.class_counts(), len(te), len(labels), counts)
    assert _within_one(tr.class_counts(), len(tr), len(labels), counts)
    tr2, te2 = train_test_split(ds, spec)
    assert te2.features.row_ids == te.features.row_ids


def test_split_rejects_degenerate():
    with pytest.raises(DegenerateSplitError):
        train_test_split(_ten_rows(["A"] * 9 + ["B"]), SplitSpec(0.3))
    with pytest.raises(DegenerateSplitError):
        train_test_split(_ten_rows(["A", "B"]), SplitSpec(0.1, stratified=False))
    with pytest.raises(ValueError):
        SplitSpec(1.0)
