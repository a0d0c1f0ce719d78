import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import balanced_assignment
from manifold_ssl.dataset import (ClinicalRecord, Label, ModalityMatrix, VitalStatus, derive_labels, load_clinical,
                                  load_feature_matrix, make_split, write_clinical, write_feature_matrix,
                                  years_to_days)
from manifold_ssl.errors import ConfigError, FormatError, IntegrityError, ParseError


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_well_formed(tmp_path):
    p = write(tmp_path / "g.csv", "sample_id,a,b\nS1,1,2\nS2,3,4\nS3,5,6.5\n")
    m = load_feature_matrix(p, "gene")
    assert m.shape == (3, 2)
    assert m.sample_ids == ("S1", "S2", "S3")
    assert m.feature_ids == ("a", "b")
    assert m.values[2, 1] == 6.5


def test_ragged_row_names_line(tmp_path):
    p = write(tmp_path / "g.csv", "sample_id,a,b\nS1,1,2\nS2,3\n")
    with pytest.raises(FormatError, match="line 3"):
        load_feature_matrix(p, "gene")


def test_duplicate_sample(tmp_path):
    p = write(tmp_path / "g.csv", "sample_id,a\nS1,1\nS1,2\n")
    with pytest.raises(IntegrityError, match="S1"):
        load_feature_matrix(p, "gene")


def test_non_numeric_cell(tmp_path):
    p = write(tmp_path / "g.csv", "sample_id,a,b\nS1,1,x\n")
    with pytest.raises(ParseError, match="line 2"):
        load_feature_matrix(p, "gene")


def test_bad_header(tmp_path):
    with pytest.raises(FormatError):
        load_feature_matrix(write(tmp_path / "g.csv", "id,a\nS1,1\n"), "gene")
    with pytest.raises(FormatError):
        load_feature_matrix(write(tmp_path / "e.csv", ""), "gene")


def test_matrix_is_read_only_and_rows_ordered():
    m = ModalityMatrix("m", ["a", "b", "c"], ["f"], [[1.0], [2.0], [3.0]])
    assert m.rows(["c", "a"]).ravel().tolist() == [3.0, 1.0]
    with pytest.raises(ValueError):
        m.values[0, 0] = 9
    with pytest.raises(IntegrityError):
        m.rows(["zz"])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_feature_roundtrip(tmp_path_factory, n, d, seed):
    rng = np.random.default_rng(seed)
    m = ModalityMatrix("m", [f"s{i}" for i in range(n)], [f"f{j}" for j in range(d)], rng.normal(size=(n, d)) * 1e3)
    p = tmp_path_factory.mktemp("rt") / "m.csv"
    write_feature_matrix(p, m)
    back = load_feature_matrix(p, "m")
    assert back.sample_ids == m.sample_ids
    assert np.array_equal(back.values, m.values)


def test_years_to_days():
    assert years_to_days(5) == 1825
    assert years_to_days(0.5) == 183


@pytest.mark.parametrize("record, expected", [
    (ClinicalRecord("a", VitalStatus.DECEASED, survival_days=1460), Label.NEGATIVE),
    (ClinicalRecord("a", VitalStatus.ALIVE, last_followup_days=2190), Label.POSITIVE),
    (ClinicalRecord("a", VitalStatus.ALIVE, last_followup_days=1100), Label.UNLABELED),
    (ClinicalRecord("a", VitalStatus.DECEASED, survival_days=1825), Label.POSITIVE),
    (ClinicalRecord("a", VitalStatus.ALIVE, last_followup_days=1825), Label.POSITIVE),
])
def test_label_rule(record, expected):
    assert derive_labels([record], 1825).labels["a"] is expected


def test_record_needs_matching_day_field():
    with pytest.raises(FormatError):
        ClinicalRecord("a", VitalStatus.DECEASED, last_followup_days=10)
    with pytest.raises(FormatError):
        ClinicalRecord("a", VitalStatus.ALIVE, survival_days=10, last_followup_days=10)


def test_duplicate_clinical_ids():
    recs = [ClinicalRecord("a", VitalStatus.ALIVE, last_followup_days=10)] * 2
    with pytest.raises(IntegrityError):
        derive_labels(recs, 1825)


def test_clinical_roundtrip(tmp_path):
    recs = [ClinicalRecord("a", VitalStatus.ALIVE, last_followup_days=10),
            ClinicalRecord("b", VitalStatus.DECEASED, survival_days=3000)]
    write_clinical(tmp_path / "c.csv", recs)
    assert load_clinical(tmp_path / "c.csv") == recs


def test_clinical_bad_status(tmp_path):
    p = write(tmp_path / "c.csv", "sample_id,vital_status,survival_days,last_followup_days\na,zombie,1,\n")
    with pytest.raises(ParseError, match="line 2"):
        load_clinical(p)


def test_split_sizes_100_balanced():
    a = balanced_assignment(50, 50)
    plan = make_split(a, seed=7)
    assert len(plan.validation_ids) == 15
    assert sorted(len(f) for f in plan.folds) == [17] * 5


def test_split_deterministic():
    a = balanced_assignment(30, 41, 12)
    assert make_split(a, 3).to_dict() == make_split(a, 3).to_dict()
    assert make_split(a, 3).to_dict() != make_split(a, 4).to_dict()


def test_split_too_small():
    with pytest.raises(ConfigError):
        make_split(balanced_assignment(3, 3), seed=0, n_folds=5)


@settings(max_examples=40, deadline=None)
@given(st.integers(6, 60), st.integers(6, 60), st.integers(0, 20), st.integers(0, 10_000))
def test_split_partitions_labeled(n_pos, n_neg, n_unl, seed):
    a = balanced_assignment(n_pos, n_neg, n_unl)
    plan = make_split(a, seed)
    parts = [*plan.validation_ids, *(i for f in plan.folds for i in f)]
    assert sorted(parts) == sorted(a.labeled_ids)
    assert sorted(plan.unlabeled_ids) == sorted(a.unlabeled_ids)
    # stratification: class counts per fold differ by at most one
    for lab in (Label.POSITIVE, Label.NEGATIVE):
        counts = [sum(a.labels[i] is lab for i in f) for f in plan.folds]
        assert max(counts) - min(counts) <= 1
        assert min(counts) >= 1
    assert plan.training_ids({0}) == [i for f in plan.folds[1:] for i in f]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.integers(0, 5000)), min_size=1, max_size=40),
       st.integers(1, 4000), st.integers(0, 2000))
def test_raising_threshold_never_promotes(entries, low, bump):
    recs = [ClinicalRecord(f"s{i}", VitalStatus.DECEASED, survival_days=d) if dead
            else ClinicalRecord(f"s{i}", VitalStatus.ALIVE, last_followup_days=d)
            for i, (dead, d) in enumerate(entries)]
    a, b = derive_labels(recs, low), derive_labels(recs, low + bump)
    assert len(a.labels) == len(b.labels) == len(recs)
    for sid, lab in a.labels.items():
        if lab is Label.NEGATIVE:
            assert b.labels[sid] is Label.NEGATIVE
