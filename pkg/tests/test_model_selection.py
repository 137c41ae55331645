import warnings

import numpy as np
import pytest

from conftest import records_from_tuples
from slidesearch.cohort import Cohort
from slidesearch.model_selection import (assign_folds, assign_groups,
                                         fold_patient_counts)


def cohort_from(rows):
    return Cohort.from_slides(records_from_tuples(rows))


def test_six_patients_one_label_split_evenly():
    rows = [(f"s{i}", f"p{i}", "lung", "a") for i in range(6)]
    folds = assign_folds(cohort_from(rows), k=3, seed=0)
    counts = [len(folds.patients_in(f)) for f in range(3)]
    assert counts == [2, 2, 2]


def test_all_slides_of_a_patient_share_a_fold():
    rows = [(f"s{i}", f"p{i % 4}", "lung", "a") for i in range(12)]
    cohort = cohort_from(rows)
    folds = assign_folds(cohort, k=2, seed=1)
    slide_folds = folds.slide_folds(cohort.slides)
    for rec in cohort.slides:
        assert slide_folds[rec.slide_id] == folds.fold_of(rec.patient_id)


def test_balance_within_each_label():
    rng = np.random.default_rng(7)
    for trial in range(15):
        rows = []
        sid = 0
        for g, n_pat in enumerate(rng.integers(3, 12, size=4)):
            for p in range(int(n_pat)):
                for s in range(int(rng.integers(1, 3))):
                    rows.append((f"s{sid}", f"p{g}_{p}", "lung", f"dx{g}"))
                    sid += 1
        cohort = cohort_from(rows)
        folds = assign_folds(cohort, k=3, seed=trial)
        for lab, counts in fold_patient_counts(folds, cohort).items():
            assert max(counts) - min(counts) <= 1, (trial, lab, counts)


def test_warns_when_label_has_fewer_groups_than_k():
    rows = [("s0", "p0", "lung", "rare"),
            ("s1", "p1", "lung", "common"),
            ("s2", "p2", "lung", "common"),
            ("s3", "p3", "lung", "common")]
    with pytest.warns(UserWarning, match="fewer than"):
        assign_folds(cohort_from(rows), k=3, seed=0)


def test_deterministic_for_fixed_seed():
    rows = [(f"s{i}", f"p{i}", "lung", f"dx{i % 3}") for i in range(20)]
    cohort = cohort_from(rows)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = assign_folds(cohort, k=3, seed=5)
        b = assign_folds(cohort, k=3, seed=5)
        c = assign_folds(cohort, k=3, seed=6)
    assert a.assignment == b.assignment
    assert a.assignment != c.assignment


def test_multi_label_group_keeps_first_assignment():
    groups = {("lung", "a"): {"p1", "p2", "p3", "p4"},
              ("lung", "b"): {"p1", "p5", "p6", "p7"}}
    assignment = assign_groups(groups, k=2, seed=0)
    assert len(assignment) == 7
    assert set(assignment.values()) <= {0, 1}


def test_k_below_two_rejected():
    with pytest.raises(ValueError):
        assign_groups({"a": {"p1", "p2"}}, k=1, seed=0)


def test_every_patient_assigned_exactly_once():
    rows = [(f"s{i}", f"p{i % 9}", "lung" if i % 2 else "skin",
             f"dx{i % 3}") for i in range(30)]
    cohort = cohort_from(rows)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        folds = assign_folds(cohort, k=3, seed=2)
    patients = {rec.patient_id for rec in cohort.slides}
    assert set(folds.assignment) == patients
    assert set(folds.assignment.values()) <= {0, 1, 2}
