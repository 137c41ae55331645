import math

import numpy as np
import pytest

from slidesearch.cohort import DiagnosisLabel
from slidesearch.metrics import (Prediction, aggregate_patient_predictions,
                                 majority_vote, misclassification_profile,
                                 organ_macro_f1, organ_summary,
                                 per_diagnosis_f1, pooled_f1, win_counts)
from slidesearch.retrieval import Neighbor, RetrievalResult


def lab(dx, organ="lung"):
    return DiagnosisLabel(organ=organ, diagnosis=dx)


def result(query, pairs):
    return RetrievalResult(
        query_slide_id=query, model_name="m",
        neighbors=tuple(Neighbor(s, d) for s, d in pairs),
        shortfall=False)


def pred(slide, true_dx, pred_dx, patient="", rank1=math.nan):
    return Prediction(query_slide_id=slide, true_label=lab(true_dx),
                      predicted_label=lab(pred_dx), n_used=1,
                      patient_id=patient, rank1_distance=rank1)


# --- majority vote ---

LABELS = {
    "q": lab("x"),
    "n1": lab("a"), "n2": lab("a"), "n3": lab("b"), "n4": lab("b"),
    "n5": lab("c"),
}


def test_majority_two_against_one():
    res = result("q", [("n1", 1.0), ("n3", 2.0), ("n2", 3.0)])
    p = majority_vote(res, LABELS, n=3)
    assert p.predicted_label == lab("a")
    assert p.true_label == lab("x")
    assert p.n_used == 3
    assert p.rank1_distance == 1.0


def test_vote_tie_goes_to_nearest_tied_label():
    # one vote each; b is nearer than a
    res = result("q", [("n3", 0.5), ("n1", 1.5)])
    assert majority_vote(res, LABELS, n=2).predicted_label == lab("b")
    # 2 a's vs 2 b's; nearest neighbor holds b
    res = result("q", [("n4", 0.1), ("n1", 0.2), ("n3", 0.3), ("n2", 0.4)])
    assert majority_vote(res, LABELS, n=4).predicted_label == lab("b")


def test_top_one_uses_nearest():
    res = result("q", [("n5", 0.9), ("n1", 1.0), ("n2", 1.1)])
    p = majority_vote(res, LABELS, n=1)
    assert p.predicted_label == lab("c")
    assert p.n_used == 1


def test_vote_with_fewer_neighbors_than_n():
    res = result("q", [("n1", 1.0)])
    p = majority_vote(res, LABELS, n=5)
    assert p.n_used == 1
    assert p.predicted_label == lab("a")


def test_vote_requires_neighbors():
    empty = RetrievalResult(query_slide_id="q", model_name="m",
                            neighbors=(), shortfall=True)
    with pytest.raises(ValueError):
        majority_vote(empty, LABELS, n=1)


# --- per-diagnosis F1 ---

def test_f1_worked_example():
    # truths A A B B, predictions A B B B
    preds = [pred("s1", "A", "A"), pred("s2", "A", "B"),
             pred("s3", "B", "B"), pred("s4", "B", "B")]
    scores = {s.label.diagnosis: s for s in per_diagnosis_f1(preds)}
    a, b = scores["A"], scores["B"]
    assert (a.precision, a.recall, a.support) == (1.0, 0.5, 2)
    assert a.f1 == pytest.approx(2 / 3)
    assert b.precision == pytest.approx(2 / 3)
    assert (b.recall, b.support) == (1.0, 2)
    assert b.f1 == pytest.approx(0.8)
    assert organ_macro_f1(scores.values()) == pytest.approx(11 / 15)


def test_label_never_predicted_scores_zero():
    preds = [pred("s1", "A", "B"), pred("s2", "A", "B")]
    scores = {s.label.diagnosis: s for s in per_diagnosis_f1(preds)}
    assert scores["A"].f1 == 0.0
    assert scores["A"].support == 2
    assert scores["B"].support == 0
    # support-0 label excluded from the macro average
    assert organ_macro_f1(scores.values()) == 0.0


def test_macro_skips_support_zero():
    preds = [pred("s1", "A", "A"), pred("s2", "A", "B")]
    scores = per_diagnosis_f1(preds)
    assert {s.label.diagnosis for s in scores} == {"A", "B"}
    # A: tp=1 fn=1 -> p=1, r=0.5, f1=2/3; B has support 0 and is skipped
    assert organ_macro_f1(scores) == pytest.approx(2 / 3)


def test_scores_sorted_by_label():
    preds = [pred("s1", "z", "z"), pred("s2", "a", "a"),
             Prediction("s3", lab("m", organ="skin"),
                        lab("m", organ="skin"), 1)]
    labels = [s.label for s in per_diagnosis_f1(preds)]
    assert labels == sorted(labels)


def test_perfect_predictions():
    preds = [pred(f"s{i}", dx, dx) for i, dx in
             enumerate(["A", "A", "B", "C"])]
    assert organ_macro_f1(per_diagnosis_f1(preds)) == 1.0


# --- organ summary ---

def standardized(seed, n):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=n)
    return (z - z.mean()) / z.std(ddof=1)


def test_summary_frozen_seventeen_organ_case():
    values = 0.689 + 0.209 * standardized(0, 17)
    s = organ_summary(values)
    assert s.mean == pytest.approx(0.689, abs=1e-12)
    assert s.sd == pytest.approx(0.209, abs=1e-12)
    assert s.n == 17
    assert s.ci_low == pytest.approx(0.582, abs=0.002)
    assert s.ci_high == pytest.approx(0.796, abs=0.002)


def test_summary_constant_values():
    s = organ_summary([0.7, 0.7, 0.7, 0.7])
    assert (s.mean, s.sd) == (0.7, 0.0)
    assert (s.ci_low, s.ci_high) == (0.7, 0.7)


def test_summary_single_value_is_point():
    s = organ_summary([0.42])
    assert (s.mean, s.sd, s.ci_low, s.ci_high, s.n) == \
        (0.42, 0.0, 0.42, 0.42, 1)


def test_summary_two_values_uses_heavy_tail():
    # t(0.975, 1) = 12.7062...; half-width = crit * sd / sqrt(2)
    s = organ_summary([0.0, 1.0])
    assert s.mean == 0.5
    assert s.sd == pytest.approx(math.sqrt(0.5), abs=1e-12)
    assert s.ci_low == pytest.approx(-5.8531, abs=1e-4)
    assert s.ci_high == pytest.approx(6.8531, abs=1e-4)


def test_summary_rejects_empty():
    with pytest.raises(ValueError):
        organ_summary([])


# --- win counts ---

def test_win_counts_example():
    matrix = {"organ1": {"m1": 0.9, "m2": 0.8},
              "organ2": {"m1": 0.7, "m2": 0.7}}
    assert win_counts(matrix) == {"m1": 2, "m2": 1}


def test_win_counts_rounds_before_comparing():
    matrix = {"r": {"m1": 0.904, "m2": 0.896}}  # both round to 0.90
    assert win_counts(matrix) == {"m1": 1, "m2": 1}


def test_degenerate_rows_skipped_when_asked():
    matrix = {"r0": {"m1": 0.001, "m2": 0.0},     # all round to 0
              "r1": {"m1": 0.999, "m2": 1.0},     # all round to 1
              "r2": {"m1": 0.5, "m2": 0.4}}
    assert win_counts(matrix, skip_degenerate_ties=True) == \
        {"m1": 1, "m2": 0}
    assert win_counts(matrix) == {"m1": 3, "m2": 2}


def test_win_counts_matches_argmax_oracle():
    rng = np.random.default_rng(5)
    models = ["a", "b", "c"]
    matrix = {f"r{i}": {m: float(rng.integers(0, 100)) / 100
                        for m in models} for i in range(5)}
    want = {m: 0 for m in models}
    for row in matrix.values():
        best = max(round(v, 2) for v in row.values())
        for m, v in row.items():
            if round(v, 2) == best:
                want[m] += 1
    assert win_counts(matrix) == want


# --- misclassification profile ---

def test_profile_only_counts_errors_in_support_window():
    preds = (
        [pred(f"a{i}", "rare", "other") for i in range(3)]      # support 3
        + [pred(f"b{i}", "hit", "miss") for i in range(5)]      # support 5
        + [pred(f"c{i}", "big", "wrong") for i in range(9)]     # support 9
    )
    profile = misclassification_profile(preds, support_range=(5, 7))
    assert set(profile) == {lab("hit")}
    assert profile[lab("hit")] == {lab("miss"): 5}


def test_profile_splits_wrong_targets():
    preds = ([pred(f"s{i}", "X", "P") for i in range(3)]
             + [pred(f"t{i}", "X", "Q") for i in range(2)]
             + [pred("u0", "X", "X")])  # correct, not profiled
    profile = misclassification_profile(preds, support_range=(5, 7))
    assert profile[lab("X")] == {lab("P"): 3, lab("Q"): 2}


def test_fully_correct_label_absent():
    preds = [pred(f"s{i}", "X", "X") for i in range(6)]
    assert misclassification_profile(preds) == {}


# --- pooling ---

def test_pooled_single_fold_identity():
    preds = [pred("s1", "A", "A"), pred("s2", "A", "B"),
             pred("s3", "B", "B"), pred("s4", "B", "B")]
    assert pooled_f1([preds]) == per_diagnosis_f1(preds)


def test_pooled_concatenates_folds():
    fold1 = [pred("s1", "A", "A"), pred("s2", "B", "A")]
    fold2 = [pred("s3", "A", "B"), pred("s4", "B", "B")]
    assert pooled_f1([fold1, fold2]) == per_diagnosis_f1(fold1 + fold2)


# --- patient aggregation ---

def test_per_slide_mode_is_identity():
    preds = [pred("s1", "A", "A", patient="p1", rank1=1.0),
             pred("s2", "A", "B", patient="p1", rank1=2.0)]
    assert aggregate_patient_predictions(preds, mode="per-slide") == preds


def test_patient_vote_majority():
    preds = [pred("s1", "A", "A", patient="p1", rank1=3.0),
             pred("s2", "A", "A", patient="p1", rank1=2.0),
             pred("s3", "A", "B", patient="p1", rank1=1.0)]
    out = aggregate_patient_predictions(preds, mode="vote")
    assert len(out) == 1
    assert out[0].predicted_label == lab("A")


def test_patient_vote_tie_breaks_by_rank1_distance():
    preds = [pred("s1", "A", "A", patient="p1", rank1=5.0),
             pred("s2", "A", "B", patient="p1", rank1=1.0)]
    out = aggregate_patient_predictions(preds, mode="vote")
    assert out[0].predicted_label == lab("B")


def test_best_slide_mode():
    preds = [pred("s1", "A", "A", patient="p1", rank1=5.0),
             pred("s2", "A", "B", patient="p1", rank1=1.0),
             pred("s3", "A", "A", patient="p2", rank1=0.5)]
    out = aggregate_patient_predictions(preds, mode="best-slide")
    assert [(p.query_slide_id, p.predicted_label.diagnosis) for p in out] \
        == [("s2", "B"), ("s3", "A")]


def test_patient_with_two_true_labels_scored_per_label():
    preds = [pred("s1", "A", "A", patient="p1", rank1=1.0),
             pred("s2", "B", "B", patient="p1", rank1=1.0)]
    out = aggregate_patient_predictions(preds, mode="vote")
    assert len(out) == 2


def test_aggregation_requires_patient_ids():
    preds = [pred("s1", "A", "A", rank1=1.0)]
    with pytest.raises(ValueError, match="patient_id"):
        aggregate_patient_predictions(preds, mode="vote")
    with pytest.raises(ValueError, match="mode"):
        aggregate_patient_predictions(preds, mode="bogus")
