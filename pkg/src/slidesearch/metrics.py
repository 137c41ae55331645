"""Prediction scoring: majority voting, F1 stack, wins, error profiles.

All evaluation is organ-scoped ("vertical"): scores are computed within an
organ and only then averaged across organs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats as sps

from .cohort import DiagnosisLabel
from .retrieval import RetrievalResult


@dataclass(frozen=True)
class Prediction:
    """Outcome of one query under top-n voting."""

    query_slide_id: str
    true_label: DiagnosisLabel
    predicted_label: DiagnosisLabel
    n_used: int
    patient_id: str = ""
    rank1_distance: float = math.nan


@dataclass(frozen=True)
class LabelScore:
    label: DiagnosisLabel
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    sd: float
    ci_low: float
    ci_high: float
    n: int


def majority_vote(result: RetrievalResult,
                  labels: Mapping[str, DiagnosisLabel], n: int,
                  patient_id: str = "") -> Prediction:
    """Most frequent label among the first min(n, available) neighbors.

    Vote ties go to the label of the nearest neighbor holding a tied label,
    so top-1 and top-n agree when the pool shrinks to one.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not result.neighbors:
        raise ValueError(
            f"query {result.query_slide_id!r} has no neighbors to vote on")
    used = result.neighbors[:n]
    counts: dict[DiagnosisLabel, int] = {}
    for nb in used:
        lab = labels[nb.slide_id]
        counts[lab] = counts.get(lab, 0) + 1
    top = max(counts.values())
    tied = {lab for lab, c in counts.items() if c == top}
    predicted = next(labels[nb.slide_id] for nb in used
                     if labels[nb.slide_id] in tied)
    return Prediction(
        query_slide_id=result.query_slide_id,
        true_label=labels[result.query_slide_id],
        predicted_label=predicted,
        n_used=len(used),
        patient_id=patient_id,
        rank1_distance=float(used[0].distance),
    )


def per_diagnosis_f1(preds: Sequence[Prediction]) -> list[LabelScore]:
    """One-vs-rest precision/recall/F1 per label, zero on zero denominators.

    Labels are the union of true and predicted labels, sorted by
    (organ, diagnosis); support counts true occurrences.
    """
    if not preds:
        raise ValueError("no predictions to score")
    labels = sorted({p.true_label for p in preds}
                    | {p.predicted_label for p in preds})
    out = []
    for lab in labels:
        tp = sum(1 for p in preds
                 if p.true_label == lab and p.predicted_label == lab)
        fp = sum(1 for p in preds
                 if p.true_label != lab and p.predicted_label == lab)
        fn = sum(1 for p in preds
                 if p.true_label == lab and p.predicted_label != lab)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = (2 * precision * recall / (precision + recall)
              if precision + recall else 0.0)
        out.append(LabelScore(lab, precision, recall, f1, tp + fn))
    return out


def organ_macro_f1(scores: Iterable[LabelScore]) -> float:
    """Unweighted mean F1 over labels with support > 0."""
    f1s = [s.f1 for s in scores if s.support > 0]
    if not f1s:
        raise ValueError("no label has positive support")
    return float(np.mean(f1s))


def organ_summary(values, confidence: float = 0.95) -> SummaryStats:
    """Mean, sample sd and t-based CI of per-organ scores.

    CI = mean +/- t(0.975, n-1) * sd / sqrt(n), stored unclipped. A single
    value yields sd 0 and a point interval.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("values must be a non-empty 1-D sequence")
    n = int(values.size)
    mean = float(np.mean(values))
    if n == 1:
        return SummaryStats(mean, 0.0, mean, mean, 1)
    sd = float(np.std(values, ddof=1))
    crit = float(sps.t.ppf(0.5 + confidence / 2.0, n - 1))
    half = crit * sd / math.sqrt(n)
    return SummaryStats(mean, sd, mean - half, mean + half, n)


def win_counts(matrix: Mapping[str, Mapping[str, float]],
               skip_degenerate_ties: bool = False) -> dict[str, int]:
    """Per row, award each model achieving the (rounded) maximum.

    Scores are rounded to 2 decimals before comparison. With
    ``skip_degenerate_ties`` rows where every model rounds to 0 or every
    model rounds to 1 award nothing (the diagnosis-level rule).
    """
    models: set[str] = set()
    for row in matrix.values():
        models.update(row)
    wins = {m: 0 for m in sorted(models)}
    for row_id in sorted(matrix):
        row = matrix[row_id]
        if not row:
            continue
        rounded = {m: float(np.round(v, 2)) for m, v in row.items()}
        vals = list(rounded.values())
        if skip_degenerate_ties and (all(v == 0.0 for v in vals)
                                     or all(v == 1.0 for v in vals)):
            continue
        best = max(vals)
        for m, v in rounded.items():
            if v == best:
                wins[m] += 1
    return wins


def misclassification_profile(
        preds: Sequence[Prediction],
        support_range: tuple[int, int] = (5, 7),
) -> dict[DiagnosisLabel, dict[DiagnosisLabel, int]]:
    """Wrong-prediction tallies for sparsely represented true labels.

    Only true labels whose support (count among ``preds``) lies inside
    ``support_range`` inclusive are profiled; correct predictions do not
    appear, so a fully correct label yields no entry.
    """
    lo, hi = support_range
    support: dict[DiagnosisLabel, int] = {}
    for p in preds:
        support[p.true_label] = support.get(p.true_label, 0) + 1
    profile: dict[DiagnosisLabel, dict[DiagnosisLabel, int]] = {}
    for p in preds:
        if not lo <= support[p.true_label] <= hi:
            continue
        if p.predicted_label == p.true_label:
            continue
        bucket = profile.setdefault(p.true_label, {})
        bucket[p.predicted_label] = bucket.get(p.predicted_label, 0) + 1
    return profile


def pooled_f1(fold_preds: Sequence[Sequence[Prediction]]) -> list[LabelScore]:
    """Concatenate fold predictions, then score once (no fold averaging)."""
    pooled = [p for fold in fold_preds for p in fold]
    return per_diagnosis_f1(pooled)


def aggregate_patient_predictions(preds: Sequence[Prediction],
                                  mode: str = "vote") -> list[Prediction]:
    """Collapse per-slide predictions to one per patient.

    vote: majority over the patient's slides, ties resolved by the
    smallest rank-1 distance among slides voting for a tied label.
    best-slide: the prediction of the slide with smallest rank-1 distance.
    per-slide: no aggregation.

    Grouping is by (patient_id, true_label) so a patient with two distinct
    true labels is scored once per label.
    """
    if mode == "per-slide":
        return list(preds)
    if mode not in ("vote", "best-slide"):
        raise ValueError(f"unknown patient aggregation mode {mode!r}")
    groups: dict[tuple[str, DiagnosisLabel], list[Prediction]] = {}
    order: list[tuple[str, DiagnosisLabel]] = []
    for p in preds:
        if not p.patient_id:
            raise ValueError(
                f"prediction for {p.query_slide_id!r} lacks patient_id")
        key = (p.patient_id, p.true_label)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(p)
    out = []
    for key in order:
        members = groups[key]
        by_dist = sorted(members,
                         key=lambda p: (p.rank1_distance, p.query_slide_id))
        if mode == "best-slide":
            out.append(by_dist[0])
            continue
        counts: dict[DiagnosisLabel, int] = {}
        for p in members:
            counts[p.predicted_label] = counts.get(p.predicted_label, 0) + 1
        top = max(counts.values())
        tied = {lab for lab, c in counts.items() if c == top}
        rep = next(p for p in by_dist if p.predicted_label in tied)
        out.append(rep)
    return out
