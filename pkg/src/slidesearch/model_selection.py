"""Patient-level grouped stratification into k folds.

Patients are the groups (all slides of a patient share its fold) and
stratification targets per-diagnosis balance: within each diagnosis the
per-fold patient counts differ by at most 1 whenever the diagnosis has at
least k patients.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping

from ._seeding import rng_for
from .cohort import Cohort, DiagnosisLabel, SlideRecord


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    assignment: Mapping[str, int]

    def fold_of(self, patient_id: str) -> int:
        return self.assignment[patient_id]

    def patients_in(self, fold: int) -> list[str]:
        return sorted(p for p, f in self.assignment.items() if f == fold)

    def slide_folds(self, slides: Iterable[SlideRecord]) -> dict[str, int]:
        return {rec.slide_id: self.assignment[rec.patient_id]
                for rec in slides}


def assign_groups(groups_by_label: Mapping, k: int,
                  seed: int) -> dict[str, int]:
    """Greedy stratified assignment of groups (patients) to k folds.

    Labels are visited by descending group count (ties by label); within a
    label the seeded rng shuffles group order; each group goes to the fold
    currently lightest in that label, ties broken by lightest overall load
    then lowest fold index. A group seen under several labels keeps its
    first assignment but still counts toward later labels' balance.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    ordered = sorted(groups_by_label,
                     key=lambda lab: (-len(groups_by_label[lab]), lab))
    assignment: dict[str, int] = {}
    overall = [0] * k
    for lab in ordered:
        members = sorted(groups_by_label[lab])
        if len(members) < k:
            warnings.warn(
                f"label {lab} has {len(members)} groups, fewer than "
                f"k={k}; some folds will lack it", stacklevel=2)
        tags = lab if isinstance(lab, tuple) else (str(lab),)
        rng = rng_for(seed, "folds", *tags)
        order = rng.permutation(len(members))
        local = [0] * k
        pending = []
        for i in order:
            gid = members[int(i)]
            if gid in assignment:
                local[assignment[gid]] += 1
            else:
                pending.append(gid)
        for gid in pending:
            fold = min(range(k), key=lambda f: (local[f], overall[f], f))
            assignment[gid] = fold
            local[fold] += 1
            overall[fold] += 1
    return assignment


def assign_folds(cohort: Cohort, k: int = 3, seed: int = 0) -> FoldAssignment:
    """Patient-to-fold assignment balanced within each diagnosis."""
    by_diagnosis: dict[DiagnosisLabel, set[str]] = {}
    for rec in cohort.slides:
        by_diagnosis.setdefault(rec.label, set()).add(rec.patient_id)
    return FoldAssignment(k=k,
                          assignment=assign_groups(by_diagnosis, k, seed))


def fold_patient_counts(folds: FoldAssignment,
                        cohort: Cohort) -> dict[DiagnosisLabel, list[int]]:
    """Per diagnosis, the patient count in each fold (balance check)."""
    by_diagnosis: dict[DiagnosisLabel, set[str]] = {}
    for rec in cohort.slides:
        by_diagnosis.setdefault(rec.label, set()).add(rec.patient_id)
    out = {}
    for lab, patients in by_diagnosis.items():
        counts = [0] * folds.k
        for pid in patients:
            counts[folds.assignment[pid]] += 1
        out[lab] = counts
    return out
