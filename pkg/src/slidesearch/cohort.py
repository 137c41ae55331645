"""Slide manifest ingestion and cohort exclusion rules.

A manifest is a UTF-8 CSV with header
``slide_id,patient_id,organ,diagnosis,patch_features,slide_vectors`` where
``patch_features`` is a path relative to the manifest and ``slide_vectors``
is a semicolon-separated list of ``model=path`` pairs (possibly empty).

Diagnosis labels are organ-scoped: the same diagnosis text under two organs
is two distinct labels. Strings are taken verbatim (case-sensitive).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple

from .errors import DataError

MANIFEST_COLUMNS = (
    "slide_id", "patient_id", "organ", "diagnosis",
    "patch_features", "slide_vectors",
)


class DiagnosisLabel(NamedTuple):
    organ: str
    diagnosis: str

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return f"{self.organ}/{self.diagnosis}"


@dataclass(frozen=True)
class SlideRecord:
    """One whole-slide image with its labels and feature references."""

    slide_id: str
    patient_id: str
    organ: str
    diagnosis: str
    patch_features: str
    slide_vectors: Mapping[str, str] = field(default_factory=dict)

    @property
    def label(self) -> DiagnosisLabel:
        return DiagnosisLabel(self.organ, self.diagnosis)


@dataclass(frozen=True)
class Cohort:
    """Slides surviving the exclusion rules, with per-label bookkeeping."""

    slides: tuple[SlideRecord, ...]
    labels: frozenset[DiagnosisLabel]
    label_patient_counts: Mapping[DiagnosisLabel, int]
    label_slide_counts: Mapping[DiagnosisLabel, int]
    organ_label_counts: Mapping[str, int]

    @classmethod
    def from_slides(cls, slides: Iterable[SlideRecord]) -> "Cohort":
        slides = tuple(slides)
        patients: dict[DiagnosisLabel, set[str]] = {}
        slide_counts: dict[DiagnosisLabel, int] = {}
        for rec in slides:
            patients.setdefault(rec.label, set()).add(rec.patient_id)
            slide_counts[rec.label] = slide_counts.get(rec.label, 0) + 1
        labels = frozenset(patients)
        organ_counts: dict[str, int] = {}
        for lab in labels:
            organ_counts[lab.organ] = organ_counts.get(lab.organ, 0) + 1
        return cls(
            slides=slides,
            labels=labels,
            label_patient_counts={k: len(v) for k, v in patients.items()},
            label_slide_counts=slide_counts,
            organ_label_counts=organ_counts,
        )

    @property
    def organs(self) -> list[str]:
        return sorted(self.organ_label_counts)

    def slide_labels(self) -> dict[str, DiagnosisLabel]:
        return {rec.slide_id: rec.label for rec in self.slides}

    def slides_in_organ(self, organ: str) -> list[SlideRecord]:
        return [rec for rec in self.slides if rec.organ == organ]


def _parse_slide_vectors(text: str, line_no: int) -> dict[str, str]:
    vectors: dict[str, str] = {}
    text = text.strip()
    if not text:
        return vectors
    for pair in text.split(";"):
        pair = pair.strip()
        if not pair:
            continue
        model, sep, path = pair.partition("=")
        if not sep or not model.strip() or not path.strip():
            raise DataError(
                f"manifest line {line_no}: malformed slide_vectors entry {pair!r}"
            )
        if model.strip() in vectors:
            raise DataError(
                f"manifest line {line_no}: duplicate model {model.strip()!r}"
            )
        vectors[model.strip()] = path.strip()
    return vectors


def load_manifest(path, check_refs: bool = True) -> list[SlideRecord]:
    """Load the slide manifest, preserving file order.

    Rejects duplicate slide ids, malformed rows (reported with their line
    number) and, when ``check_refs`` is set, feature paths that do not exist
    relative to the manifest.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    root = path.parent
    records: list[SlideRecord] = []
    seen: set[str] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"manifest {path} is empty (missing header)") from None
        if tuple(h.strip() for h in header) != MANIFEST_COLUMNS:
            raise DataError(
                f"manifest {path} has header {header}, "
                f"expected {list(MANIFEST_COLUMNS)}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(MANIFEST_COLUMNS):
                raise DataError(
                    f"manifest line {line_no}: expected "
                    f"{len(MANIFEST_COLUMNS)} fields, got {len(row)}"
                )
            slide_id, patient_id, organ, diagnosis, feats, vecs = (
                v.strip() for v in row
            )
            for name, value in (("slide_id", slide_id),
                                ("patient_id", patient_id),
                                ("organ", organ), ("diagnosis", diagnosis),
                                ("patch_features", feats)):
                if not value:
                    raise DataError(f"manifest line {line_no}: empty {name}")
            if slide_id in seen:
                raise DataError(
                    f"manifest line {line_no}: duplicate slide_id {slide_id!r}"
                )
            seen.add(slide_id)
            vectors = _parse_slide_vectors(vecs, line_no)
            if check_refs:
                if not (root / feats).exists():
                    raise DataError(
                        f"manifest line {line_no}: patch feature file "
                        f"{feats!r} not found"
                    )
                for model, vpath in vectors.items():
                    if not (root / vpath).exists():
                        raise DataError(
                            f"manifest line {line_no}: slide vector "
                            f"{vpath!r} for model {model!r} not found"
                        )
            records.append(SlideRecord(slide_id, patient_id, organ, diagnosis,
                                       feats, vectors))
    return records


def apply_exclusions(slides: Iterable[SlideRecord], min_patients: int = 4,
                     min_diagnoses: int = 2) -> Cohort:
    """Filter to the evaluable cohort.

    Two passes, applied once in this order (no fixpoint iteration): drop
    every organ-scoped label with fewer than ``min_patients`` unique
    patients, then drop every organ left with fewer than ``min_diagnoses``
    labels (removing all its slides).
    """
    slides = list(slides)
    if not slides:
        raise ValueError("apply_exclusions requires a non-empty slide list")
    patients: dict[DiagnosisLabel, set[str]] = {}
    for rec in slides:
        patients.setdefault(rec.label, set()).add(rec.patient_id)
    kept_labels = {lab for lab, pts in patients.items()
                   if len(pts) >= min_patients}
    organ_counts: dict[str, int] = {}
    for lab in kept_labels:
        organ_counts[lab.organ] = organ_counts.get(lab.organ, 0) + 1
    kept_organs = {o for o, c in organ_counts.items() if c >= min_diagnoses}
    survivors = [rec for rec in slides
                 if rec.label in kept_labels and rec.organ in kept_organs]
    return Cohort.from_slides(survivors)


def exclusion_reasons(slides: Iterable[SlideRecord], min_patients: int = 4,
                      min_diagnoses: int = 2) -> list[tuple[SlideRecord, str]]:
    """Excluded slides with the rule that removed them, in manifest order."""
    slides = list(slides)
    patients: dict[DiagnosisLabel, set[str]] = {}
    for rec in slides:
        patients.setdefault(rec.label, set()).add(rec.patient_id)
    kept_labels = {lab for lab, pts in patients.items()
                   if len(pts) >= min_patients}
    organ_counts: dict[str, int] = {}
    for lab in kept_labels:
        organ_counts[lab.organ] = organ_counts.get(lab.organ, 0) + 1
    kept_organs = {o for o, c in organ_counts.items() if c >= min_diagnoses}
    out = []
    for rec in slides:
        if rec.label not in kept_labels:
            out.append((rec, "label_below_min_patients"))
        elif rec.organ not in kept_organs:
            out.append((rec, "organ_below_min_diagnoses"))
    return out
