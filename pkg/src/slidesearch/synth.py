"""Synthetic cohort generator with controllable class separation.

Each (organ, diagnosis) pair gets one Gaussian class centroid; patches are
the centroid plus unit-variance noise, so ``separation`` is the RMS
between-class centroid distance measured in within-class sd units.
Diagnosis names repeat across organs on purpose: labels must stay
organ-scoped downstream.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._seeding import rng_for
from .io import write_feature_file, write_slide_vector

VECTOR_MODEL = "meanvec"


@dataclass(frozen=True)
class SynthSpec:
    organs: int = 2
    diagnoses: int = 3
    patients: int = 8
    slides: int = 1
    patches: int = 64
    dim: int = 32
    separation: float = 4.0
    seed: int = 0

    def __post_init__(self):
        for name in ("organs", "diagnoses", "patients", "slides", "patches"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.dim < 2:
            raise ValueError(f"dim must be >= 2, got {self.dim}")
        if self.separation < 0:
            raise ValueError("separation must be >= 0")

    @property
    def total_slides(self) -> int:
        return self.organs * self.diagnoses * self.patients * self.slides


def _grid_coords(n: int) -> np.ndarray:
    side = int(math.ceil(math.sqrt(n)))
    idx = np.arange(n)
    return np.stack([idx % side, idx // side], axis=1).astype(np.float64)


def generate(spec: SynthSpec, out_dir) -> Path:
    """Write manifest.csv, patch feature files and slide vectors.

    Returns the manifest path. Layout: features/<slide>.ssb and
    vectors/<slide>.ssv under ``out_dir``; the manifest references them
    relatively. Deterministic for a fixed spec.
    """
    out_dir = Path(out_dir)
    (out_dir / "features").mkdir(parents=True, exist_ok=True)
    (out_dir / "vectors").mkdir(parents=True, exist_ok=True)
    d = spec.dim
    # per-coordinate sd such that E||c_i - c_j||^2 = separation^2
    centroid_scale = spec.separation / math.sqrt(2.0 * d)
    manifest_rows = []
    for o in range(spec.organs):
        organ = f"organ{o}"
        for g in range(spec.diagnoses):
            diagnosis = f"dx{g}"
            crng = rng_for(spec.seed, "centroid", organ, diagnosis)
            centroid = crng.normal(size=d) * centroid_scale
            for p in range(spec.patients):
                patient = f"P{o}_{g}_{p}"
                for s in range(spec.slides):
                    slide = f"S{o}_{g}_{p}_{s}"
                    prng = rng_for(spec.seed, "patch", slide)
                    emb = centroid[None, :] + prng.normal(
                        size=(spec.patches, d))
                    coords = _grid_coords(spec.patches)
                    chroma = emb[:, :3]
                    feat_rel = f"features/{slide}.ssb"
                    write_feature_file(out_dir / feat_rel, emb,
                                       coords=coords, chromatic=chroma)
                    vec_rel = f"vectors/{slide}.ssv"
                    write_slide_vector(out_dir / vec_rel, emb.mean(axis=0))
                    manifest_rows.append([
                        slide, patient, organ, diagnosis, feat_rel,
                        f"{VECTOR_MODEL}={vec_rel}",
                    ])
    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["slide_id", "patient_id", "organ", "diagnosis",
                         "patch_features", "slide_vectors"])
        writer.writerows(manifest_rows)
    return manifest
