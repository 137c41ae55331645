import csv
from pathlib import Path

import numpy as np
import pytest

from slidesearch.cohort import SlideRecord
from slidesearch.io import write_feature_file, write_slide_vector

MANIFEST_HEADER = ["slide_id", "patient_id", "organ", "diagnosis",
                   "patch_features", "slide_vectors"]


def write_manifest(path: Path, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        writer.writerows(rows)
    return path


@pytest.fixture
def manifest_factory(tmp_path):
    """Writes a manifest plus real feature/vector files for each row.

    rows: (slide_id, patient_id, organ, diagnosis). Embeddings are seeded
    per slide so content is deterministic but distinct.
    """

    def build(rows, patches=16, dim=8, root_name="data"):
        root = tmp_path / root_name
        (root / "features").mkdir(parents=True, exist_ok=True)
        (root / "vectors").mkdir(parents=True, exist_ok=True)
        out_rows = []
        for i, (sid, pid, organ, dx) in enumerate(rows):
            rng = np.random.default_rng(1000 + i)
            emb = rng.normal(size=(patches, dim))
            coords = np.stack([np.arange(patches) % 4,
                               np.arange(patches) // 4], axis=1).astype(float)
            write_feature_file(root / "features" / f"{sid}.ssb", emb,
                               coords=coords, chromatic=emb[:, :3])
            write_slide_vector(root / "vectors" / f"{sid}.ssv",
                               emb.mean(axis=0))
            out_rows.append([sid, pid, organ, dx, f"features/{sid}.ssb",
                             f"meanvec=vectors/{sid}.ssv"])
        return write_manifest(root / "manifest.csv", out_rows)

    return build


def records_from_tuples(rows) -> list[SlideRecord]:
    return [SlideRecord(sid, pid, organ, dx, f"features/{sid}.ssb", {})
            for sid, pid, organ, dx in rows]
