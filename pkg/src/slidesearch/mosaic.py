"""Two-stage patch selection: chromatic k-means, then spatial k-means.

Each slide's patches are first grouped into chromatically distinct regions,
then each region is subsampled by clustering patch coordinates and keeping
the patch nearest each spatial centroid. The result is a small "mosaic" of
row indices into the slide's patch block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._seeding import rng_for
from ._validation import as_float_array, check_rate
from .errors import DataError
from .io import PatchSet, read_feature_file

KMEANS_MAX_ITER = 100
KMEANS_TOL = 1e-6


@dataclass(frozen=True)
class Mosaic:
    """Selected patch rows for one slide."""

    slide_id: str
    selected_indices: np.ndarray
    rate: float

    def __len__(self) -> int:
        return int(self.selected_indices.size)


def selection_count(m: int, rate: float) -> int:
    """Patches to keep from a cluster of size m: max(1, round(m*rate)).

    Rounding is half-away-from-zero, so 1.5 -> 2 and 2.5 -> 3 (Python's
    banker's rounding would give 2 for both).
    """
    if m < 1:
        raise ValueError(f"cluster size must be >= 1, got {m}")
    check_rate(rate)
    return max(1, int(np.floor(m * rate + 0.5)))


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # Exact subtract-and-square form; dot-product form can go slightly
    # negative and flip argmin ties.
    out = np.empty((points.shape[0], centers.shape[0]), dtype=np.float64)
    for j in range(centers.shape[0]):
        out[:, j] = np.sum((points - centers[j]) ** 2, axis=1)
    return out


def kmeans(points: np.ndarray, k: int, rng: np.random.Generator,
           max_iter: int = KMEANS_MAX_ITER, tol: float = KMEANS_TOL):
    """Seeded Lloyd k-means with k-means++ initialisation.

    Returns (centers, assignment, inertia_history). Empty clusters are
    dropped, never re-seeded, so fewer than k centers can come back;
    seeding also stops early once every point coincides with a chosen
    center, which collapses duplicate inputs into one cluster.
    """
    points = as_float_array(points, "points", ndim=2)
    n = points.shape[0]
    if n == 0:
        raise ValueError("kmeans requires at least one point")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    k = min(k, n)

    seed_rows = [int(rng.integers(n))]
    d2 = np.sum((points - points[seed_rows[0]]) ** 2, axis=1)
    while len(seed_rows) < k:
        total = float(d2.sum())
        if total <= 0.0:
            break
        nxt = int(rng.choice(n, p=d2 / total))
        seed_rows.append(nxt)
        d2 = np.minimum(d2, np.sum((points - points[nxt]) ** 2, axis=1))
    centers = points[seed_rows].copy()

    history: list[float] = []
    for _ in range(max_iter):
        dists = _sq_dists(points, centers)
        assign = np.argmin(dists, axis=1)
        history.append(float(dists[np.arange(n), assign].sum()))
        counts = np.bincount(assign, minlength=centers.shape[0])
        sums = np.empty_like(centers)
        for j in range(points.shape[1]):
            sums[:, j] = np.bincount(assign, weights=points[:, j],
                                     minlength=centers.shape[0])
        nonempty = counts > 0
        new_centers = sums[nonempty] / counts[nonempty, None]
        if new_centers.shape == centers.shape:
            moved = float(np.sqrt(
                np.max(np.sum((new_centers - centers) ** 2, axis=1))))
            centers = new_centers
            if moved < tol:
                break
        else:
            centers = new_centers
    dists = _sq_dists(points, centers)
    assign = np.argmin(dists, axis=1)
    history.append(float(dists[np.arange(n), assign].sum()))
    return centers, assign, np.asarray(history, dtype=np.float64)


def chromatic_features(patches: PatchSet) -> np.ndarray:
    """Chromatic descriptor if stored, else the first 3 embedding dims."""
    if patches.chromatic is not None:
        return np.asarray(patches.chromatic, dtype=np.float64)
    if patches.dim < 3:
        raise DataError(
            "no chromatic descriptor and embedding dim "
            f"{patches.dim} < 3; cannot derive one")
    return np.asarray(patches.embeddings[:, :3], dtype=np.float64)


def chromatic_cluster(patches, k: int = 9, seed: int = 0) -> np.ndarray:
    """Cluster patches into k chromatic groups; returns cluster ids.

    Accepts a PatchSet or an (n, 3) feature array. When n <= k every
    distinct feature row becomes its own cluster (duplicates share one).
    """
    if isinstance(patches, PatchSet):
        feats = chromatic_features(patches)
    else:
        feats = as_float_array(patches, "chromatic features", ndim=2)
    n = feats.shape[0]
    if n == 0:
        raise DataError("empty slide")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n <= k:
        _, assign = np.unique(feats, axis=0, return_inverse=True)
        return assign.astype(np.int64)
    rng = rng_for(seed, "chromatic")
    _, assign, _ = kmeans(feats, k, rng)
    return assign.astype(np.int64)


def spatial_partition(coords: np.ndarray, k: int, rng: np.random.Generator):
    """K-means over (x, y) coordinates; returns (centers, assignment)."""
    centers, assign, _ = kmeans(coords, k, rng)
    return centers, assign


def _representatives(coords: np.ndarray, members: np.ndarray,
                     centers: np.ndarray, assign: np.ndarray) -> list[int]:
    picks: list[int] = []
    for cid in range(centers.shape[0]):
        rows = np.flatnonzero(assign == cid)
        if rows.size == 0:
            continue
        d = np.sum((coords[rows] - centers[cid]) ** 2, axis=1)
        # ties by lowest original row index; members and rows are ascending
        best = rows[int(np.argmin(d))]
        picks.append(int(members[best]))
    return picks


def spatial_sample(patches: PatchSet, assignment, rate: float,
                   seed: int = 0, slide_id: str = "") -> Mosaic:
    """Subsample each chromatic cluster by location and keep centroids' nearest.

    A cluster of size m contributes selection_count(m, rate) patches, each
    the member nearest one spatial centroid (ties by lowest row index).
    """
    check_rate(rate)
    assignment = np.asarray(assignment, dtype=np.int64)
    if assignment.shape != (len(patches),):
        raise ValueError(
            f"assignment length {assignment.shape} does not match "
            f"{len(patches)} patches")
    if patches.coords is None:
        raise DataError(
            f"slide {slide_id or '<unknown>'} has no patch coordinates")
    coords = np.asarray(patches.coords, dtype=np.float64)
    selected: list[int] = []
    for cid in np.unique(assignment):
        members = np.flatnonzero(assignment == cid)
        m = members.size
        want = selection_count(m, rate)
        if rate >= 1.0 or want >= m:
            selected.extend(int(i) for i in members)
            continue
        rng = rng_for(seed, "spatial", int(cid))
        centers, sub_assign = spatial_partition(coords[members], want, rng)
        selected.extend(_representatives(coords[members], members,
                                         centers, sub_assign))
    idx = np.array(sorted(selected), dtype=np.int64)
    return Mosaic(slide_id=slide_id, selected_indices=idx, rate=float(rate))


def build_mosaic(patches, rate: float, k_chroma: int = 9, seed: int = 0,
                 slide_id: str = "", root=None) -> Mosaic:
    """Two-stage selection for one slide.

    ``patches`` is a PatchSet, or a cohort SlideRecord whose feature file is
    resolved against ``root``.
    """
    if not isinstance(patches, PatchSet):
        record = patches
        from pathlib import Path
        base = Path(root) if root is not None else Path(".")
        slide_id = slide_id or record.slide_id
        patches = read_feature_file(base / record.patch_features)
    if len(patches) == 0:
        raise DataError(f"empty slide: {slide_id or '<unknown>'}")
    assign = chromatic_cluster(patches, k=k_chroma, seed=seed)
    return spatial_sample(patches, assign, rate, seed=seed,
                          slide_id=slide_id)
