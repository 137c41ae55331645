"""Exact Euclidean slide-vector retrieval under LOPO, same-organ rules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_float_array, check_equal_length
from .errors import DataError
from .retrieval import RetrievalResult, rank_candidates


@dataclass(frozen=True)
class SlideVector:
    slide_id: str
    model_name: str
    vector: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])


def euclidean(u, v) -> float:
    """Euclidean distance with a fixed (index-order) summation.

    Computed in float64 on the squared differences; no BLAS reductions, so
    the result is bit-stable for a given numpy build.
    """
    u = as_float_array(u, "u", ndim=1)
    v = as_float_array(v, "v", ndim=1)
    check_equal_length(u, v, "u", "v")
    diff = u - v
    total = float(np.sum(diff * diff))
    out = float(np.sqrt(total))
    if not np.isfinite(out):
        raise ValueError("non-finite distance")
    return out


def l2_normalize(vectors: np.ndarray) -> np.ndarray:
    vectors = as_float_array(vectors, "vectors", ndim=2)
    norms = np.sqrt(np.sum(vectors * vectors, axis=1, keepdims=True))
    if np.any(norms == 0.0):
        raise DataError("cannot L2-normalize a zero vector")
    return vectors / norms


def knn_search(query: SlideVector, query_patient: str, query_organ: str,
               pool: list[SlideVector], pool_patients: list[str],
               pool_organs: list[str], n: int) -> RetrievalResult:
    """Exact n-nearest among same-organ slides of other patients.

    Comparison uses squared distances; the square root is taken only for
    the reported value. Ties break by ascending slide_id.
    """
    if not (len(pool) == len(pool_patients) == len(pool_organs)):
        raise ValueError("pool metadata lengths disagree")
    candidates: list[tuple[str, float]] = []
    for vec, patient, organ in zip(pool, pool_patients, pool_organs):
        if organ != query_organ or patient == query_patient:
            continue
        if vec.model_name != query.model_name:
            raise DataError(
                f"pool entry {vec.slide_id} has model {vec.model_name!r}, "
                f"query uses {query.model_name!r}")
        if vec.dim != query.dim:
            raise DataError(
                f"dimension mismatch: {vec.slide_id} has d={vec.dim}, "
                f"query has d={query.dim}")
        diff = query.vector.astype(np.float64) - vec.vector.astype(np.float64)
        candidates.append((vec.slide_id, float(np.sum(diff * diff))))
    ranked = rank_candidates(candidates, n, query.slide_id, query.model_name)
    neighbors = tuple(nb._replace(distance=float(np.sqrt(nb.distance)))
                      for nb in ranked.neighbors)
    return RetrievalResult(query_slide_id=ranked.query_slide_id,
                           model_name=ranked.model_name,
                           neighbors=neighbors,
                           shortfall=ranked.shortfall)


class VectorPool:
    """All slide vectors of one model, with metadata, for repeated queries."""

    def __init__(self, model_name: str):
        self.model_name = model_name
        self._vectors: list[SlideVector] = []
        self._patients: list[str] = []
        self._organs: list[str] = []

    def add(self, vector: SlideVector, patient_id: str, organ: str) -> None:
        if vector.model_name != self.model_name:
            raise DataError(
                f"vector for {vector.slide_id} is model "
                f"{vector.model_name!r}, pool is {self.model_name!r}")
        if self._vectors and vector.dim != self._vectors[0].dim:
            raise DataError(
                f"dimension mismatch adding {vector.slide_id}: "
                f"d={vector.dim} vs pool d={self._vectors[0].dim}")
        self._vectors.append(vector)
        self._patients.append(patient_id)
        self._organs.append(organ)

    def __len__(self) -> int:
        return len(self._vectors)

    def search(self, query: SlideVector, query_patient: str,
               query_organ: str, n: int) -> RetrievalResult:
        return knn_search(query, query_patient, query_organ,
                          self._vectors, self._patients, self._organs, n)
