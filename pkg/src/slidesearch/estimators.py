"""Scikit-learn style wrappers around the core algorithms.

These give the selection/encoding/retrieval/splitting/mixture pieces the
familiar fit/transform/predict + get_params surface so they compose with
sklearn tooling. The functional APIs in the sibling modules remain the
primary interface.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import as_float_array, check_rate
from .barcode import BoB, build_index, bob_search, pack_bits
from .cohort import DiagnosisLabel
from .io import PatchSet
from .metrics import majority_vote
from .model_selection import assign_groups
from .mosaic import build_mosaic
from .stats import fit_gmm_1d, gmm_intersection
from .vector import SlideVector, VectorPool


def _as_patchset(X) -> PatchSet:
    if isinstance(X, PatchSet):
        return X
    raise TypeError("expected a PatchSet (embeddings + coords); build one "
                    "with slidesearch.io.read_feature_file")


class MosaicSelector(TransformerMixin, BaseEstimator):
    """Two-stage (chromatic, spatial) patch subset selection.

    fit(X) runs the selection on a PatchSet; transform(X) returns the
    selected embedding rows. The chosen row indices live in ``indices_``.
    """

    def __init__(self, rate: float = 0.2, k_chroma: int = 9, seed: int = 0):
        self.rate = rate
        self.k_chroma = k_chroma
        self.seed = seed

    def fit(self, X, y=None):
        check_rate(self.rate)
        patches = _as_patchset(X)
        mosaic = build_mosaic(patches, self.rate, k_chroma=self.k_chroma,
                              seed=self.seed)
        self.indices_ = mosaic.selected_indices
        self.n_selected_ = int(mosaic.selected_indices.size)
        return self

    def transform(self, X):
        patches = _as_patchset(X)
        return patches.embeddings[self.indices_]


class MinMaxEncoder(TransformerMixin, BaseEstimator):
    """Stateless encoder from embeddings to packed MinMax barcode words."""

    def fit(self, X, y=None):
        X = as_float_array(X, "X", ndim=2)
        self.nbits_ = X.shape[1] - 1
        return self

    def transform(self, X):
        X = as_float_array(X, "X", ndim=2)
        bits = (X[:, 1:] > X[:, :-1]).astype(np.uint8)
        return pack_bits(bits)


class BarcodeRetriever(BaseEstimator):
    """LOPO same-organ retrieval and voting over a barcode index.

    fit(X) takes (slide_id, patient_id, organ, diagnosis, BoB) tuples;
    kneighbors() ranks candidates and predict() majority-votes a diagnosis
    for a query BoB.
    """

    def __init__(self, n_neighbors: int = 3, normalize: bool = False):
        self.n_neighbors = n_neighbors
        self.normalize = normalize

    def fit(self, X, y=None):
        self.index_ = build_index(list(X))
        self.labels_ = {e.slide_id: DiagnosisLabel(e.organ, e.diagnosis)
                        for e in self.index_.entries}
        return self

    def kneighbors(self, query: BoB, patient_id: str, organ: str):
        return bob_search(query, patient_id, organ, self.index_,
                          self.n_neighbors, normalize=self.normalize)

    def predict(self, query: BoB, patient_id: str, organ: str):
        result = self.kneighbors(query, patient_id, organ)
        labels = dict(self.labels_)
        # unknown truth for a bare query; voting only reads neighbor labels
        labels.setdefault(query.slide_id, DiagnosisLabel(organ, ""))
        return majority_vote(result, labels, self.n_neighbors,
                             patient_id=patient_id).predicted_label


class EuclideanRetriever(BaseEstimator):
    """Exact LOPO same-organ k-nearest retrieval over slide vectors."""

    def __init__(self, n_neighbors: int = 3, model_name: str = "model"):
        self.n_neighbors = n_neighbors
        self.model_name = model_name

    def fit(self, X, y=None, *, slide_ids, patient_ids, organs):
        X = as_float_array(X, "X", ndim=2)
        if not (X.shape[0] == len(slide_ids) == len(patient_ids)
                == len(organs)):
            raise ValueError("metadata lengths disagree with X")
        pool = VectorPool(self.model_name)
        for row, sid, pid, organ in zip(X, slide_ids, patient_ids, organs):
            pool.add(SlideVector(sid, self.model_name, row), pid, organ)
        self.pool_ = pool
        return self

    def kneighbors(self, vector, slide_id: str, patient_id: str,
                   organ: str):
        query = SlideVector(slide_id, self.model_name,
                            as_float_array(vector, "vector", ndim=1))
        return self.pool_.search(query, patient_id, organ,
                                 self.n_neighbors)


class GroupedStratifiedKFold(BaseEstimator):
    """K-fold splitter stratifying groups (patients) by label.

    split(X, y, groups) yields (train_indices, test_indices) with every
    group wholly inside one fold and per-label group counts balanced to
    within one where feasible.
    """

    def __init__(self, n_splits: int = 3, seed: int = 0):
        self.n_splits = n_splits
        self.seed = seed

    def get_n_splits(self, X=None, y=None, groups=None) -> int:
        return self.n_splits

    def split(self, X, y, groups):
        y = list(y)
        groups = list(groups)
        if len(y) != len(groups):
            raise ValueError("y and groups lengths differ")
        by_label: dict = {}
        for label, gid in zip(y, groups):
            by_label.setdefault(label, set()).add(gid)
        assignment = assign_groups(by_label, self.n_splits, self.seed)
        folds = np.array([assignment[gid] for gid in groups])
        indices = np.arange(len(groups))
        for fold in range(self.n_splits):
            test = indices[folds == fold]
            train = indices[folds != fold]
            yield train, test


class GaussianMixture1D(BaseEstimator):
    """Two-component univariate GMM with a density-equality threshold."""

    def __init__(self, n_components: int = 2, n_init: int = 5,
                 seed: int = 0):
        self.n_components = n_components
        self.n_init = n_init
        self.seed = seed

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 2 and X.shape[1] == 1:
            X = X[:, 0]
        fit = fit_gmm_1d(X, components=self.n_components,
                         n_init=self.n_init, seed=self.seed)
        self.fit_ = fit
        self.weights_ = np.array([c.weight for c in fit.components])
        self.means_ = np.array([c.mean for c in fit.components])
        self.sds_ = np.array([c.sd for c in fit.components])
        self.loglik_ = fit.loglik
        self.converged_ = fit.converged
        return self

    def threshold(self, axis: str = ""):
        return gmm_intersection(self.fit_, axis=axis)

    def predict(self, X):
        """Hard component assignment by weighted density."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 2 and X.shape[1] == 1:
            X = X[:, 0]
        dens = np.stack([
            w * np.exp(-0.5 * ((X - m) / s) ** 2) / s
            for w, m, s in zip(self.weights_, self.means_, self.sds_)
        ], axis=1)
        return np.argmax(dens, axis=1)
