"""Whole-slide-image retrieval and benchmarking toolkit.

Two retrieval paths over a slide manifest: bit-packed MinMax barcodes of
mosaic-selected patches ranked by median-of-minimum Hamming distance, and
slide-level embeddings ranked by exact Euclidean distance. Both run under
leave-one-patient-out, same-organ retrieval with top-n majority voting,
macro-F1 reporting, paired t-tests with Holm-Bonferroni correction and
GMM-based threshold analysis.
"""

__version__ = "0.1.0"

from .barcode import (BarcodeIndex, BoB, bob_search, build_index,
                      encode_minmax, hamming, minmax_binarize,
                      slide_distance)
from .cohort import (Cohort, DiagnosisLabel, SlideRecord, apply_exclusions,
                     load_manifest)
from .errors import (ConfigError, DataError, DegenerateDataError,
                     SlideSearchError)
from .estimators import (BarcodeRetriever, EuclideanRetriever,
                         GaussianMixture1D, GroupedStratifiedKFold,
                         MinMaxEncoder, MosaicSelector)
from .metrics import (LabelScore, Prediction, aggregate_patient_predictions,
                      majority_vote, misclassification_profile,
                      organ_macro_f1, organ_summary, per_diagnosis_f1,
                      pooled_f1, win_counts)
from .model_selection import FoldAssignment, assign_folds
from .mosaic import (Mosaic, build_mosaic, chromatic_cluster,
                     selection_count, spatial_sample)
from .pipeline import RunConfig, run_benchmark
from .retrieval import Neighbor, RetrievalResult
from .stats import (GmmFit, GmmThreshold, HolmDecision, PairedTestResult,
                    fit_gmm_1d, gmm_intersection, holm_bonferroni,
                    paired_t_test)
from .synth import SynthSpec, generate
from .vector import SlideVector, euclidean, knn_search

__all__ = [
    "BarcodeIndex", "BoB", "bob_search", "build_index", "encode_minmax",
    "hamming", "minmax_binarize", "slide_distance",
    "Cohort", "DiagnosisLabel", "SlideRecord", "apply_exclusions",
    "load_manifest",
    "ConfigError", "DataError", "DegenerateDataError", "SlideSearchError",
    "BarcodeRetriever", "EuclideanRetriever", "GaussianMixture1D",
    "GroupedStratifiedKFold", "MinMaxEncoder", "MosaicSelector",
    "LabelScore", "Prediction", "aggregate_patient_predictions",
    "majority_vote", "misclassification_profile", "organ_macro_f1",
    "organ_summary", "per_diagnosis_f1", "pooled_f1", "win_counts",
    "FoldAssignment", "assign_folds",
    "Mosaic", "build_mosaic", "chromatic_cluster", "selection_count",
    "spatial_sample",
    "RunConfig", "run_benchmark",
    "Neighbor", "RetrievalResult",
    "GmmFit", "GmmThreshold", "HolmDecision", "PairedTestResult",
    "fit_gmm_1d", "gmm_intersection", "holm_bonferroni", "paired_t_test",
    "SynthSpec", "generate",
    "SlideVector", "euclidean", "knn_search",
    "__version__",
]
