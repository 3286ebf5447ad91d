"""xpd: black-box vs glass-box tabular classification benchmark.

Trains a gradient-boosted tree ensemble and a cyclic-boosted additive model on
binary tabular data, computes exact per-prediction attributions for both, and
scores predictive performance alongside seven explainability metrics.
"""

from ._version import __version__
from .attribution import Attribution, attribution_matrix, brute_force_shapley, ebm_attribution, tree_shap
from .dataset import (
    Dataset,
    DatasetRegistryEntry,
    FeatureMeta,
    SplitIndices,
    load_csv,
    registry,
    save_csv,
    stratified_split,
    synthesize,
)
from .ebm import EbmConfig, EbmModel, ebm_fit, ebm_margin, ebm_proba, ebm_to_stump_ensemble
from .errors import ConfigError, DataError, MetricUndefinedError, StageError, XpdError
from .gbdt import GbdtConfig, GbdtModel, gbdt_fit, gbdt_margin, gbdt_proba
from .harness import ComparisonReport, RunConfig, canonical_report_bytes, run_batch, run_compare
from .metrics import ConfusionCounts, McNemarResult, PredictiveReport, confusion, mcnemar, predictive_report, roc_auc
from .model_io import load_model, save_model
from .xai_metrics import Ordinal, PerturbConfig, XaiReport, to_ordinal

__all__ = [
    "__version__",
    "Attribution",
    "ComparisonReport",
    "ConfigError",
    "ConfusionCounts",
    "DataError",
    "Dataset",
    "DatasetRegistryEntry",
    "EbmConfig",
    "EbmModel",
    "FeatureMeta",
    "GbdtConfig",
    "GbdtModel",
    "McNemarResult",
    "MetricUndefinedError",
    "Ordinal",
    "PerturbConfig",
    "PredictiveReport",
    "RunConfig",
    "SplitIndices",
    "StageError",
    "XaiReport",
    "XpdError",
    "attribution_matrix",
    "brute_force_shapley",
    "canonical_report_bytes",
    "confusion",
    "ebm_attribution",
    "ebm_fit",
    "ebm_margin",
    "ebm_proba",
    "ebm_to_stump_ensemble",
    "gbdt_fit",
    "gbdt_margin",
    "gbdt_proba",
    "load_csv",
    "load_model",
    "mcnemar",
    "predictive_report",
    "registry",
    "roc_auc",
    "run_batch",
    "run_compare",
    "save_csv",
    "save_model",
    "stratified_split",
    "synthesize",
    "to_ordinal",
    "tree_shap",
]
