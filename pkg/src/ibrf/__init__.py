"""Balanced random forest with hybrid bootstrap resampling for imbalanced binary data.

Each tree of the forest is trained on a bootstrap subset that keeps every
minority sample and is balanced by neighbourhood cleaning, random
undersampling and SMOTE, in that order.
"""

from .dataset import (
    ClassProfile,
    Dataset,
    FoldSplit,
    load,
    load_csv,
    load_keel,
    profile,
    stratified_kfold,
    write_csv,
)
from .ensemble import EnsembleConfig, ForestModel, bootstrap_subset, fit, predict, predict_proba
from .harness import ExperimentConfig, ReportRow, emit_report, generate_synthetic, run_benchmark, run_cv
from .metrics import ConfusionMatrix, confusion, mcc, roc_auc
from .neighbors import NeighborQuery, knn
from .sampling import (
    SamplerConfig,
    SamplingTrace,
    hybrid_resample,
    neighborhood_clean,
    random_undersample,
    smote,
)
from .tree import DecisionTree, best_split, fit_tree, gini, predict_proba_tree

__version__ = "0.1.0"
