"""Grouped cross-validation study of the gait classifiers."""
from .data import LabeledDataset, from_frames, read_dataset
from .folds import FoldPlan, make_folds
from .models import KINDS, SEARCH_SPACES, ClassifierSpec, make_classifier, predict, train
from .preprocess import RobustScaler, robust_scale, smote_oversample
from .study import (
    ImportanceReport, MetricsReport, ablation_study, evaluate_cv, permutation_importance,
    random_search, rank_groups,
)

__all__ = [
    "LabeledDataset", "from_frames", "read_dataset", "FoldPlan", "make_folds", "KINDS",
    "SEARCH_SPACES", "ClassifierSpec", "make_classifier", "predict", "train", "RobustScaler",
    "robust_scale", "smote_oversample", "ImportanceReport", "MetricsReport", "ablation_study",
    "evaluate_cv", "permutation_importance", "random_search", "rank_groups",
]
