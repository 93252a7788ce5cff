"""Artifact features, Wilks' Lambda selection and discriminant classification."""
from .features import FEATURE_NAMES, FeatureVector, extract_all, extract_features, histogram_mode
from .lda import Classifier, LDAModel, train_classifier
from .selection import (
    SelectionTrace,
    SingularScatterError,
    Step,
    f_sf,
    partial_f,
    scatter_matrices,
    stepwise_select,
    wilks_lambda,
)
from .validation import CLASSES, ConfusionMatrix, FoldError, confusion, cross_validate
