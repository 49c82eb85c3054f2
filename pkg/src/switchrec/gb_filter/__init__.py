"""Gradient-boosting filter: per-item classifier, calibration and thresholding."""

from switchrec.gb_filter.boosting import (
    BoostedEnsemble,
    BoostingParams,
    TrainingError,
    Tree,
    logistic_loss,
    predict_score,
    predict_scores,
    train_classifier,
)
from switchrec.gb_filter.encoding import FeatureEncoder, LabeledSample, read_dataset
from switchrec.gb_filter.gains import (
    THRESHOLD_REPORT_COLUMNS,
    GainsCurve,
    GainsPoint,
    MaxImpacted,
    MinRecall,
    ThresholdChoice,
    UnreachableTarget,
    gains_curve,
    roc_auc,
    select_threshold,
)
from switchrec.gb_filter.isotonic import IsotonicMap, calibrate, expected_calibration_error, fit_isotonic, pava
from switchrec.gb_filter.model import (
    GBModel,
    MissingModelError,
    gb_filter,
    load_model,
    save_model,
    train_item_model,
)

__all__ = [
    "BoostedEnsemble",
    "BoostingParams",
    "FeatureEncoder",
    "GBModel",
    "GainsCurve",
    "GainsPoint",
    "IsotonicMap",
    "LabeledSample",
    "MaxImpacted",
    "MinRecall",
    "MissingModelError",
    "THRESHOLD_REPORT_COLUMNS",
    "ThresholdChoice",
    "TrainingError",
    "Tree",
    "UnreachableTarget",
    "calibrate",
    "expected_calibration_error",
    "fit_isotonic",
    "gains_curve",
    "gb_filter",
    "load_model",
    "logistic_loss",
    "pava",
    "predict_score",
    "predict_scores",
    "read_dataset",
    "roc_auc",
    "save_model",
    "select_threshold",
    "train_classifier",
    "train_item_model",
]
