"""Principal-component logistic regression for multicollinear census features."""
from .numeric import BACKEND
from .pipeline import (
    FeaturePartition,
    PcglmModel,
    backcast,
    backward_eliminate,
    fit_pipeline,
    load_model,
    odds_ratio_table,
    predict_with_interval,
    save_model,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "FeaturePartition",
    "PcglmModel",
    "backcast",
    "backward_eliminate",
    "fit_pipeline",
    "load_model",
    "odds_ratio_table",
    "predict_with_interval",
    "save_model",
]
