"""Gender recogniser and countermeasure classifiers."""

from .dataset import Dataset, FeatureLayout, Task, dataset_from_table
from .gbdt import GbdtConfig, train_gbdt
from .grouped_mlp import GroupedMlpSpec, Head, Variant, train_grouped_mlp
from .logreg import LogRegConfig, train_logreg
from .losses import OcSoftmaxConfig, oc_softmax_loss
from .models import ModelKind, ScoreRange, TrainedModel, score
from .smote import SmoteConfig, smote_oversample

__all__ = [
    "Dataset",
    "FeatureLayout",
    "GbdtConfig",
    "GroupedMlpSpec",
    "Head",
    "LogRegConfig",
    "ModelKind",
    "OcSoftmaxConfig",
    "ScoreRange",
    "SmoteConfig",
    "Task",
    "TrainedModel",
    "Variant",
    "dataset_from_table",
    "oc_softmax_loss",
    "score",
    "smote_oversample",
    "train_gbdt",
    "train_grouped_mlp",
    "train_logreg",
]
