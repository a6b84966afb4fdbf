from .features import LabeledDataset, balanced_split, build_features, congruence_label
from .metrics import MetricsReport, confusion_matrix, confusion_metrics, evaluate, report, roc_auc
from .models import PCA, DecisionTreeGini, LogisticRegressionGD, PCAResult, jacobi_eigh, pca, train_logistic, train_tree

__all__ = [
    "LabeledDataset",
    "balanced_split",
    "build_features",
    "congruence_label",
    "MetricsReport",
    "confusion_matrix",
    "confusion_metrics",
    "evaluate",
    "report",
    "roc_auc",
    "PCA",
    "DecisionTreeGini",
    "LogisticRegressionGD",
    "PCAResult",
    "jacobi_eigh",
    "pca",
    "train_logistic",
    "train_tree",
]
