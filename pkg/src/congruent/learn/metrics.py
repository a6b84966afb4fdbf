"""Classification metrics and reports."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import List, Sequence

import numpy as np

from ..errors import DataError


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    roc_auc: float
    confusion: List[List[int]]  # rows: true 0/1, columns: predicted 0/1

    def to_dict(self):
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self, title: str = "") -> str:
        (tn, fp), (fn, tp) = self.confusion
        lines = [title] if title else []
        for name in ("accuracy", "precision", "recall", "f1", "roc_auc"):
            lines.append(f"{name:<10} {getattr(self, name):.4f}")
        lines.append("confusion  pred0  pred1")
        lines.append(f"true0      {tn:5d}  {fp:5d}")
        lines.append(f"true1      {fn:5d}  {tp:5d}")
        return "\n".join(lines)


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int]) -> List[List[int]]:
    t = np.asarray(y_true).astype(int)
    p = np.asarray(y_pred).astype(int)
    return [[int(np.sum((t == i) & (p == j))) for j in (0, 1)] for i in (0, 1)]


def confusion_metrics(confusion: Sequence[Sequence[int]]):
    """(accuracy, precision, recall, f1) from [[tn, fp], [fn, tp]]; empty ratios are 0."""
    (tn, fp), (fn, tp) = confusion
    total = tn + fp + fn + tp
    if total == 0:
        raise DataError("empty confusion matrix")
    accuracy = (tp + tn) / total
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return accuracy, precision, recall, f1


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ranks = np.empty(len(x))
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def roc_auc(y_true: Sequence[int], scores: Sequence[float]) -> float:
    """Mann-Whitney U / (n0 n1) with tied scores sharing the average rank."""
    t = np.asarray(y_true).astype(int)
    s = np.asarray(scores, dtype=np.float64)
    n1 = int(t.sum())
    n0 = len(t) - n1
    if n0 == 0 or n1 == 0:
        raise DataError("ROC AUC is undefined with a single class")
    r = _average_ranks(s)
    u = r[t == 1].sum() - n1 * (n1 + 1) / 2
    return float(u / (n0 * n1))


def report(y_true: Sequence[int], y_pred: Sequence[int], scores: Sequence[float]) -> MetricsReport:
    cm = confusion_matrix(y_true, y_pred)
    acc, prec, rec, f1 = confusion_metrics(cm)
    return MetricsReport(acc, prec, rec, f1, roc_auc(y_true, scores), cm)


def evaluate(model, dataset) -> MetricsReport:
    """Metrics of a fitted model on the held-out split of ``dataset``."""
    X, y = dataset.X_test, dataset.y_test
    if len(np.unique(y)) < 2:
        raise DataError("test split holds a single class")
    scores = model.predict_proba(X)[:, 1]
    return report(y, model.predict(X), scores)
