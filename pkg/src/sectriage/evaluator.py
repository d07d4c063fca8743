"""Evaluation metrics: mean BCE loss, accuracy from the confusion matrix,
and AUC via ROC analysis.

AUC is computed with the tie-aware rank statistic (the probability that a
random positive outscores a random negative, ties counting one half); the
trapezoidal area under the ROC points equals it and is kept for plotting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .neuralcore import Network, bce_loss


@dataclass
class ConfusionMatrix:
    """Counts with SR as the positive class."""

    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


@dataclass
class EvaluationReport:
    loss: float
    accuracy: float
    confusion: ConfusionMatrix
    roc: list[tuple[float, float]]
    auc: float | None
    n_samples: int
    threshold: float
    loss_metric: str = "mean_bce"
    auc_omitted_reason: str | None = None
    source: str | None = None

    def to_dict(self) -> dict:
        return {
            "loss": self.loss,
            "accuracy": self.accuracy,
            "auc": self.auc,
            "threshold": self.threshold,
            "n_samples": self.n_samples,
            "confusion": self.confusion.to_dict(),
            "roc": [[fpr, tpr] for fpr, tpr in self.roc],
            "loss_metric": self.loss_metric,
            "auc_omitted_reason": self.auc_omitted_reason,
            "source": self.source,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EvaluationReport":
        data = json.loads(text)
        return cls(
            loss=data["loss"],
            accuracy=data["accuracy"],
            confusion=ConfusionMatrix(**data["confusion"]),
            roc=[(p[0], p[1]) for p in data["roc"]],
            auc=data["auc"],
            n_samples=data["n_samples"],
            threshold=data["threshold"],
            loss_metric=data.get("loss_metric", "mean_bce"),
            auc_omitted_reason=data.get("auc_omitted_reason"),
            source=data.get("source"),
        )


def predict(network: Network, document_matrix: np.ndarray) -> float:
    """SR probability for a single (length, dim) document matrix."""
    rows = np.asarray(document_matrix, dtype=np.float64)
    if rows.ndim != 2:
        raise ValueError(f"expected a 2-d document matrix, got shape {rows.shape}")
    probs = network.forward(rows[None, :, :], train=False)
    return float(probs[0, 1])


def predict_batch(network: Network, matrices: np.ndarray,
                  batch_size: int = 256) -> np.ndarray:
    """SR probabilities for an (N, length, dim) stack, in inference mode."""
    scores = np.zeros(len(matrices))
    for start in range(0, len(matrices), batch_size):
        probs = network.forward(matrices[start:start + batch_size], train=False)
        scores[start:start + len(probs)] = probs[:, 1]
    return scores


def confusion(scores: Sequence[float], labels: Sequence[int],
              threshold: float = 0.5) -> ConfusionMatrix:
    """Predicted SR iff score >= threshold (ties classify as SR)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape:
        raise ValueError(
            f"scores and labels differ in length: {scores.shape} vs {labels.shape}"
        )
    predicted = scores >= threshold
    actual = labels == 1
    return ConfusionMatrix(
        tp=int(np.sum(predicted & actual)),
        tn=int(np.sum(~predicted & ~actual)),
        fp=int(np.sum(predicted & ~actual)),
        fn=int(np.sum(~predicted & actual)),
    )


def accuracy(cm: ConfusionMatrix) -> float:
    """(TP + TN) / (TP + TN + FP + FN)."""
    if cm.total == 0:
        raise ValueError("accuracy undefined for an empty confusion matrix")
    return (cm.tp + cm.tn) / cm.total


def _class_counts(labels: np.ndarray) -> tuple[int, int]:
    pos = int(np.sum(labels == 1))
    neg = len(labels) - pos
    if pos == 0 or neg == 0:
        raise ValueError("ROC/AUC need both classes present")
    return pos, neg


def roc_curve(scores: Sequence[float],
              labels: Sequence[int]) -> list[tuple[float, float]]:
    """(FPR, TPR) points swept over descending unique scores.

    Starts at (0, 0), ends at (1, 1); both coordinates are non-decreasing.
    Tied scores move along a single diagonal segment.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    pos, neg = _class_counts(labels)
    order = np.argsort(-scores, kind="stable")
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    n = len(scores)
    while i < n:
        j = i
        while j < n and scores[order[j]] == scores[order[i]]:
            if labels[order[j]] == 1:
                tp += 1
            else:
                fp += 1
            j += 1
        points.append((fp / neg, tp / pos))
        i = j
    return points


def trapezoid_auc(points: Sequence[tuple[float, float]]) -> float:
    """Trapezoidal area under an ROC point sequence."""
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Tie-aware rank statistic: P(score_pos > score_neg) + 0.5 P(equal).

    Equals the trapezoidal area under roc_curve within 1e-9.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    pos, neg = _class_counts(labels)
    order = np.argsort(scores, kind="stable")
    ranks = np.zeros(len(scores))
    i = 0
    n = len(scores)
    while i < n:
        j = i
        while j < n and scores[order[j]] == scores[order[i]]:
            j += 1
        # Average 1-based rank for the tie group [i, j).
        ranks[order[i:j]] = (i + 1 + j) / 2.0
        i = j
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - pos * (pos + 1) / 2.0) / (pos * neg)


def evaluate(network: Network, test_set: tuple[np.ndarray, np.ndarray],
             threshold: float = 0.5, source: str | None = None) -> EvaluationReport:
    """Score a vectorized labeled set and populate the full report.

    With a single-class set the AUC and ROC are omitted and flagged; all
    other fields are still filled.
    """
    x, y = test_set
    if len(x) == 0:
        raise ValueError("cannot evaluate an empty test set")
    y = np.asarray(y, dtype=np.int64)
    scores = predict_batch(network, x)
    loss = bce_loss(scores, y)
    cm = confusion(scores, y, threshold=threshold)
    try:
        roc = roc_curve(scores, y)
        area = auc(scores, y)
        omitted = None
    except ValueError:
        roc = []
        area = None
        omitted = "single-class test set"
    return EvaluationReport(
        loss=loss,
        accuracy=accuracy(cm),
        confusion=cm,
        roc=roc,
        auc=area,
        n_samples=len(y),
        threshold=threshold,
        auc_omitted_reason=omitted,
        source=source,
    )
