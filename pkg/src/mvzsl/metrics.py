"""Evaluation metrics for recognition and annotation runs.

Classification quality is reported as overall accuracy and as the
unweighted mean of per-class recalls (the fairer number under class
imbalance). Annotation quality over binary attribute ground truth uses an
F-measure with top-k thresholding, where k is each instance's true
attribute count, plus mean average precision of the full score ranking.
Retrieval tasks report the average 1-based rank of the true item.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, MetricsError


@dataclass(frozen=True)
class MetricsReport:
    """All scores of one evaluation; inapplicable fields stay None."""

    n_evaluated: int
    overall_accuracy: float | None = None
    mean_per_class_accuracy: float | None = None
    confusion: dict | None = None
    f_measure: float | None = None
    mean_average_precision: float | None = None
    average_rank: float | None = None

    def to_dict(self) -> dict:
        out = {"n_evaluated": self.n_evaluated}
        for key in ("overall_accuracy", "mean_per_class_accuracy", "f_measure",
                    "mean_average_precision", "average_rank"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        if self.confusion is not None:
            out["confusion"] = self.confusion
        return out


def confusion_counts(
    predicted: Sequence[str], truth: Sequence[str]
) -> dict[str, dict[str, int]]:
    """Nested counts: true class -> predicted class -> count."""
    table: dict[str, dict[str, int]] = {}
    for p, t in zip(predicted, truth):
        table.setdefault(t, {})
        table[t][p] = table[t].get(p, 0) + 1
    return table


def classification_metrics(
    predicted: Sequence[str],
    truth: Sequence[str],
    classes: Sequence[str] | None = None,
) -> tuple[float, float, dict]:
    """Overall accuracy, mean per-class recall, and the confusion table.

    When *classes* is given, every one of them must occur in the truth,
    otherwise the per-class mean is undefined.
    """
    if len(truth) == 0:
        raise MetricsError("cannot evaluate against empty ground truth")
    if len(predicted) != len(truth):
        raise DimensionMismatch(
            f"{len(predicted)} predictions for {len(truth)} truth labels"
        )
    truth = list(truth)
    predicted = list(predicted)
    present = sorted(set(truth))
    if classes is not None:
        missing = sorted(set(classes) - set(present))
        if missing:
            raise MetricsError(f"classes absent from the truth: {missing}")
    hits = sum(p == t for p, t in zip(predicted, truth))
    overall = hits / len(truth)
    recalls = []
    for cls in present:
        idx = [i for i, t in enumerate(truth) if t == cls]
        recalls.append(sum(predicted[i] == cls for i in idx) / len(idx))
    return overall, float(np.mean(recalls)), confusion_counts(predicted, truth)


def attribute_f_measure(scores: np.ndarray, truth: np.ndarray) -> float:
    """Mean F1 of top-k thresholded scores vs binary truth (k = true count)."""
    scores = np.atleast_2d(np.asarray(scores, float))
    truth = np.atleast_2d(np.asarray(truth, float))
    if scores.shape != truth.shape:
        raise DimensionMismatch("scores and truth must have equal shapes")
    if not np.isin(truth, (0.0, 1.0)).all():
        raise MetricsError("attribute truth must be binary")
    f1s = []
    for s, t in zip(scores, truth):
        k = int(t.sum())
        if k == 0 or k == t.shape[0]:
            raise MetricsError("each instance needs some, but not all, attributes set")
        chosen = np.zeros_like(t)
        chosen[np.argsort(-s, kind="stable")[:k]] = 1.0
        overlap = float((chosen * t).sum())
        precision = overlap / chosen.sum()
        recall = overlap / t.sum()
        f1s.append(0.0 if overlap == 0 else 2 * precision * recall / (precision + recall))
    return float(np.mean(f1s))


def average_precision(scores: np.ndarray, truth: np.ndarray) -> float:
    """AP of one ranking: mean precision at each true item's rank."""
    order = np.argsort(-np.asarray(scores, float), kind="stable")
    relevant = np.asarray(truth, float)[order] > 0
    if not relevant.any():
        raise MetricsError("average precision needs at least one relevant item")
    hits = np.cumsum(relevant)
    ranks = np.arange(1, len(relevant) + 1)
    return float((hits[relevant] / ranks[relevant]).mean())


def mean_average_precision(scores: np.ndarray, truth: np.ndarray) -> float:
    scores = np.atleast_2d(np.asarray(scores, float))
    truth = np.atleast_2d(np.asarray(truth, float))
    if scores.shape != truth.shape:
        raise DimensionMismatch("scores and truth must have equal shapes")
    return float(np.mean([average_precision(s, t) for s, t in zip(scores, truth)]))


def compute_metrics(
    predicted: Sequence[str] | None = None,
    truth: Sequence[str] | None = None,
    classes: Sequence[str] | None = None,
    attribute_scores: np.ndarray | None = None,
    attribute_truth: np.ndarray | None = None,
    ranks: Sequence[int] | None = None,
) -> MetricsReport:
    """Assemble a :class:`MetricsReport` from whatever context is given.

    Classification fields need *predicted* and *truth*; attribute fields
    need the score and binary truth matrices; *ranks* are 1-based retrieval
    ranks of the true item.
    """
    overall = per_class = None
    confusion = None
    n = 0
    if predicted is not None or truth is not None:
        if predicted is None or truth is None:
            raise MetricsError("predictions and truth must come together")
        overall, per_class, confusion = classification_metrics(predicted, truth, classes)
        n = len(truth)
    fm = mapr = None
    if attribute_scores is not None or attribute_truth is not None:
        if attribute_scores is None or attribute_truth is None:
            raise MetricsError("attribute scores and truth must come together")
        fm = attribute_f_measure(attribute_scores, attribute_truth)
        mapr = mean_average_precision(attribute_scores, attribute_truth)
        n = n or np.atleast_2d(attribute_scores).shape[0]
    avg_rank = None
    if ranks is not None:
        if len(ranks) == 0:
            raise MetricsError("no ranks to average")
        if any(r < 1 for r in ranks):
            raise MetricsError("ranks are 1-based")
        avg_rank = float(np.mean(ranks))
        n = n or len(ranks)
    if not n:
        raise MetricsError("nothing to evaluate")
    return MetricsReport(
        n_evaluated=int(n),
        overall_accuracy=overall,
        mean_per_class_accuracy=per_class,
        confusion=confusion,
        f_measure=fm,
        mean_average_precision=mapr,
        average_rank=avg_rank,
    )
