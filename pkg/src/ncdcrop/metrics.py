"""Confusion matrix, OA / AA / mIoU, and mean +/- 95% CI over seeded trials.

All metrics are percentages. AA is the macro mean of per-class recall over
classes present in the ground truth; IoU skips classes whose union is empty.
The CI half-width uses the two-sided Student-t quantile with ``n - 1`` degrees
of freedom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

CI_LEVEL = 0.95


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # rows: truth, cols: prediction
    classes: tuple[int, ...]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_list(self) -> list[list[int]]:
        return [[int(v) for v in r] for r in self.counts]


@dataclass
class EvaluationReport:
    oa: float
    aa: float
    miou: float
    per_class_iou: dict[int, float]
    confusion: ConfusionMatrix
    config: dict = field(default_factory=dict)
    runtime_seconds: float | None = None

    def to_dict(self) -> dict:
        return {
            "oa": self.oa,
            "aa": self.aa,
            "miou": self.miou,
            "per_class_iou": {str(k): v for k, v in self.per_class_iou.items()},
            "classes": list(self.confusion.classes),
            "confusion": self.confusion.to_list(),
            "config": self.config,
            "runtime_seconds": self.runtime_seconds,
        }


@dataclass(frozen=True)
class TrialAggregate:
    mean: float
    half_width: float
    trial_values: tuple[float, ...]
    seeds: tuple[int, ...] = ()
    confidence: float = CI_LEVEL
    method: str = "student-t"

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "half_width": self.half_width,
            "trial_values": list(self.trial_values),
            "seeds": list(self.seeds),
            "confidence": self.confidence,
            "method": self.method,
        }


def confusion(truth: Sequence[int], pred: Sequence[int],
              classes: Sequence[int] | None = None) -> ConfusionMatrix:
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if truth.shape != pred.shape:
        raise ValueError(f"length mismatch: {truth.shape[0]} truths vs {pred.shape[0]} predictions")
    if truth.size == 0:
        raise ValueError("need at least one sample")
    if classes is None:
        classes = np.union1d(truth, pred)
    classes = tuple(int(c) for c in classes)
    pos = {c: i for i, c in enumerate(classes)}
    missing = (set(truth.tolist()) | set(pred.tolist())) - set(pos)
    if missing:
        raise ValueError(f"labels {sorted(missing)} not in the class list")
    K = len(classes)
    ti = np.array([pos[v] for v in truth.tolist()])
    pi = np.array([pos[v] for v in pred.tolist()])
    counts = np.bincount(ti * K + pi, minlength=K * K).reshape(K, K)
    return ConfusionMatrix(counts, classes)


def _require_samples(cm: ConfusionMatrix) -> None:
    if cm.total <= 0:
        raise ValueError("confusion matrix is empty")


def overall_accuracy(cm: ConfusionMatrix) -> float:
    _require_samples(cm)
    return 100.0 * float(np.trace(cm.counts)) / cm.total


def average_accuracy(cm: ConfusionMatrix) -> float:
    _require_samples(cm)
    support = cm.counts.sum(axis=1)
    present = support > 0
    if not present.any():
        raise ValueError("no class has ground-truth samples")
    recall = np.diag(cm.counts)[present] / support[present]
    return 100.0 * float(recall.mean())


def mean_iou(cm: ConfusionMatrix) -> tuple[float, dict[int, float]]:
    _require_samples(cm)
    tp = np.diag(cm.counts).astype(np.float64)
    union = cm.counts.sum(axis=1) + cm.counts.sum(axis=0) - tp
    per_class = {
        cls: 100.0 * tp[i] / union[i]
        for i, cls in enumerate(cm.classes) if union[i] > 0
    }
    if not per_class:
        raise ValueError("every class has an empty union")
    return float(np.mean(list(per_class.values()))), per_class


def evaluate(truth: Sequence[int], pred: Sequence[int], classes=None,
             config: dict | None = None) -> EvaluationReport:
    cm = confusion(truth, pred, classes)
    miou, per_class = mean_iou(cm)
    return EvaluationReport(
        oa=overall_accuracy(cm),
        aa=average_accuracy(cm),
        miou=miou,
        per_class_iou=per_class,
        confusion=cm,
        config=dict(config or {}),
    )


def aggregate_trials(values: Sequence[float], seeds: Sequence[int] = ()) -> TrialAggregate:
    vals = np.asarray(values, dtype=np.float64)
    n = vals.size
    if n < 2:
        raise ValueError("a confidence interval needs at least 2 trial values")
    # fsum keeps the result independent of the order of the trials.
    mean = math.fsum(vals.tolist()) / n
    sd = math.sqrt(math.fsum(((vals - mean) ** 2).tolist()) / (n - 1))
    t_star = float(stats.t.ppf(0.5 + CI_LEVEL / 2, df=n - 1))
    half = t_star * sd / math.sqrt(n)
    # Guard against mean drifting outside [min, max] by rounding.
    mean = min(max(mean, float(vals.min())), float(vals.max()))
    return TrialAggregate(mean, half, tuple(float(v) for v in vals), tuple(int(s) for s in seeds))
