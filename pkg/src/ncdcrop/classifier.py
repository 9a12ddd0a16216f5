"""kNN over precomputed distance rows, with nearest-neighbour tie-breaking."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .distance import DistanceMatrix

logger = logging.getLogger(__name__)

DEFAULT_K = 2


@dataclass(frozen=True)
class Prediction:
    label: int
    neighbor_indices: tuple[int, ...]
    tie_broken: bool = False


def knn_predict(row, train_labels: Sequence[int], k: int = DEFAULT_K) -> Prediction:
    """Majority label among the ``k`` nearest train samples.

    Neighbours are ordered by (distance, train index). When several labels
    share the top count, the one held by the nearest of those neighbours wins.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1 or row.shape[0] == 0:
        raise ValueError("distance row must be a non-empty 1-d sequence")
    if row.shape[0] != len(train_labels):
        raise ValueError(f"row has {row.shape[0]} entries but {len(train_labels)} train labels")
    if k > row.shape[0]:
        logger.warning("k=%d exceeds the %d training samples; clamping", k, row.shape[0])
        k = row.shape[0]

    order = np.argsort(row, kind="stable")[:k]
    top = [train_labels[i] for i in order]
    counts = Counter(top)
    best = max(counts.values())
    leaders = {lab for lab, n in counts.items() if n == best}
    if len(leaders) == 1:
        label = next(iter(leaders))
        tie = False
    else:
        label = next(lab for lab in top if lab in leaders)
        tie = True
    return Prediction(int(label), tuple(int(i) for i in order), tie)


def classify_rows(rows: Iterable, train_labels: Sequence[int], k: int = DEFAULT_K) -> list[Prediction]:
    return [knn_predict(row, train_labels, k) for row in rows]


def classify_all(matrix: DistanceMatrix, k: int = DEFAULT_K) -> list[Prediction]:
    return classify_rows(matrix.values, matrix.train_labels, k)
