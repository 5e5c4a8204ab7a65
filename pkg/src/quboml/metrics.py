"""Evaluation metrics and fold handling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

import numpy as np

from quboml.errors import DimensionError, QuboMLError


def dcg_at(grades: Sequence[float], depth: int) -> float:
    g = np.asarray(grades, dtype=np.float64)[:depth]
    if g.size == 0:
        return 0.0
    discounts = np.log2(np.arange(2, g.size + 2))
    return float(np.sum((2.0**g - 1.0) / discounts))


def ndcg_at(ranking: Sequence[Hashable], relevance: Mapping[Hashable, float], depth: int = 10) -> float:
    """nDCG with gain ``2**rel - 1`` and ``log2(rank + 1)`` discount; 0 when no relevant docs exist."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    gains = [relevance.get(d, 0) for d in ranking]
    ideal = sorted(relevance.values(), reverse=True)
    idcg = dcg_at(ideal, depth)
    if idcg == 0.0:
        return 0.0
    return dcg_at(gains, depth) / idcg


def f1(preds, labels, average: str = "binary") -> float:
    """Positive-class F1 (``average="binary"``) or unweighted mean over both classes (``"macro"``)."""
    p = np.asarray(preds).astype(int)
    y = np.asarray(labels).astype(int)
    if p.shape != y.shape:
        raise DimensionError(f"length mismatch: {p.shape} vs {y.shape}")
    if average == "macro":
        return 0.5 * (f1(p, y) + f1(1 - p, 1 - y))
    if average != "binary":
        raise ValueError(f"unknown average {average!r}")
    tp = int(np.sum((p == 1) & (y == 1)))
    fp = int(np.sum((p == 1) & (y == 0)))
    fn = int(np.sum((p == 0) & (y == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class FoldPlan:
    folds: np.ndarray
    n_folds: int
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.folds == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.folds != fold)


def make_folds(n: int, n_folds: int, seed: int = 0) -> FoldPlan:
    """Seeded shuffle split into near-equal folds; the first ``n % n_folds`` folds get one extra."""
    if n_folds < 1 or n_folds > n:
        raise QuboMLError(f"n_folds={n_folds} must lie in [1, {n}]")
    order = np.random.default_rng(seed).permutation(n)
    folds = np.empty(n, dtype=np.int64)
    for f, chunk in enumerate(np.array_split(order, n_folds)):
        folds[chunk] = f
    return FoldPlan(folds, n_folds, seed)


def mean_ndcg_by_query(scores, labels, query_ids, depth: int = 10) -> float:
    """Mean nDCG@depth over query groups, ranking rows by descending score (stable)."""
    scores = np.asarray(scores)
    labels = np.asarray(labels)
    query_ids = np.asarray(query_ids)
    vals = []
    for q in dict.fromkeys(query_ids.tolist()):
        rows = np.flatnonzero(query_ids == q)
        order = rows[np.argsort(-scores[rows], kind="stable")]
        rel = {int(r): float(labels[r]) for r in rows}
        vals.append(ndcg_at([int(r) for r in order], rel, depth))
    return float(np.mean(vals)) if vals else math.nan
