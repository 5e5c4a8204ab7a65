"""Seeded synthetic datasets for tests, demos and the acceptance suite."""

from __future__ import annotations

import numpy as np

from quboml.features import RankingDataset


def informative_ranking_dataset(seed: int = 0, n_rows: int = 3000, rows_per_query: int = 30) -> RankingDataset:
    """12 features: 0-3 drive the grade, 4-7 are noisy copies of 0-3, 8-11 are pure noise."""
    rng = np.random.default_rng(seed)
    informative = rng.normal(size=(n_rows, 4))
    duplicates = informative + 0.6 * rng.normal(size=(n_rows, 4))
    noise = rng.normal(size=(n_rows, 4))
    score = informative.sum(axis=1) + 0.3 * rng.normal(size=n_rows)
    grades = np.digitize(score, np.quantile(score, [1 / 3, 2 / 3]))
    qids = np.arange(n_rows) // rows_per_query
    return RankingDataset(np.hstack([informative, duplicates, noise]), grades, qids)


def blobs(n_points: int, centers, spread: float = 0.3, seed: int = 0):
    """Isotropic Gaussian blobs; returns ``(points, blob_labels)`` with points assigned round-robin."""
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=np.float64)
    labels = np.arange(n_points) % len(centers)
    pts = centers[labels] + spread * rng.normal(size=(n_points, centers.shape[1]))
    return pts, labels


def five_blob_centers(dim: int = 2, radius: float = 6.0) -> np.ndarray:
    ang = 2 * np.pi * np.arange(5) / 5
    c = np.zeros((5, dim))
    c[:, 0] = radius * np.cos(ang)
    c[:, 1] = radius * np.sin(ang)
    return c


def separable_corpus(n: int = 320, dim: int = 8, gap: float = 3.0, seed: int = 0):
    """Linearly separable two-class embeddings: class sign on the first axis, shifted by ``gap``."""
    from quboml.instances import EmbeddingCorpus

    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, size=n)
    vecs = rng.normal(size=(n, dim))
    vecs[:, 0] = np.abs(vecs[:, 0]) + gap / 2
    vecs[labels == 0, 0] *= -1
    # keep embeddings away from the origin so cosine stays defined
    vecs[:, 1] += 1.0
    return EmbeddingCorpus([f"d{i}" for i in range(n)], vecs, labels)
