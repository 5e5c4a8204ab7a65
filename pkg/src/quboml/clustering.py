"""Two-stage medoid clustering: classical k-medoids candidates, then QUBO refinement.

The refinement objective over candidate medoids ``x`` is::

    f(x) = x^T (gamma 11^T - alpha/2 Delta) x + x^T (beta Delta 1 - 2 gamma k 1)

with ``Delta = 1 - exp(-D / 2)`` over squared distances ``D``, ``alpha = 1/k``,
``beta = 1/n`` and ``gamma = 2``. An extra k-hot penalty, scaled to twice the
coefficient bound of ``f``, is added on top.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from quboml.annealing import AnnealConfig, select_k_hot, simulated_anneal
from quboml.errors import DimensionError, InvalidDistanceError, QuboMLError, UndefinedSeparationError
from quboml.features import default_penalty
from quboml.metrics import ndcg_at
from quboml.qubo import BinaryQuadraticProblem, compose, k_hot_constraint

GAMMA = 2.0


def squared_distances(points) -> np.ndarray:
    P = np.asarray(points, dtype=np.float64)
    sq = np.einsum("ij,ij->i", P, P)
    D = sq[:, None] + sq[None, :] - 2.0 * P @ P.T
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


def distances(points) -> np.ndarray:
    return np.sqrt(squared_distances(points))


# --- classical stage ---------------------------------------------------------


def _total_cost(Dist, medoids) -> float:
    return float(Dist[:, medoids].min(axis=1).sum())


def kmedoids(points, k: int, seed: int = 0, max_iter: int = 100) -> list[int]:
    """PAM: greedy build (1-median, then farthest points) followed by best-improvement swaps.

    Fully deterministic; ``seed`` is accepted for interface uniformity.
    """
    Dist = distances(points)
    n = Dist.shape[0]
    if not 1 <= k <= n:
        raise QuboMLError(f"k={k} must lie in [1, {n}]")
    if k == n:
        return list(range(n))
    medoids = [int(np.argmin(Dist.sum(axis=1)))]
    while len(medoids) < k:
        nearest = Dist[:, medoids].min(axis=1)
        nearest[medoids] = -1.0
        medoids.append(int(np.argmax(nearest)))
    cost = _total_cost(Dist, medoids)
    for _ in range(max_iter):
        best = (cost, -1, -1)
        non = [o for o in range(n) if o not in set(medoids)]
        for a in range(k):
            others = medoids[:a] + medoids[a + 1:]
            base = Dist[:, others].min(axis=1) if others else np.full(n, np.inf)
            # cost of swapping medoid a for every candidate o at once
            costs = np.minimum(base[:, None], Dist[:, non]).sum(axis=0)
            j = int(np.argmin(costs))
            if costs[j] < best[0] - 1e-12:
                best = (float(costs[j]), a, non[j])
        if best[1] < 0:
            break
        cost = best[0]
        medoids[best[1]] = best[2]
    return sorted(medoids)


def assign_to_medoids(points, medoid_indices) -> np.ndarray:
    """Nearest medoid (Euclidean) per point; ties go to the lowest medoid index."""
    if len(medoid_indices) == 0:
        raise QuboMLError("need at least one medoid")
    P = np.asarray(points, dtype=np.float64)
    meds = np.array(sorted(int(m) for m in medoid_indices))
    d = ((P[:, None, :] - P[meds][None, :, :]) ** 2).sum(axis=2)
    return meds[np.argmin(d, axis=1)]


def davies_bouldin(points, assignments) -> float:
    """Mean over clusters of ``max_j (s_i + s_j) / d(c_i, c_j)`` with centroid-based scatter."""
    P = np.asarray(points, dtype=np.float64)
    a = np.asarray(assignments)
    labels = np.unique(a)
    if labels.size < 2:
        raise QuboMLError("DBI needs at least 2 nonempty clusters")
    cents = np.array([P[a == c].mean(axis=0) for c in labels])
    scatter = np.array([np.linalg.norm(P[a == c] - cents[i], axis=1).mean() for i, c in enumerate(labels)])
    sep = np.sqrt(((cents[:, None, :] - cents[None, :, :]) ** 2).sum(axis=2))
    off = ~np.eye(labels.size, dtype=bool)
    if np.any(sep[off] == 0):
        raise UndefinedSeparationError("two clusters share a centroid")
    with np.errstate(divide="ignore"):
        R = (scatter[:, None] + scatter[None, :]) / np.where(off, sep, np.inf)
    return float(R.max(axis=1).mean())


def silhouette(Dist, labels) -> float:
    """Mean silhouette coefficient from a precomputed distance matrix (singletons score 0)."""
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    n = len(labels)
    s = np.zeros(n)
    for i in range(n):
        own = labels == labels[i]
        if own.sum() <= 1:
            continue
        a = Dist[i, own].sum() / (own.sum() - 1)
        b = min(Dist[i, labels == c].mean() for c in uniq if c != labels[i])
        s[i] = (b - a) / max(a, b) if max(a, b) > 0 else 0.0
    return float(s.mean())


def auto_k(points, k_range, seed: int = 0) -> int:
    """Pick k maximizing ``silhouette - DBI / max(DBI)``; ties go to the smaller k."""
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise QuboMLError("empty k range")
    if len(ks) == 1:
        return ks[0]
    P = np.asarray(points, dtype=np.float64)
    Dist = distances(P)
    sil, dbi = [], []
    for k in ks:
        a = assign_to_medoids(P, kmedoids(P, k, seed))
        sil.append(silhouette(Dist, a))
        dbi.append(davies_bouldin(P, a))
    dbi = np.array(dbi)
    norm = dbi / dbi.max() if dbi.max() > 0 else dbi
    score = np.array(sil) - norm
    return ks[int(np.argmax(score))]


# --- QUBO stage ---------------------------------------------------------------


def welsch_dissimilarity(D) -> np.ndarray:
    """``1 - exp(-D/2)`` elementwise for a symmetric squared-distance matrix."""
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise InvalidDistanceError("distance matrix must be square")
    if np.any(D < 0):
        raise InvalidDistanceError("squared distances must be nonnegative")
    return -np.expm1(-0.5 * D)


def medoid_objective(Delta, k: int, x) -> float:
    """Direct quadratic-form evaluation of the weighted medoid objective."""
    Delta = np.asarray(Delta, dtype=np.float64)
    n = Delta.shape[0]
    alpha, beta = 1.0 / k, 1.0 / n
    x = np.asarray(x, dtype=np.float64)
    ones = np.ones(n)
    M = GAMMA * np.outer(ones, ones) - 0.5 * alpha * Delta
    v = beta * Delta @ ones - 2.0 * GAMMA * k * ones
    return float(x @ M @ x + x @ v)


def medoid_data_term(Delta, k: int) -> BinaryQuadraticProblem:
    """The weighted objective as pair coefficients (``x_i^2 = x_i`` folds the diagonal into linear terms)."""
    Delta = np.asarray(Delta, dtype=np.float64)
    n = Delta.shape[0]
    if not 1 <= k <= n:
        raise QuboMLError(f"k={k} must lie in [1, {n}]")
    alpha, beta = 1.0 / k, 1.0 / n
    M = GAMMA - 0.5 * alpha * Delta
    linear = np.diag(M) + beta * Delta.sum(axis=1) - 2.0 * GAMMA * k
    iu, ju = np.triu_indices(n, k=1)
    quad = {(int(i), int(j)): float(2.0 * M[i, j]) for i, j in zip(iu, ju)}
    return BinaryQuadraticProblem(n, linear, quad)


def build_medoid_qubo(Delta, k: int, penalty: float | None = None) -> BinaryQuadraticProblem:
    data = medoid_data_term(Delta, k)
    strength = default_penalty(data) if penalty is None else penalty
    return compose(data, k_hot_constraint(data.n, k, strength))


@dataclass(frozen=True)
class MedoidCandidates:
    indices: tuple[int, ...]
    source_k: int


def candidate_pool(points, k: int, seed: int = 0) -> MedoidCandidates:
    """Classical k-medoids with ``min(4k, n/2)`` clusters (at least ``k``)."""
    n = len(points)
    source_k = min(n, max(k, min(4 * k, n // 2)))
    return MedoidCandidates(tuple(kmedoids(points, source_k, seed)), source_k)


def refine_medoids(points, candidates: MedoidCandidates, k: int, cfg: AnnealConfig | None = None,
                   repair: bool = True, polish: bool = True):
    """Select ``k`` of the candidates by annealing the medoid QUBO.

    Returns ``(corpus_indices, feasible)`` where ``feasible`` says whether the
    sampler produced a ``k``-hot sample without repair.
    """
    cfg = cfg or AnnealConfig()
    cand = list(candidates.indices)
    if len(cand) < k:
        raise QuboMLError(f"{len(cand)} candidates cannot supply k={k} medoids")
    if len(cand) == k:
        return sorted(cand), True
    P = np.asarray(points, dtype=np.float64)[cand]
    D = squared_distances(P)
    iu = np.triu_indices(len(cand), k=1)
    med = float(np.median(D[iu]))
    if med > 0:
        D = D / med
    p = build_medoid_qubo(welsch_dissimilarity(D), k)
    ss = simulated_anneal(p, cfg)
    bits, _, _ = select_k_hot(p, ss, k, repair, polish)
    feasible = ss.lowest_with_popcount(k) is not None
    return sorted(cand[i] for i, b in enumerate(bits) if b), feasible


def cosine_rows(A, B) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    na = np.linalg.norm(A, axis=1, keepdims=True)
    nb = np.linalg.norm(B, axis=1, keepdims=True)
    return (A / np.where(na > 0, na, 1.0)) @ (B / np.where(nb > 0, nb, 1.0)).T


@dataclass
class ClusteringResult:
    medoids: list[int]
    assignments: np.ndarray
    dbi: float
    feasible: bool
    k: int
    ndcg10_mean: float | None = None
    timings_ms: dict = field(default_factory=dict)

    def to_dict(self, ids=None) -> dict:
        ids = ids if ids is not None else list(range(len(self.assignments)))
        return {
            "medoid_ids": [ids[m] for m in self.medoids],
            "k": self.k,
            "dbi": None if math.isnan(self.dbi) else self.dbi,
            "feasible": self.feasible,
            "ndcg10_mean": self.ndcg10_mean,
            "assignments": {str(ids[i]): ids[int(m)] for i, m in enumerate(self.assignments)},
        }


def retrieve(query_vectors, doc_vectors, result: ClusteringResult, depth: int = 10) -> list[list[int]]:
    """Route each query to the medoid with highest cosine, then rank that cluster's documents by cosine."""
    Q = np.atleast_2d(np.asarray(query_vectors, dtype=np.float64))
    Dv = np.asarray(doc_vectors, dtype=np.float64)
    if Q.shape[1] != Dv.shape[1]:
        raise DimensionError(f"query dim {Q.shape[1]} != doc dim {Dv.shape[1]}")
    meds = np.array(result.medoids)
    route = cosine_rows(Q, Dv[meds])
    out = []
    for qi in range(Q.shape[0]):
        m = meds[int(np.argmax(route[qi]))]
        members = np.flatnonzero(result.assignments == m)
        sims = cosine_rows(Q[qi], Dv[members])[0]
        order = np.lexsort((members, -sims))
        out.append([int(members[i]) for i in order[:depth]])
    return out


def cluster_pipeline(points, k: int, cfg: AnnealConfig | None = None, candidates=None,
                     queries=None, relevant=None, depth: int = 10) -> ClusteringResult:
    """Candidates -> QUBO refinement -> full-space reassignment -> DBI (and nDCG if queries given).

    ``relevant`` is a list (one per query) of sets of relevant document indices.
    """
    cfg = cfg or AnnealConfig()
    P = np.asarray(points, dtype=np.float64)
    t0 = time.perf_counter()
    cands = candidates if candidates is not None else candidate_pool(P, k, cfg.seed)
    t1 = time.perf_counter()
    medoids, feasible = refine_medoids(P, cands, k, cfg)
    t2 = time.perf_counter()
    assign = assign_to_medoids(P, medoids)
    dbi = davies_bouldin(P, assign) if len(set(assign.tolist())) >= 2 else math.nan
    res = ClusteringResult(medoids, assign, dbi, feasible, k)
    if queries is not None:
        ranked = retrieve(queries, P, res, depth)
        scores = [ndcg_at(r, {d: 1 for d in rel}, depth) for r, rel in zip(ranked, relevant or [])]
        res.ndcg10_mean = float(np.mean(scores)) if scores else None
    t3 = time.perf_counter()
    res.timings_ms = {"build_ms": (t1 - t0) * 1e3, "solve_ms": (t2 - t1) * 1e3, "eval_ms": (t3 - t2) * 1e3}
    return res
