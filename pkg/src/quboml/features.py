"""Feature selection as a QUBO: importance on the diagonal, redundancy on pairs, k-hot penalty."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from quboml.annealing import AnnealConfig, _resolve_threads, select_k_hot, simulated_anneal
from quboml.errors import DimensionError, QuboMLError
from quboml.learners import fit_ridge
from quboml.qubo import BinaryQuadraticProblem, compose, energy_delta_bound, k_hot_constraint
from quboml.seeding import derive_seed

IMPORTANCE = ("mi", "pfi")
REDUNDANCY = ("cmi", "cpfi")


@dataclass(frozen=True)
class RankingDataset:
    rows: np.ndarray
    labels: np.ndarray
    query_ids: np.ndarray

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=np.float64))
        labels = np.asarray(self.labels).astype(np.int64).reshape(-1)
        qids = np.asarray(self.query_ids).reshape(-1)
        if not (rows.shape[0] == labels.shape[0] == qids.shape[0]):
            raise DimensionError("rows, labels and query_ids must have equal length")
        if rows.shape[0] == 0:
            raise DimensionError("dataset is empty")
        if rows.shape[1] < 2:
            raise DimensionError("need at least 2 features")
        if labels.min() < 0:
            raise ValueError("relevance grades must be nonnegative")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "query_ids", qids)

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class FeatureQuboSpec:
    importance: str = "mi"
    redundancy: str = "cmi"
    k: int = 10
    lam: float | None = None
    bins: int = 10
    redundancy_weight: float = 1.0
    repeats: int = 5
    ridge_l2: float = 1.0

    def __post_init__(self):
        if self.importance not in IMPORTANCE:
            raise QuboMLError(f"importance must be one of {IMPORTANCE}")
        if self.redundancy not in REDUNDANCY:
            raise QuboMLError(f"redundancy must be one of {REDUNDANCY}")
        if self.k < 1:
            raise QuboMLError("k must be >= 1")
        if self.lam is not None and self.lam <= 0:
            raise QuboMLError("lambda must be positive")
        if self.bins < 2:
            raise QuboMLError("bins must be >= 2")


# --- information measures -------------------------------------------------


def discretize(column, bins: int = 10) -> np.ndarray:
    """Equal-frequency codes ``floor(rank * bins / n)`` using the lowest rank for ties."""
    if bins < 2:
        raise QuboMLError("bins must be >= 2")
    v = np.asarray(column, dtype=np.float64).reshape(-1)
    n = v.size
    ranks = np.searchsorted(np.sort(v), v, side="left")
    return np.minimum(ranks * bins // max(n, 1), bins - 1).astype(np.int64)


def _joint_counts(*codes) -> np.ndarray:
    arrs = [np.unique(np.asarray(c), return_inverse=True)[1] for c in codes]
    shape = tuple(int(a.max()) + 1 for a in arrs)
    table = np.zeros(shape)
    np.add.at(table, tuple(arrs), 1.0)
    return table


def entropy(x) -> float:
    p = _joint_counts(x).ravel()
    p = p[p > 0] / p.sum()
    return float(-(p * np.log(p)).sum())


def _mi_from_table(t: np.ndarray) -> float:
    total = t.sum()
    if total == 0:
        return 0.0
    pxy = t / total
    px = pxy.sum(axis=1, keepdims=True)
    py = pxy.sum(axis=0, keepdims=True)
    nz = pxy > 0
    return float(max(0.0, np.sum(pxy[nz] * np.log(pxy[nz] / (px @ py)[nz]))))


def mutual_information(x, y) -> float:
    """Plug-in mutual information in nats."""
    x, y = np.asarray(x), np.asarray(y)
    if x.shape != y.shape or x.size == 0:
        raise DimensionError("x and y must have equal, nonzero length")
    t = _joint_counts(x, y)
    # symmetric by construction: MI of the transpose sums the same cells
    return 0.5 * (_mi_from_table(t) + _mi_from_table(t.T))


def conditional_mutual_information(xi, xj, y) -> float:
    """``sum_z p(z) * MI(xi; xj | y = z)`` with plug-in estimates, in nats."""
    xi, xj, y = np.asarray(xi), np.asarray(xj), np.asarray(y)
    if not (xi.shape == xj.shape == y.shape) or y.size == 0:
        raise DimensionError("inputs must have equal, nonzero length")
    t = _joint_counts(y, xi, xj)
    total = t.sum()
    out = 0.0
    for z in range(t.shape[0]):
        tz = t[z]
        nz = tz.sum()
        if nz:
            out += nz / total * 0.5 * (_mi_from_table(tz) + _mi_from_table(tz.T))
    return float(out)


# --- permutation importances ---------------------------------------------


def _split(n: int, seed: int, holdout: float = 0.25):
    order = np.random.default_rng(derive_seed(seed, "pfi-split")).permutation(n)
    n_eval = max(1, int(round(holdout * n)))
    if n_eval >= n:
        return order, order
    return order[n_eval:], order[:n_eval]


def _permutation_error(dataset: RankingDataset, cols: tuple[int, ...], l2: float, repeats: int, seed: int) -> float:
    for c in cols:
        if not 0 <= c < dataset.n_features:
            raise QuboMLError(f"feature index {c} out of range")
    train, test = _split(len(dataset.labels), seed)
    model = fit_ridge(dataset.rows[train], dataset.labels[train], l2)
    Xt = dataset.rows[test]
    yt = dataset.labels[test].astype(np.float64)
    base = float(np.mean((model.predict(Xt) - yt) ** 2))
    diffs = []
    for r in range(repeats):
        perm = np.random.default_rng(derive_seed(seed, "pfi-perm", r)).permutation(len(test))
        Xp = Xt.copy()
        for c in cols:
            Xp[:, c] = Xt[perm, c]
        diffs.append(float(np.mean((model.predict(Xp) - yt) ** 2)) - base)
    return float(np.mean(diffs))


def permutation_importance(dataset: RankingDataset, feature: int, l2: float = 1.0, repeats: int = 5, seed: int = 0) -> float:
    """Mean increase in held-out MSE of a ridge ranker after permuting one feature."""
    return _permutation_error(dataset, (feature,), l2, repeats, seed)


def conditional_permutation_importance(dataset: RankingDataset, i: int, j: int, l2: float = 1.0,
                                       repeats: int = 5, seed: int = 0) -> float:
    """Same as :func:`permutation_importance` but permuting ``i`` and ``j`` with one shared row permutation."""
    if i == j:
        raise QuboMLError("CPFI needs two distinct features")
    return _permutation_error(dataset, (i, j), l2, repeats, seed)


# --- QUBO ------------------------------------------------------------------


def minmax(v) -> np.ndarray:
    """Scale to [0, 1]; a constant input maps to zeros."""
    v = np.asarray(v, dtype=np.float64)
    lo, hi = (v.min(), v.max()) if v.size else (0.0, 0.0)
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def default_penalty(data: BinaryQuadraticProblem) -> float:
    """Twice the coefficient-magnitude bound of the data term (1.0 if the data term is empty)."""
    b = energy_delta_bound(data)
    return 2.0 * b if b > 0 else 1.0


def feature_data_term(importance, redundancy, redundancy_weight: float = 1.0) -> BinaryQuadraticProblem:
    imp = np.asarray(importance, dtype=np.float64).reshape(-1)
    red = np.asarray(redundancy, dtype=np.float64)
    n = imp.size
    if red.shape != (n, n):
        raise DimensionError(f"redundancy must be {n}x{n}, got {red.shape}")
    if not np.allclose(red, red.T, rtol=0, atol=1e-12):
        raise DimensionError("redundancy matrix must be symmetric")
    iu, ju = np.triu_indices(n, k=1)
    red_n = minmax(red[iu, ju]) * redundancy_weight
    quad = {(int(i), int(j)): float(v) for i, j, v in zip(iu, ju, red_n) if v != 0.0}
    return BinaryQuadraticProblem(n, -minmax(imp), quad)


def build_feature_qubo(importance, redundancy, k: int, lam: float | None = None,
                       redundancy_weight: float = 1.0) -> BinaryQuadraticProblem:
    """Min-max-normalized ``-importance`` on the diagonal, ``+redundancy`` on pairs, plus ``lam * (sum(x) - k)**2``."""
    data = feature_data_term(importance, redundancy, redundancy_weight)
    lam = default_penalty(data) if lam is None else lam
    return compose(data, k_hot_constraint(data.n, k, lam))


def _pairwise(fn, n: int, threads: int) -> np.ndarray:
    pairs = list(combinations(range(n), 2))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(lambda p: fn(*p), pairs))
    else:
        vals = [fn(i, j) for i, j in pairs]
    M = np.zeros((n, n))
    for (i, j), v in zip(pairs, vals):
        M[i, j] = M[j, i] = v
    return M


def compute_measures(dataset: RankingDataset, spec: FeatureQuboSpec, seed: int = 0, threads: int | None = None):
    """Return ``(importance vector, redundancy matrix)`` for the measures named in ``spec``."""
    threads = _resolve_threads(threads)
    n = dataset.n_features
    y = dataset.labels
    codes = [discretize(dataset.rows[:, c], spec.bins) for c in range(n)]
    if spec.importance == "mi":
        imp = np.array([mutual_information(codes[c], y) for c in range(n)])
    else:
        imp = np.array([permutation_importance(dataset, c, spec.ridge_l2, spec.repeats, seed) for c in range(n)])
    if spec.redundancy == "cmi":
        red = _pairwise(lambda i, j: conditional_mutual_information(codes[i], codes[j], y), n, threads)
    else:
        red = _pairwise(lambda i, j: conditional_permutation_importance(
            dataset, i, j, spec.ridge_l2, spec.repeats, seed), n, threads)
    return imp, red


@dataclass
class FeatureSelection:
    selected: list[int]
    k: int
    method: str
    energy: float
    lam: float
    repaired: bool
    importance: np.ndarray
    redundancy: np.ndarray
    timings_ms: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "selected": self.selected,
            "selected_feature_ids": [i + 1 for i in self.selected],
            "k": self.k,
            "method": self.method,
            "energy": self.energy,
            "lambda": self.lam,
            "repaired": self.repaired,
            "importance": [float(v) for v in self.importance],
        }


def select_features(dataset: RankingDataset, spec: FeatureQuboSpec, cfg: AnnealConfig | None = None,
                    repair: bool = True, polish: bool = True) -> FeatureSelection:
    """Compute measures, build the QUBO, anneal, and return the best ``k``-feature support."""
    cfg = cfg or AnnealConfig()
    if spec.k > dataset.n_features:
        raise QuboMLError(f"k={spec.k} exceeds feature count {dataset.n_features}")
    t0 = time.perf_counter()
    imp, red = compute_measures(dataset, spec, cfg.seed, cfg.threads)
    data = feature_data_term(imp, red, spec.redundancy_weight)
    lam = default_penalty(data) if spec.lam is None else spec.lam
    p = compose(data, k_hot_constraint(data.n, spec.k, lam))
    t1 = time.perf_counter()
    ss = simulated_anneal(p, cfg)
    bits, e, repaired = select_k_hot(p, ss, spec.k, repair, polish)
    t2 = time.perf_counter()
    return FeatureSelection(
        selected=[i for i, b in enumerate(bits) if b],
        k=spec.k,
        method=f"{spec.importance}+{spec.redundancy}",
        energy=e,
        lam=lam,
        repaired=repaired,
        importance=imp,
        redundancy=red,
        timings_ms={"build_ms": (t1 - t0) * 1e3, "solve_ms": (t2 - t1) * 1e3},
    )
