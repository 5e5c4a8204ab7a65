"""Instance selection as per-batch QUBOs.

Pairs get signed cosine coefficients (+cos for same label, -cos otherwise);
diagonals are zero (``bcos``), margin-distance based (``svc``) or
leave-one-out influence based (``instance_deletion``). Every batch carries a
k-hot penalty that keeps ``round(retain_fraction * n_b)`` instances.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from quboml.annealing import AnnealConfig, select_k_hot, simulated_anneal
from quboml.errors import (
    DegenerateLabelsError,
    DegenerateVectorError,
    DimensionError,
    InvalidConstraintError,
    QuboMLError,
)
from quboml.features import default_penalty, minmax
from quboml.learners import LinearModel, fit_linear_margin, fit_logistic, margin_distance, predict_proba
from quboml.metrics import f1, make_folds
from quboml.qubo import BinaryQuadraticProblem, compose, k_hot_constraint
from quboml.seeding import derive_seed

METHODS = ("bcos", "svc", "instance_deletion")


@dataclass(frozen=True)
class EmbeddingCorpus:
    ids: list
    vectors: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=np.float64)
        if vecs.ndim != 2 or vecs.shape[0] == 0:
            raise DimensionError("corpus needs a nonempty 2-D vector array")
        if len(self.ids) != vecs.shape[0]:
            raise DimensionError("ids and vectors differ in length")
        if not np.all(np.isfinite(vecs)):
            raise ValueError("embedding entries must be finite")
        labels = None
        if self.labels is not None:
            labels = np.asarray(self.labels).astype(np.int64).reshape(-1)
            if labels.shape[0] != vecs.shape[0]:
                raise DimensionError("labels and vectors differ in length")
        object.__setattr__(self, "ids", list(self.ids))
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def subset(self, idx) -> "EmbeddingCorpus":
        idx = np.asarray(idx, dtype=np.int64)
        return EmbeddingCorpus([self.ids[i] for i in idx], self.vectors[idx],
                               None if self.labels is None else self.labels[idx])

    def require_labels(self) -> np.ndarray:
        if self.labels is None:
            raise QuboMLError("this method needs labeled records; the corpus has no 'label' field")
        return self.labels


@dataclass(frozen=True)
class InstanceSpec:
    method: str = "bcos"
    retain_fraction: float = 0.75
    batch_size: int = 80
    penalty: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise QuboMLError(f"method must be one of {METHODS}")
        if not 0 < self.retain_fraction <= 1:
            raise QuboMLError("retain_fraction must lie in (0, 1]")
        if self.batch_size < 2:
            raise QuboMLError("batch_size must be >= 2")
        if self.penalty is not None and self.penalty <= 0:
            raise QuboMLError("penalty must be positive")


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise DegenerateVectorError("cosine undefined for a zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def cosine_matrix(vectors) -> np.ndarray:
    V = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(V, axis=1)
    if np.any(norms == 0):
        raise DegenerateVectorError("cosine undefined for a zero vector")
    U = V / norms[:, None]
    return np.clip(U @ U.T, -1.0, 1.0)


def bcos_offdiagonals(batch: EmbeddingCorpus) -> np.ndarray:
    """Signed cosine matrix (zero diagonal): +cos for equal labels, -cos for different labels."""
    if len(batch) < 2:
        raise QuboMLError("batch needs at least 2 records")
    labels = batch.require_labels()
    C = cosine_matrix(batch.vectors)
    sign = np.where(labels[:, None] == labels[None, :], 1.0, -1.0)
    M = sign * C
    np.fill_diagonal(M, 0.0)
    return M


def diagonals_from_scores(raw) -> np.ndarray:
    """Min-max normalize importance scores within the batch and negate (keeping important rows lowers energy)."""
    return -minmax(raw)


def svc_raw_scores(distances) -> np.ndarray:
    return 1.0 / (np.asarray(distances, dtype=np.float64) + 1e-12)


def fit_fold_margin_model(fold: EmbeddingCorpus, seed: int = 0) -> LinearModel:
    return fit_linear_margin(fold.vectors, fold.require_labels(), seed=seed)


def svc_diagonals(fold: EmbeddingCorpus, batch_indices, model: LinearModel | None = None, seed: int = 0) -> np.ndarray:
    """Diagonals from ``1 / (distance to the fold's linear margin + 1e-12)``, normalized per batch."""
    model = model if model is not None else fit_fold_margin_model(fold, seed)
    d = margin_distance(model, fold.vectors[np.asarray(batch_indices, dtype=np.int64)])
    return diagonals_from_scores(svc_raw_scores(np.atleast_1d(d)))


def deletion_influence(batch: EmbeddingCorpus, seed: int = 0, l2: float = 1e-2) -> np.ndarray:
    """Raw leave-one-out influence ``mean_k |p_k - p_k^(-i)|`` over the batch.

    A deletion that leaves a single class gets the largest influence among
    the well-defined deletions (1.0 if there are none).
    """
    labels = batch.require_labels()
    n = len(batch)
    if n < 3:
        raise QuboMLError("deletion influence needs at least 3 records")
    X = batch.vectors
    base = predict_proba(fit_logistic(X, labels, l2=l2, seed=seed), X)
    infl = np.full(n, np.nan)
    for i in range(n):
        keep = np.arange(n) != i
        try:
            m = fit_logistic(X[keep], labels[keep], l2=l2, seed=seed)
        except DegenerateLabelsError:
            continue
        infl[i] = float(np.mean(np.abs(base - predict_proba(m, X))))
    broken = np.isnan(infl)
    if broken.any():
        infl[broken] = np.nanmax(infl) if (~broken).any() else 1.0
    return infl


def deletion_influence_diagonals(batch: EmbeddingCorpus, seed: int = 0) -> np.ndarray:
    return diagonals_from_scores(deletion_influence(batch, seed))


def batch_partition(n: int, batch_size: int = 80) -> list[range]:
    if n < 1:
        raise QuboMLError("need at least one record")
    return [range(s, min(s + batch_size, n)) for s in range(0, n, batch_size)]


def retained_count(n_b: int, retain_fraction: float) -> int:
    # Python's round is half-to-even
    return int(round(retain_fraction * n_b))


def instance_data_term(batch: EmbeddingCorpus, diagonal=None) -> BinaryQuadraticProblem:
    M = bcos_offdiagonals(batch)
    n = len(batch)
    iu, ju = np.triu_indices(n, k=1)
    quad = {(int(i), int(j)): float(M[i, j]) for i, j in zip(iu, ju) if M[i, j] != 0.0}
    lin = np.zeros(n) if diagonal is None else np.asarray(diagonal, dtype=np.float64)
    return BinaryQuadraticProblem(n, lin, quad)


def build_instance_qubo(batch: EmbeddingCorpus, spec: InstanceSpec, diagonal=None, seed: int = 0) -> BinaryQuadraticProblem:
    """Data term plus k-hot retention penalty for one batch.

    ``diagonal`` overrides the scheme's diagonal (used when the svc model is
    fit on the whole fold rather than the batch).
    """
    k_b = retained_count(len(batch), spec.retain_fraction)
    if k_b == 0:
        raise InvalidConstraintError("retain_fraction keeps zero records in this batch")
    if diagonal is None:
        if spec.method == "svc":
            diagonal = svc_diagonals(batch, np.arange(len(batch)), seed=seed)
        elif spec.method == "instance_deletion":
            diagonal = deletion_influence_diagonals(batch, seed)
    data = instance_data_term(batch, diagonal)
    strength = default_penalty(data) if spec.penalty is None else spec.penalty
    return compose(data, k_hot_constraint(data.n, k_b, strength))


@dataclass
class InstanceSelection:
    kept: list[int]
    kept_ids: list
    target_fraction: float
    method: str
    per_batch: list[dict]
    n_total: int
    timings_ms: dict = field(default_factory=dict)

    @property
    def achieved_fraction(self) -> float:
        return len(self.kept) / self.n_total

    def to_dict(self) -> dict:
        return {
            "kept_ids": self.kept_ids,
            "target_fraction": self.target_fraction,
            "achieved_fraction": self.achieved_fraction,
            "method": self.method,
            "per_batch": self.per_batch,
        }


def select_instances(corpus: EmbeddingCorpus, spec: InstanceSpec, cfg: AnnealConfig | None = None,
                     repair: bool = True, polish: bool = True) -> InstanceSelection:
    """Solve every batch independently and return the union of kept indices."""
    cfg = cfg or AnnealConfig()
    corpus.require_labels()
    t0 = time.perf_counter()
    margin_model = fit_fold_margin_model(corpus, cfg.seed) if spec.method == "svc" else None
    build_ms = (time.perf_counter() - t0) * 1e3
    solve_ms = 0.0
    kept: list[int] = []
    per_batch = []
    for b, rng_ in enumerate(batch_partition(len(corpus), spec.batch_size)):
        idx = np.arange(rng_.start, rng_.stop)
        batch = corpus.subset(idx)
        k_b = retained_count(len(idx), spec.retain_fraction)
        if len(idx) < 2 or k_b in (0, len(idx)):
            kept.extend(int(i) for i in idx[:k_b])
            per_batch.append({"k_b": k_b, "energy": 0.0, "repaired": False})
            continue
        t1 = time.perf_counter()
        bseed = derive_seed(cfg.seed, "instances", b)
        diag = None
        if spec.method == "svc":
            diag = svc_diagonals(corpus, idx, margin_model)
        elif spec.method == "instance_deletion" and len(idx) >= 3 and len(set(batch.labels.tolist())) == 2:
            diag = deletion_influence_diagonals(batch, bseed)
        elif spec.method == "instance_deletion":
            diag = np.zeros(len(idx))
        p = build_instance_qubo(batch, spec, diagonal=diag)
        t2 = time.perf_counter()
        ss = simulated_anneal(p, AnnealConfig(cfg.reads, cfg.sweeps, cfg.beta_hot, cfg.beta_cold, bseed, cfg.threads))
        bits, e, repaired = select_k_hot(p, ss, k_b, repair, polish)
        t3 = time.perf_counter()
        build_ms += (t2 - t1) * 1e3
        solve_ms += (t3 - t2) * 1e3
        kept.extend(int(idx[i]) for i, v in enumerate(bits) if v)
        per_batch.append({"k_b": k_b, "energy": e, "repaired": repaired})
    return InstanceSelection(
        kept=kept,
        kept_ids=[corpus.ids[i] for i in kept],
        target_fraction=spec.retain_fraction,
        method=spec.method,
        per_batch=per_batch,
        n_total=len(corpus),
        timings_ms={"build_ms": build_ms, "solve_ms": solve_ms},
    )


def random_selection(n: int, retain_fraction: float, batch_size: int, seed: int) -> list[int]:
    """Seeded random drop with the same per-batch retention counts as the QUBO methods."""
    kept = []
    for b, r in enumerate(batch_partition(n, batch_size)):
        k_b = retained_count(len(r), retain_fraction)
        rng = np.random.default_rng(derive_seed(seed, "random-drop", b))
        kept.extend(sorted(int(r.start + i) for i in rng.choice(len(r), size=k_b, replace=False)))
    return kept


def reduction_sweep(corpus: EmbeddingCorpus, fractions, methods=METHODS + ("random",), n_folds: int = 5,
                    batch_size: int = 80, cfg: AnnealConfig | None = None) -> list[dict]:
    """Fold-averaged F1 of logistic regression trained on the retained instances.

    Returns rows ``{"fraction", "method", "f1_mean", "f1_std"}``.
    """
    cfg = cfg or AnnealConfig()
    labels = corpus.require_labels()
    plan = make_folds(len(corpus), n_folds, derive_seed(cfg.seed, "folds"))
    rows = []
    for frac in fractions:
        if not 0 < frac <= 1:
            raise QuboMLError(f"fraction {frac} outside (0, 1]")
        for method in methods:
            scores = []
            for fold in range(n_folds):
                tr, te = plan.train_indices(fold), plan.test_indices(fold)
                train = corpus.subset(tr)
                fold_cfg = AnnealConfig(cfg.reads, cfg.sweeps, cfg.beta_hot, cfg.beta_cold,
                                        derive_seed(cfg.seed, "sweep-fold", fold), cfg.threads)
                if frac == 1.0:
                    keep = list(range(len(tr)))
                elif method == "random":
                    keep = random_selection(len(tr), frac, batch_size, fold_cfg.seed)
                else:
                    keep = select_instances(train, InstanceSpec(method, frac, batch_size), fold_cfg).kept
                m = fit_logistic(train.vectors[keep], labels[tr][keep])
                preds = (predict_proba(m, corpus.vectors[te]) >= 0.5).astype(int)
                scores.append(f1(preds, labels[te]))
            rows.append({"fraction": float(frac), "method": method,
                         "f1_mean": float(np.mean(scores)), "f1_std": float(np.std(scores))})
    return rows
