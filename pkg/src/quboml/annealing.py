"""Simulated-annealing sampler and exhaustive oracle for binary quadratic problems."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from quboml.errors import EmptyProblemError, SizeGuardError
from quboml.qubo import BinaryQuadraticProblem, energies, energy

MAX_BRUTE_FORCE_N = 25


@dataclass(frozen=True)
class AnnealConfig:
    reads: int = 100
    sweeps: int = 1000
    beta_hot: float | None = None
    beta_cold: float | None = None
    seed: int = 0
    threads: int | None = None

    def __post_init__(self):
        if self.reads < 1:
            raise ValueError("reads must be >= 1")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.beta_hot is not None and self.beta_hot <= 0:
            raise ValueError("beta_hot must be positive")
        if self.beta_cold is not None and self.beta_cold <= 0:
            raise ValueError("beta_cold must be positive")
        if (self.beta_hot is not None and self.beta_cold is not None
                and not self.beta_hot < self.beta_cold):
            raise ValueError("need beta_hot < beta_cold")


@dataclass(frozen=True)
class Sample:
    bits: tuple[int, ...]
    energy: float
    occurrences: int = 1


@dataclass(frozen=True)
class SampleSet:
    """Distinct samples sorted by ascending energy (ties by bit pattern)."""

    samples: tuple[Sample, ...]
    solve_time_ms: float = field(default=0.0, compare=False)

    @property
    def best(self) -> Sample:
        return self.samples[0]

    def lowest_with_popcount(self, k: int) -> Sample | None:
        for s in self.samples:
            if sum(s.bits) == k:
                return s
        return None

    def to_dict(self, include_timing: bool = True) -> dict:
        out: dict = {
            "samples": [
                {"bits": list(s.bits), "energy": s.energy, "occurrences": s.occurrences}
                for s in self.samples
            ]
        }
        if include_timing:
            out["solve_time_ms"] = self.solve_time_ms
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SampleSet":
        return cls(
            tuple(Sample(tuple(int(b) for b in s["bits"]), float(s["energy"]),
                         int(s["occurrences"])) for s in d["samples"]),
            float(d.get("solve_time_ms", 0.0)),
        )


def default_beta_range(p: BinaryQuadraticProblem) -> tuple[float, float]:
    """Inverse-temperature endpoints from single-flip energy-change magnitudes.

    Hot end accepts the largest possible uphill flip with probability 1/2,
    cold end accepts the smallest nonzero one with probability 1/100.
    """
    J = np.abs(p.coupling_matrix())
    max_delta = float(np.max(np.abs(p.linear) + J.sum(axis=1))) if p.n else 0.0
    mags = np.concatenate([np.abs(p.linear), np.abs(np.fromiter(p.quadratic.values(), float))])
    mags = mags[mags > 0]
    if max_delta == 0.0 or mags.size == 0:
        return 0.1, 1.0
    min_delta = float(mags.min())
    hot = math.log(2.0) / max_delta
    cold = math.log(100.0) / min_delta
    if cold <= hot:
        cold = hot * 100.0
    return hot, cold


@numba.njit(cache=True, nogil=True)
def _anneal_read(J, linear, x, betas, uniforms):
    n = x.shape[0]
    field_ = linear.copy()
    for i in range(n):
        if x[i]:
            for j in range(n):
                field_[j] += J[j, i]
    for s in range(betas.shape[0]):
        beta = betas[s]
        for i in range(n):
            delta = field_[i] if x[i] == 0 else -field_[i]
            if delta <= 0.0 or (beta * delta < 50.0 and uniforms[s, i] < math.exp(-beta * delta)):
                sign = 1.0 if x[i] == 0 else -1.0
                x[i] = 1 - x[i]
                for j in range(n):
                    field_[j] += sign * J[j, i]
    return x


def _resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("QUBOML_THREADS", "1") or 1)
    return max(1, int(threads))


def simulated_anneal(p: BinaryQuadraticProblem, cfg: AnnealConfig | None = None) -> SampleSet:
    """Metropolis single-flip annealing with a geometric beta schedule.

    Each read draws its own generator from ``SeedSequence(cfg.seed).spawn``,
    so results do not depend on the thread count.
    """
    cfg = cfg or AnnealConfig()
    if p.n == 0:
        raise EmptyProblemError("cannot anneal a problem with zero variables")
    t0 = time.perf_counter()
    hot, cold = default_beta_range(p)
    hot = cfg.beta_hot if cfg.beta_hot is not None else hot
    cold = cfg.beta_cold if cfg.beta_cold is not None else cold
    if cold <= hot:
        cold = hot * 100.0
    betas = np.geomspace(hot, cold, cfg.sweeps) if cfg.sweeps > 1 else np.array([cold])
    J = np.ascontiguousarray(p.coupling_matrix())
    linear = np.ascontiguousarray(p.linear, dtype=np.float64)
    children = np.random.SeedSequence(cfg.seed & 0xFFFFFFFFFFFFFFFF).spawn(cfg.reads)

    def one_read(ss):
        rng = np.random.default_rng(ss)
        x0 = rng.integers(0, 2, size=p.n).astype(np.int8)
        u = rng.random((cfg.sweeps, p.n))
        return _anneal_read(J, linear, x0, betas, u)

    threads = _resolve_threads(cfg.threads)
    if threads > 1 and cfg.reads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            finals = list(pool.map(one_read, children))
    else:
        finals = [one_read(ss) for ss in children]

    counts: dict[tuple[int, ...], int] = {}
    for x in finals:
        key = tuple(int(b) for b in x)
        counts[key] = counts.get(key, 0) + 1
    samples = [Sample(bits, energy(p, bits), c) for bits, c in counts.items()]
    samples.sort(key=lambda s: (s.energy, s.bits))
    return SampleSet(tuple(samples), (time.perf_counter() - t0) * 1e3)


def _enumerate_energies(p: BinaryQuadraticProblem, chunk_bits: int = 16):
    n = p.n
    shifts = np.arange(n)
    step = 1 << min(n, chunk_bits)
    for start in range(0, 1 << n, step):
        idx = np.arange(start, start + step, dtype=np.int64)
        X = ((idx[:, None] >> shifts) & 1).astype(np.float64)
        yield idx, energies(p, X)


def brute_force_solve(p: BinaryQuadraticProblem, rtol: float = 1e-12) -> tuple[tuple[int, ...], float]:
    """Global minimizer by exhaustive enumeration.

    Ties (within ``rtol`` relative) go to the assignment with the lowest
    integer value, reading variable 0 as the least significant bit.
    """
    if p.n > MAX_BRUTE_FORCE_N:
        raise SizeGuardError(f"brute force limited to n <= {MAX_BRUTE_FORCE_N}, got {p.n}")
    best_idx, best_e = 0, math.inf
    for idx, e in _enumerate_energies(p):
        m = float(e.min())
        tol = rtol * max(1.0, abs(m), abs(best_e) if math.isfinite(best_e) else 0.0)
        if m < best_e - tol:
            best_e = m
            best_idx = int(idx[np.flatnonzero(e <= m + tol)[0]])
    bits = tuple(int((best_idx >> i) & 1) for i in range(p.n))
    return bits, energy(p, bits)


def ground_states(p: BinaryQuadraticProblem, atol: float = 1e-9) -> list[tuple[int, ...]]:
    """Every assignment whose energy is within ``atol`` of the minimum."""
    if p.n > MAX_BRUTE_FORCE_N:
        raise SizeGuardError(f"brute force limited to n <= {MAX_BRUTE_FORCE_N}, got {p.n}")
    chunks = list(_enumerate_energies(p))
    emin = min(float(e.min()) for _, e in chunks)
    out = []
    for idx, e in chunks:
        for i in idx[e <= emin + atol]:
            out.append(tuple(int((int(i) >> b) & 1) for b in range(p.n)))
    return out


def energy_range(p: BinaryQuadraticProblem) -> tuple[float, float]:
    """Exact (min, max) energy by enumeration."""
    lo, hi = math.inf, -math.inf
    for _, e in _enumerate_energies(p):
        lo, hi = min(lo, float(e.min())), max(hi, float(e.max()))
    return lo, hi


def greedy_repair(p: BinaryQuadraticProblem, bits, k: int) -> tuple[int, ...]:
    """Move popcount to ``k`` one flip at a time, choosing the flip that lowers energy most."""
    x = np.array(bits, dtype=np.int8)
    while int(x.sum()) != k:
        want = 1 if x.sum() < k else 0
        cands = np.flatnonzero(x != want)
        best_i, best_e = -1, math.inf
        for i in cands:
            x[i] = want
            e = energy(p, x)
            x[i] = 1 - want
            if e < best_e:
                best_i, best_e = int(i), e
        x[best_i] = want
    return tuple(int(b) for b in x)


def select_k_hot(p: BinaryQuadraticProblem, ss: SampleSet, k: int, repair: bool = True,
                 polish: bool = True):
    """Pick the ``k``-hot answer from a sample set.

    Takes the lowest-energy sample with popcount ``k``; if none exists the
    best sample is greedily repaired. With ``polish`` the choice is then run
    through :func:`swap_descent`, which keeps the popcount. Single-flip
    annealing cannot cross the penalty barrier between ``k``-hot states at
    the temperatures where data-term differences matter.

    Returns ``(bits, energy, repaired)``.
    """
    s = ss.lowest_with_popcount(k)
    repaired = False
    if s is not None:
        bits = s.bits
    elif repair:
        bits = greedy_repair(p, ss.best.bits, k)
        repaired = True
    else:
        return ss.best.bits, ss.best.energy, False
    if polish:
        bits = swap_descent(p, bits)
    return bits, energy(p, bits), repaired


def swap_descent(p: BinaryQuadraticProblem, bits, max_steps: int = 10_000) -> tuple[int, ...]:
    """Best-improvement descent over popcount-preserving swaps (one bit off, one bit on)."""
    x = np.array(bits, dtype=np.float64)
    J = p.coupling_matrix()
    fld = p.linear + J @ x
    for _ in range(max_steps):
        on = np.flatnonzero(x == 1)
        off = np.flatnonzero(x == 0)
        if on.size == 0 or off.size == 0:
            break
        # delta of turning i off and j on: -fld_i + fld_j - J_ij
        delta = -fld[on][:, None] + fld[off][None, :] - J[np.ix_(on, off)]
        a, b = np.unravel_index(np.argmin(delta), delta.shape)
        if delta[a, b] >= -1e-12:
            break
        i, j = on[a], off[b]
        x[i], x[j] = 0.0, 1.0
        fld += J[:, j] - J[:, i]
    return tuple(int(v) for v in x)
