"""Binary quadratic problems: storage, energy evaluation, penalties and composition.

Energy of an assignment ``x`` in {0,1}^n is::

    offset + sum_i linear[i] * x[i] + sum_{i<j} quadratic[(i, j)] * x[i] * x[j]
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from quboml.errors import DimensionError, InvalidConstraintError


@dataclass(frozen=True)
class BinaryQuadraticProblem:
    """Immutable QUBO with pair coefficients stored once per unordered pair.

    Parameters
    ----------
    n : int
        Number of binary variables.
    linear : array-like of shape (n,)
        Per-variable coefficients (diagonal of Q).
    quadratic : mapping (i, j) -> float
        Pair coefficients. ``(i, j)`` and ``(j, i)`` are merged into ``(min, max)``.
    offset : float
        Constant energy term.
    """

    n: int
    linear: np.ndarray
    quadratic: Mapping[tuple[int, int], float] = field(default_factory=dict)
    offset: float = 0.0

    def __post_init__(self):
        n = int(self.n)
        if n < 0:
            raise DimensionError("variable count must be nonnegative")
        linear = np.array(self.linear, dtype=np.float64).reshape(-1)
        if linear.shape[0] != n:
            raise DimensionError(f"linear has length {linear.shape[0]}, expected {n}")
        quad: dict[tuple[int, int], float] = {}
        for (i, j), v in dict(self.quadratic).items():
            i, j = int(i), int(j)
            if not (0 <= i < n and 0 <= j < n):
                raise DimensionError(f"pair ({i}, {j}) out of range for n={n}")
            if i == j:
                raise DimensionError(f"self-pair ({i}, {i}) not allowed; use linear")
            key = (i, j) if i < j else (j, i)
            quad[key] = quad.get(key, 0.0) + float(v)
        offset = float(self.offset)
        if not (np.all(np.isfinite(linear)) and all(math.isfinite(v) for v in quad.values())
                and math.isfinite(offset)):
            raise ValueError("all coefficients must be finite")
        linear.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "linear", linear)
        object.__setattr__(self, "quadratic", dict(sorted(quad.items())))
        object.__setattr__(self, "offset", offset)

    @classmethod
    def zeros(cls, n: int) -> "BinaryQuadraticProblem":
        return cls(n, np.zeros(n))

    @classmethod
    def from_matrix(cls, Q, offset: float = 0.0) -> "BinaryQuadraticProblem":
        """Build from a square matrix in any triangular/symmetric convention.

        ``x^T Q x`` is preserved: diagonal entries become linear terms and
        ``Q[i, j] + Q[j, i]`` becomes the pair coefficient.
        """
        Q = np.asarray(Q, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise DimensionError("Q must be square")
        n = Q.shape[0]
        S = Q + Q.T
        iu, ju = np.triu_indices(n, k=1)
        quad = {(int(i), int(j)): float(S[i, j]) for i, j in zip(iu, ju) if S[i, j] != 0.0}
        return cls(n, np.diag(Q).copy(), quad, offset)

    def pair_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(rows, cols, values)`` of the stored pairs."""
        if not self.quadratic:
            e = np.zeros(0, dtype=np.int64)
            return e, e.copy(), np.zeros(0)
        keys = np.array(list(self.quadratic.keys()), dtype=np.int64)
        vals = np.array(list(self.quadratic.values()), dtype=np.float64)
        return keys[:, 0], keys[:, 1], vals

    def coupling_matrix(self) -> np.ndarray:
        """Symmetric matrix J with zero diagonal and ``J[i, j] = J[j, i] = quadratic[(i, j)]``."""
        J = np.zeros((self.n, self.n))
        r, c, v = self.pair_arrays()
        J[r, c] = v
        J[c, r] = v
        return J

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "linear": [float(v) for v in self.linear],
            "quadratic": [[i, j, v] for (i, j), v in self.quadratic.items()],
            "offset": self.offset,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "BinaryQuadraticProblem":
        try:
            n = int(d["n"])
            linear = d.get("linear", [0.0] * n)
            quad: dict[tuple[int, int], float] = {}
            for entry in d.get("quadratic", []):
                i, j, v = entry
                key = (min(int(i), int(j)), max(int(i), int(j)))
                quad[key] = quad.get(key, 0.0) + float(v)
        except (KeyError, TypeError, ValueError) as exc:
            raise DimensionError(f"malformed problem JSON: {exc}") from exc
        return cls(n, linear, quad, float(d.get("offset", 0.0)))


def _as_bits(p: BinaryQuadraticProblem, x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != p.n:
        raise DimensionError(f"assignment length {x.shape} does not match n={p.n}")
    if not np.all((x == 0) | (x == 1)):
        raise ValueError("assignment entries must be 0 or 1")
    return x.astype(np.float64)


def energy(p: BinaryQuadraticProblem, x) -> float:
    """Evaluate the QUBO energy of a single binary assignment."""
    xb = _as_bits(p, x)
    r, c, v = p.pair_arrays()
    return float(p.offset + p.linear @ xb + (xb[r] * xb[c]) @ v)


def energies(p: BinaryQuadraticProblem, X) -> np.ndarray:
    """Vectorized energy of a batch of assignments, shape (m, n) -> (m,)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != p.n:
        raise DimensionError(f"batch shape {X.shape} does not match n={p.n}")
    r, c, v = p.pair_arrays()
    return p.offset + X @ p.linear + (X[:, r] * X[:, c]) @ v


def k_hot_constraint(n: int, k: int, strength: float) -> BinaryQuadraticProblem:
    """Penalty ``strength * (sum(x) - k)**2`` expanded into QUBO form."""
    if not 0 <= k <= n:
        raise InvalidConstraintError(f"k={k} must lie in [0, {n}]")
    if not strength > 0:
        raise InvalidConstraintError("strength must be positive")
    linear = np.full(n, strength * (1 - 2 * k), dtype=np.float64)
    quad = {(i, j): 2.0 * strength for i in range(n) for j in range(i + 1, n)}
    return BinaryQuadraticProblem(n, linear, quad, strength * k * k)


def compose(*problems: BinaryQuadraticProblem) -> BinaryQuadraticProblem:
    """Sum of problems over the same variables (energies add pointwise)."""
    if not problems:
        raise ValueError("compose needs at least one problem")
    n = problems[0].n
    linear = np.zeros(n)
    quad: dict[tuple[int, int], float] = {}
    offset = 0.0
    for p in problems:
        if p.n != n:
            raise DimensionError(f"size mismatch: {p.n} vs {n}")
        linear = linear + p.linear
        for key, v in p.quadratic.items():
            quad[key] = quad.get(key, 0.0) + v
        offset += p.offset
    return BinaryQuadraticProblem(n, linear, quad, offset)


def scale(p: BinaryQuadraticProblem, factor: float) -> BinaryQuadraticProblem:
    return BinaryQuadraticProblem(
        p.n, p.linear * factor, {k: v * factor for k, v in p.quadratic.items()}, p.offset * factor
    )


def energy_delta_bound(p: BinaryQuadraticProblem) -> float:
    """Sum of absolute coefficients; bounds max-minus-min energy over all assignments."""
    return float(np.abs(p.linear).sum() + sum(abs(v) for v in p.quadratic.values()))


def all_assignments(n: int) -> np.ndarray:
    """All 2**n assignments ordered by integer value (bit 0 = variable 0)."""
    idx = np.arange(2**n, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(np.int8)


def popcount(x: Iterable[int]) -> int:
    return int(np.sum(np.asarray(list(x) if not isinstance(x, np.ndarray) else x)))
