import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quboml.annealing import energy_range
from quboml.errors import DimensionError, InvalidConstraintError
from quboml.qubo import (
    BinaryQuadraticProblem,
    all_assignments,
    compose,
    energies,
    energy,
    energy_delta_bound,
    k_hot_constraint,
)

from conftest import random_problem


class TestEnergy:
    def test_all_zeros_is_offset_free_zero(self):
        p = random_problem(5, 0)
        assert energy(p, [0] * 5) == 0.0

    def test_single_term(self):
        assert energy(BinaryQuadraticProblem(1, [-1.0]), [1]) == -1.0

    def test_pair_cancels_linear(self):
        p = BinaryQuadraticProblem(2, [1.0, 1.0], {(0, 1): -2.0})
        assert energy(p, [1, 1]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            energy(BinaryQuadraticProblem.zeros(3), [1, 0])

    def test_batch_matches_single(self):
        p = random_problem(6, 3)
        X = all_assignments(6)
        np.testing.assert_allclose(energies(p, X), [energy(p, x) for x in X], rtol=0, atol=1e-12)

    def test_offset_included(self):
        p = BinaryQuadraticProblem(2, [0.0, 0.0], {}, offset=2.5)
        assert energy(p, [1, 1]) == 2.5


class TestConstruction:
    def test_lower_and_upper_pairs_merge(self):
        p = BinaryQuadraticProblem(3, np.zeros(3), {(2, 0): 1.0, (0, 2): 0.5})
        assert p.quadratic == {(0, 2): 1.5}

    def test_self_pair_rejected(self):
        with pytest.raises(DimensionError):
            BinaryQuadraticProblem(2, np.zeros(2), {(1, 1): 1.0})

    def test_out_of_range_rejected(self):
        with pytest.raises(DimensionError):
            BinaryQuadraticProblem(2, np.zeros(2), {(0, 2): 1.0})

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            BinaryQuadraticProblem(1, [np.inf])

    def test_from_matrix_conventions_agree(self, rng):
        A = rng.normal(size=(5, 5))
        upper = np.triu(A + np.tril(A, -1).T)
        sym = np.diag(np.diag(A)) + 0.5 * (A + A.T - 2 * np.diag(np.diag(A)))
        pa, pu, ps = (BinaryQuadraticProblem.from_matrix(M) for M in (A, upper, sym))
        for x in all_assignments(5):
            e = x @ A @ x
            assert energy(pa, x) == pytest.approx(e, abs=1e-12)
            assert energy(pu, x) == pytest.approx(e, abs=1e-12)
            assert energy(ps, x) == pytest.approx(e, abs=1e-12)

    def test_linear_is_read_only(self):
        p = BinaryQuadraticProblem(2, [1.0, 2.0])
        with pytest.raises(ValueError):
            p.linear[0] = 5.0

    def test_json_round_trip(self):
        p = random_problem(5, 9)
        q = BinaryQuadraticProblem.from_dict(json.loads(json.dumps(p.to_dict())))
        assert q.n == p.n and q.quadratic == p.quadratic and q.offset == p.offset
        np.testing.assert_array_equal(q.linear, p.linear)


class TestKHot:
    @pytest.mark.parametrize("x,expected", [((1, 1, 0), 0.0), ((0, 0, 0), 4.0), ((1, 1, 1), 1.0)])
    def test_examples(self, x, expected):
        assert energy(k_hot_constraint(3, 2, 1.0), x) == expected

    def test_k_above_n(self):
        with pytest.raises(InvalidConstraintError):
            k_hot_constraint(3, 4, 1.0)

    def test_nonpositive_strength(self):
        with pytest.raises(InvalidConstraintError):
            k_hot_constraint(3, 1, 0.0)

    @pytest.mark.parametrize("n", range(0, 13))
    def test_exhaustive_matches_squared_popcount(self, n):
        X = all_assignments(n)
        pc = X.sum(axis=1)
        for k in {0, n // 2, n}:
            e = energies(k_hot_constraint(n, k, 1.7), X)
            np.testing.assert_allclose(e, 1.7 * (pc - k) ** 2, rtol=1e-12, atol=1e-9)


class TestCompose:
    def test_zero_identity(self):
        b = random_problem(4, 1)
        c = compose(BinaryQuadraticProblem.zeros(4), b)
        for x in all_assignments(4):
            assert energy(c, x) == pytest.approx(energy(b, x), abs=1e-12)

    def test_coefficient_addition(self):
        c = compose(BinaryQuadraticProblem(1, [1.0]), BinaryQuadraticProblem(1, [2.0]))
        assert c.linear.tolist() == [3.0]

    def test_size_mismatch(self):
        with pytest.raises(DimensionError):
            compose(BinaryQuadraticProblem.zeros(2), BinaryQuadraticProblem.zeros(3))

    @pytest.mark.parametrize("seed", range(5))
    def test_associative_and_commutative(self, seed):
        n = 8
        a, b, c = (random_problem(n, 3 * seed + i) for i in range(3))
        X = all_assignments(n)
        ab_c = energies(compose(compose(a, b), c), X)
        a_bc = energies(compose(a, compose(b, c)), X)
        ba = energies(compose(b, a), X)
        ab = energies(compose(a, b), X)
        np.testing.assert_allclose(ab_c, a_bc, atol=1e-12)
        np.testing.assert_allclose(ab, ba, atol=1e-12)
        np.testing.assert_allclose(ab, energies(a, X) + energies(b, X), atol=1e-12)


class TestEnergyDeltaBound:
    def test_zero(self):
        assert energy_delta_bound(BinaryQuadraticProblem.zeros(3)) == 0.0

    def test_single(self):
        assert energy_delta_bound(BinaryQuadraticProblem(1, [-3.0])) == 3.0

    def test_two_variable_example_against_enumeration(self):
        p = BinaryQuadraticProblem(2, [1.0, -1.0], {(0, 1): 2.0})
        lo, hi = energy_range(p)
        assert (lo, hi) == (-1.0, 2.0)
        assert energy_delta_bound(p) == 4.0 >= hi - lo

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(1, 12), seed=st.integers(0, 2**32 - 1))
    def test_bound_dominates_range(self, n, seed):
        p = random_problem(n, seed, -3.0, 3.0)
        lo, hi = energy_range(p)
        assert energy_delta_bound(p) >= hi - lo - 1e-9
