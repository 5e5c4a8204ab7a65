import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quboml.annealing import brute_force_solve
from quboml.errors import DimensionError, QuboMLError
from quboml.features import (
    FeatureQuboSpec,
    RankingDataset,
    build_feature_qubo,
    conditional_mutual_information,
    conditional_permutation_importance,
    discretize,
    entropy,
    feature_data_term,
    minmax,
    mutual_information,
    permutation_importance,
)
from quboml.qubo import energy


def _table_vectors(table):
    """Expand a 2-D contingency table into paired code vectors."""
    xs, ys = [], []
    for (i, j), c in np.ndenumerate(np.asarray(table)):
        xs += [i] * int(c)
        ys += [j] * int(c)
    return np.array(xs), np.array(ys)


class TestDiscretize:
    def test_ten_bins(self):
        assert discretize(np.arange(10.0), 10).tolist() == list(range(10))

    def test_two_bins(self):
        assert discretize(np.arange(10.0), 2).tolist() == [0] * 5 + [1] * 5

    def test_constant(self):
        assert discretize(np.full(7, 3.3), 4).tolist() == [0] * 7

    def test_ties_share_a_code(self):
        codes = discretize([1.0, 1.0, 1.0, 2.0], 4)
        assert codes[0] == codes[1] == codes[2] == 0 and codes[3] == 3

    def test_bad_bins(self):
        with pytest.raises(QuboMLError):
            discretize([1.0, 2.0], 1)


class TestMutualInformation:
    def test_independent_table(self):
        x, y = _table_vectors([[2, 2], [2, 2]])
        assert mutual_information(x, y) == pytest.approx(0.0, abs=1e-15)

    def test_identity_equals_entropy(self):
        x = np.array([0, 1, 2, 0, 1, 2, 2])
        assert mutual_information(x, x) == pytest.approx(entropy(x), abs=1e-12)

    def test_noisy_table_matches_entropy_identity(self):
        x, y = _table_vectors([[4, 1], [1, 4]])
        oracle = entropy(x) + entropy(y) - entropy(2 * x + y)
        assert oracle == pytest.approx(math.log(2) - (0.8 * math.log(1 / 0.8) + 0.2 * math.log(1 / 0.2)), abs=1e-12)
        assert mutual_information(x, y) == pytest.approx(oracle, abs=1e-12)
        assert mutual_information(x, y) == pytest.approx(0.19274, abs=1e-5)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=40))
    def test_symmetric_and_bounded(self, pairs):
        x = np.array([p[0] for p in pairs])
        y = np.array([p[1] for p in pairs])
        mi = mutual_information(x, y)
        assert mi == pytest.approx(mutual_information(y, x), abs=1e-12)
        assert -1e-12 <= mi <= min(entropy(x), entropy(y)) + 1e-12

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            mutual_information([0, 1], [0])


class TestConditionalMutualInformation:
    def test_constant_target_reduces_to_mi(self, rng):
        a, b = rng.integers(0, 3, 50), rng.integers(0, 3, 50)
        assert conditional_mutual_information(a, b, np.zeros(50, int)) == pytest.approx(mutual_information(a, b), abs=1e-12)

    def test_chain_rule(self, rng):
        a, b, y = rng.integers(0, 3, 80), rng.integers(0, 3, 80), rng.integers(0, 2, 80)
        # I(a; b | y) = H(a,y) + H(b,y) - H(a,b,y) - H(y)
        oracle = entropy(3 * a + y) + entropy(3 * b + y) - entropy(9 * y + 3 * a + b) - entropy(y)
        assert conditional_mutual_information(a, b, y) == pytest.approx(oracle, abs=1e-12)

    def test_copies_given_label(self):
        a = np.array([0, 1, 0, 1, 0, 1, 0, 1])
        y = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        assert conditional_mutual_information(a, a, y) == pytest.approx(math.log(2), abs=1e-12)


def _linear_dataset(seed=0, n=400):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    # integer grades driven by feature 0 alone
    y = np.clip(np.round(3 * X[:, 0] + 0.1 * rng.normal(size=n)) + 10, 0, None)
    return RankingDataset(X, y, np.arange(n) // 20)


class TestPermutationImportance:
    def test_signal_beats_noise(self):
        ds = _linear_dataset()
        assert permutation_importance(ds, 0) > 1.0
        assert abs(permutation_importance(ds, 1)) < 0.1

    def test_deterministic(self):
        ds = _linear_dataset()
        assert permutation_importance(ds, 0, seed=4) == permutation_importance(ds, 0, seed=4)

    def test_conditional_pair(self):
        ds = _linear_dataset()
        assert conditional_permutation_importance(ds, 0, 1) > 1.0
        assert abs(conditional_permutation_importance(ds, 1, 2)) < 0.1

    def test_same_feature(self):
        with pytest.raises(QuboMLError):
            conditional_permutation_importance(_linear_dataset(), 1, 1)


class TestFeatureQubo:
    def test_minmax(self):
        np.testing.assert_allclose(minmax([1.0, 3.0, 2.0]), [0.0, 1.0, 0.5])
        np.testing.assert_array_equal(minmax([5.0, 5.0]), [0.0, 0.0])

    def test_two_features_pick_more_important(self):
        p = build_feature_qubo([1.0, 0.0], np.zeros((2, 2)), k=1, lam=10.0)
        bits, e = brute_force_solve(p)
        assert list(bits) == [1, 0] and e == pytest.approx(-1.0)

    def test_redundancy_splits_duplicates(self):
        imp = [1.0, 1.0, 0.8, 0.0]
        red = np.zeros((4, 4))
        red[0, 1] = red[1, 0] = 5.0
        p = build_feature_qubo(imp, red, k=2, lam=10.0)
        bits, _ = brute_force_solve(p)
        assert bits[2] == 1 and bits[0] + bits[1] == 1 and bits[3] == 0

    def test_asymmetric_redundancy(self):
        with pytest.raises(DimensionError):
            feature_data_term([1, 1], [[0, 1], [0, 0]])

    def test_energy_formula(self, rng):
        imp = rng.random(5)
        red = rng.random((5, 5))
        red = red + red.T
        p = build_feature_qubo(imp, red, k=2, lam=3.0)
        ni = minmax(imp)
        iu = np.triu_indices(5, 1)
        nr = minmax(red[iu])
        for bits in [(1, 1, 0, 0, 0), (0, 1, 0, 1, 1), (0, 0, 0, 0, 0)]:
            x = np.array(bits)
            pair = sum(nr[t] * x[i] * x[j] for t, (i, j) in enumerate(zip(*iu)))
            want = -ni @ x + pair + 3.0 * (x.sum() - 2) ** 2
            assert energy(p, bits) == pytest.approx(want, abs=1e-12)

    @pytest.mark.parametrize("shift,scale", [(0.0, 7.0), (3.0, 1.0), (-2.0, 0.25)])
    def test_affine_invariance_of_argmin(self, shift, scale, rng):
        imp = rng.random(6)
        red = rng.random((6, 6))
        red = red + red.T
        a = brute_force_solve(build_feature_qubo(imp, red, 3))[0]
        b = brute_force_solve(build_feature_qubo(scale * imp + shift, scale * red + shift, 3))[0]
        assert list(a) == list(b)

    def test_spec_validation(self):
        with pytest.raises(QuboMLError):
            FeatureQuboSpec(importance="bogus")
