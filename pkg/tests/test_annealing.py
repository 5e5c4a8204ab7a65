import numpy as np
import pytest

from quboml.annealing import (
    AnnealConfig,
    SampleSet,
    brute_force_solve,
    default_beta_range,
    greedy_repair,
    ground_states,
    select_k_hot,
    simulated_anneal,
    swap_descent,
)
from quboml.errors import EmptyProblemError, SizeGuardError
from quboml.qubo import BinaryQuadraticProblem, all_assignments, compose, energies, energy, k_hot_constraint

from conftest import random_problem


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(reads=0), dict(sweeps=0), dict(beta_hot=2.0, beta_cold=1.0),
                                    dict(beta_hot=-1.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            AnnealConfig(**kw)

    def test_defaults(self):
        cfg = AnnealConfig()
        assert (cfg.reads, cfg.sweeps) == (100, 1000)


class TestBruteForce:
    def test_zero_problem_tie_break(self):
        assert brute_force_solve(BinaryQuadraticProblem.zeros(3)) == ((0, 0, 0), 0.0)

    def test_negative_pair(self):
        p = BinaryQuadraticProblem(2, [0.0, 0.0], {(0, 1): -5.0})
        assert brute_force_solve(p) == ((1, 1), -5.0)

    def test_enumerated_example(self):
        p = BinaryQuadraticProblem(2, [1.0, -2.0], {(0, 1): 3.0})
        # 00 -> 0, 10 -> 1, 01 -> -2, 11 -> 2
        assert brute_force_solve(p) == ((0, 1), -2.0)

    def test_tie_break_lowest_integer(self):
        # 10 and 01 both have energy -1; 10 reads as integer 1
        p = BinaryQuadraticProblem(2, [-1.0, -1.0], {(0, 1): 5.0})
        assert brute_force_solve(p)[0] == (1, 0)

    def test_size_guard(self):
        with pytest.raises(SizeGuardError):
            brute_force_solve(BinaryQuadraticProblem.zeros(26))

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_plain_enumeration(self, seed):
        p = random_problem(10, seed)
        X = all_assignments(10)
        e = [energy(p, x) for x in X]
        bits, best = brute_force_solve(p)
        assert best == pytest.approx(min(e), abs=1e-12)

    def test_ground_states_k_hot(self):
        gs = ground_states(k_hot_constraint(4, 2, 1.0))
        assert len(gs) == 6 and all(sum(g) == 2 for g in gs)


class TestSimulatedAnneal:
    def test_single_variable(self):
        ss = simulated_anneal(BinaryQuadraticProblem(1, [-1.0]), AnnealConfig(reads=10, sweeps=50, seed=1))
        assert ss.best.bits == (1,) and ss.best.energy == -1.0

    def test_k_hot_feasible(self):
        ss = simulated_anneal(k_hot_constraint(4, 2, 1.0), AnnealConfig(reads=20, sweeps=200, seed=2))
        assert ss.best.energy == 0.0 and sum(ss.best.bits) == 2

    def test_random_12_matches_brute_force(self):
        p = random_problem(12, 2024)
        ss = simulated_anneal(p, AnnealConfig(seed=7))
        assert ss.best.energy == pytest.approx(brute_force_solve(p)[1], abs=1e-9)

    def test_empty_problem(self):
        with pytest.raises(EmptyProblemError):
            simulated_anneal(BinaryQuadraticProblem.zeros(0))

    def test_determinism_bitwise(self):
        p = random_problem(9, 5)
        cfg = AnnealConfig(reads=30, sweeps=100, seed=99)
        assert simulated_anneal(p, cfg) == simulated_anneal(p, cfg)

    def test_thread_count_does_not_change_output(self):
        p = random_problem(9, 6)
        a = simulated_anneal(p, AnnealConfig(reads=16, sweeps=100, seed=3, threads=1))
        b = simulated_anneal(p, AnnealConfig(reads=16, sweeps=100, seed=3, threads=4))
        assert a == b

    def test_bookkeeping_and_sorting(self):
        p = random_problem(11, 8)
        ss = simulated_anneal(p, AnnealConfig(reads=50, sweeps=20, seed=4))
        es = [s.energy for s in ss.samples]
        assert es == sorted(es)
        assert sum(s.occurrences for s in ss.samples) == 50
        for s in ss.samples:
            assert s.energy == energy(p, s.bits)

    def test_samples_json_round_trip(self):
        ss = simulated_anneal(random_problem(5, 1), AnnealConfig(reads=10, sweeps=20))
        assert SampleSet.from_dict(ss.to_dict()) == ss

    def test_beta_range_ordered(self):
        hot, cold = default_beta_range(random_problem(6, 2))
        assert 0 < hot < cold

    def test_oracle_agreement_small_sample(self):
        hits = 0
        for seed in range(20):
            n = int(np.random.default_rng(seed).integers(2, 13))
            p = random_problem(n, seed)
            hits += simulated_anneal(p, AnnealConfig(seed=seed)).best.energy <= brute_force_solve(p)[1] + 1e-9
        assert hits >= 19


class TestKHotSelection:
    def test_greedy_repair_reaches_k(self):
        p = compose(random_problem(8, 1), k_hot_constraint(8, 3, 5.0))
        assert sum(greedy_repair(p, (1,) * 8, 3)) == 3
        assert sum(greedy_repair(p, (0,) * 8, 3)) == 3

    def test_swap_descent_keeps_popcount_and_does_not_increase_energy(self):
        p = random_problem(10, 4)
        start = (1, 1, 1, 0, 0, 0, 0, 0, 0, 0)
        out = swap_descent(p, start)
        assert sum(out) == 3 and energy(p, out) <= energy(p, start)

    def test_swap_descent_reaches_k_subset_optimum_on_small_problem(self):
        p = random_problem(8, 11)
        X = all_assignments(8)
        feas = X[X.sum(axis=1) == 3]
        best = energies(p, feas).min()
        # local optimum is not guaranteed global; check it is a swap-local minimum
        out = np.array(swap_descent(p, feas[0]))
        for i in np.flatnonzero(out == 1):
            for j in np.flatnonzero(out == 0):
                y = out.copy()
                y[i], y[j] = 0, 1
                assert energy(p, y) >= energy(p, out) - 1e-12
        assert energy(p, out) >= best - 1e-12

    def test_select_flags_repair(self):
        p = compose(random_problem(6, 2), k_hot_constraint(6, 2, 0.01))
        ss = SampleSet.from_dict({"samples": [{"bits": [1, 1, 1, 1, 1, 1], "energy": 0.0, "occurrences": 1}]})
        bits, _, repaired = select_k_hot(p, ss, 2)
        assert repaired and sum(bits) == 2
