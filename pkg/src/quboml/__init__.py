"""QUBO formulations for feature selection, instance selection and medoid refinement."""

__version__ = "0.1.0"

from quboml.qubo import (
    BinaryQuadraticProblem,
    compose,
    energy,
    energy_delta_bound,
    k_hot_constraint,
)
from quboml.annealing import AnnealConfig, SampleSet, brute_force_solve, simulated_anneal

__all__ = [
    "AnnealConfig",
    "BinaryQuadraticProblem",
    "SampleSet",
    "brute_force_solve",
    "compose",
    "energy",
    "energy_delta_bound",
    "k_hot_constraint",
    "simulated_anneal",
]
