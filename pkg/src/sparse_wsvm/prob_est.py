"""Class-probability estimates from a family of weighted classifiers.

A weighted SVM trained with weight ``pi`` estimates ``sign(p(x) - pi)``.
Training one classifier per grid weight and counting how many of them vote
positive at ``x`` brackets ``p(x)`` between two consecutive grid points; the
estimate is the midpoint of that bracket.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .wsvm_train import Dataset, LinearModel, TrainingError


@dataclass(frozen=True, eq=False)
class WeightGrid:
    """Interior weights ``(1/m, ..., (m-1)/m)``."""

    m: int
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if self.m < 2:
            raise ValueError("m must be at least 2")
        if w.shape != (self.m - 1,):
            raise ValueError(f"expected {self.m - 1} weights, got {w.size}")
        if np.any(np.diff(w) <= 0) or np.any(w <= 0) or np.any(w >= 1):
            raise ValueError("weights must be strictly increasing inside (0, 1)")
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.m - 1


def make_weight_grid(m: int) -> WeightGrid:
    m = int(m)
    if m < 2:
        raise ValueError(f"m must be at least 2, got {m}")
    return WeightGrid(m, np.arange(1, m) / m)


@dataclass(frozen=True, eq=False)
class ClassifierSequence:
    grid: WeightGrid
    models: tuple

    def __post_init__(self):
        models = tuple(self.models)
        if len(models) != len(self.grid):
            raise ValueError(f"{len(models)} models for a grid of {len(self.grid)} weights")
        widths = {mod.coefficients.size for mod in models}
        if len(widths) > 1:
            raise ValueError("models disagree on the number of features")
        object.__setattr__(self, "models", models)

    @property
    def p(self) -> int:
        return self.models[0].coefficients.size if self.models else 0

    def decisions(self, features) -> np.ndarray:
        """Decision values, shape ``(k, m-1)``."""
        X = np.atleast_2d(np.asarray(features, dtype=float))
        if X.shape[1] != self.p:
            raise ValueError(f"features have {X.shape[1]} columns, models expect {self.p}")
        return np.column_stack([mod.decision(X) for mod in self.models])


@dataclass(frozen=True, eq=False)
class ProbabilityEstimate:
    """Estimates confined to ``[1/(2m), 1 - 1/(2m)]``."""

    values: np.ndarray
    m: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        lo = 1.0 / (2 * self.m)
        if np.any(v < lo - 1e-15) or np.any(v > 1 - lo + 1e-15):
            raise ValueError(f"estimates must lie in [{lo}, {1 - lo}]")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


def fit_classifier_sequence(
    trainer: Callable[[Dataset, float], LinearModel],
    data: Dataset,
    grid: WeightGrid,
    mapper: Callable = map,
) -> ClassifierSequence:
    """Train ``trainer(data, pi)`` at every grid weight.

    ``mapper`` may be a parallel map; results are collected in grid order.
    """

    def run(pi):
        try:
            return trainer(data, float(pi))
        except TrainingError as exc:
            raise TrainingError(f"training failed at pi={pi}: {exc}") from exc

    models = list(mapper(run, grid.weights))
    return ClassifierSequence(grid, tuple(models))


def probability_from_counts(counts, m: int) -> np.ndarray:
    """Midpoint of ``[pi_k, pi_{k+1}]`` with ``pi_0 = 0`` and ``pi_m = 1``."""
    k = np.asarray(counts)
    edges = np.arange(m + 1) / m
    return 0.5 * (edges[k] + edges[k + 1])


def bracket_from_signs(signs: np.ndarray, m: int) -> np.ndarray:
    """Estimates from a ``(k, m-1)`` boolean array of positive votes."""
    signs = np.atleast_2d(np.asarray(signs, dtype=bool))
    return probability_from_counts(signs.sum(axis=1), m)


def bracket_probability(sequence: ClassifierSequence, features) -> ProbabilityEstimate:
    # a decision value of exactly zero votes positive
    votes = sequence.decisions(features) >= 0
    return ProbabilityEstimate(bracket_from_signs(votes, sequence.grid.m), sequence.grid.m)


def classify(estimate: ProbabilityEstimate | Sequence[float]) -> np.ndarray:
    values = estimate.values if isinstance(estimate, ProbabilityEstimate) else np.asarray(estimate)
    return np.where(np.asarray(values, dtype=float) >= 0.5, 1, -1)


def crossing_estimate(signs, grid: WeightGrid) -> float:
    """Midpoint of the bracket around the single sign change of a monotone sequence.

    Walks the weights in order and stops at the first negative vote, so it
    only agrees with the counting rule when the signs never turn positive
    again.
    """
    signs = np.asarray(signs, dtype=bool)
    edges = np.concatenate([[0.0], grid.weights, [1.0]])
    k = 0
    while k < signs.size and signs[k]:
        k += 1
    return 0.5 * (edges[k] + edges[k + 1])


def non_monotone_fraction(sequence: ClassifierSequence, features) -> float:
    """Share of samples whose votes switch back to positive at a larger weight."""
    votes = sequence.decisions(features) >= 0
    if votes.shape[1] < 2:
        return 0.0
    rises = np.any(~votes[:, :-1] & votes[:, 1:], axis=1)
    return float(np.mean(rises))
