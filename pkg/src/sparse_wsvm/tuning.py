"""Probability-estimate scoring and hyperparameter selection on a held-out split."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .prob_est import ProbabilityEstimate
from .wsvm_train import Dataset, TrainingError

DEFAULT_LAMBDAS = 5.5 * 10.0 ** np.arange(-4, 4)
TIE_TOL = 1e-12


class Coupling(enum.Enum):
    SINGLE = "Single"  # one free lambda
    TIED_PAIR = "TiedPair"  # two lambdas forced equal
    FREE_PAIR = "FreePair"  # two lambdas on the full product grid


@dataclass(frozen=True, eq=False)
class LambdaGrid:
    values: np.ndarray
    coupling: Coupling = Coupling.SINGLE

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0:
            raise ValueError("lambda grid is empty")
        if np.any(v <= 0) or np.any(np.diff(v) <= 0):
            raise ValueError("lambda values must be positive and strictly increasing")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "coupling", Coupling(self.coupling))

    def cells(self) -> list[tuple[float, ...]]:
        v = [float(a) for a in self.values]
        if self.coupling is Coupling.SINGLE:
            return [(a,) for a in v]
        if self.coupling is Coupling.TIED_PAIR:
            return [(a, a) for a in v]
        return [(a, b) for a in v for b in v]


def default_grid(coupling=Coupling.SINGLE) -> LambdaGrid:
    return LambdaGrid(DEFAULT_LAMBDAS, coupling)


@dataclass(frozen=True, eq=False)
class SplitPlan:
    train_indices: np.ndarray
    tune_indices: np.ndarray
    seed: int

    def apply(self, data: Dataset) -> tuple[Dataset, Dataset]:
        return data.rows(self.train_indices), data.rows(self.tune_indices)


def _values(estimate) -> np.ndarray:
    if isinstance(estimate, ProbabilityEstimate):
        return estimate.values
    return np.asarray(estimate, dtype=float).ravel()


def egkl(estimate, labels) -> float:
    """Held-out cross-entropy ``-(1/2n) sum (1+y) log p + (1-y) log(1-p)``."""
    p = _values(estimate)
    y = np.asarray(labels, dtype=float).ravel()
    if p.size != y.size:
        raise ValueError(f"{p.size} estimates but {y.size} labels")
    if p.size == 0:
        raise ValueError("no samples to score")
    if np.any(p <= 0) or np.any(p >= 1):
        raise ValueError("estimates must lie strictly inside (0, 1)")
    return float(-np.sum((1 + y) * np.log(p) + (1 - y) * np.log1p(-p)) / (2 * y.size))


def gkl(estimate, true_probabilities) -> float:
    """Mean Bernoulli Kullback-Leibler divergence from the true probabilities."""
    q = _values(estimate)
    p = np.asarray(true_probabilities, dtype=float).ravel()
    if p.size != q.size:
        raise ValueError(f"{q.size} estimates but {p.size} true probabilities")
    for name, v in (("estimates", q), ("true probabilities", p)):
        if np.any(v <= 0) or np.any(v >= 1):
            raise ValueError(f"{name} must lie strictly inside (0, 1)")
    terms = p * np.log(p / q) + (1 - p) * np.log((1 - p) / (1 - q))
    return float(max(np.mean(terms), 0.0))


def split_train_tune(data: Dataset, seed: int) -> SplitPlan:
    """Stratified random halving; odd class counts give the extra sample to train."""
    if data.n < 4:
        raise ValueError(f"need at least 4 samples to split, got {data.n}")
    rng = np.random.default_rng(seed)
    train, tune = [], []
    for label in (1.0, -1.0):
        idx = np.flatnonzero(data.labels == label)
        if idx.size < 2:
            raise ValueError(f"class {int(label):+d} has {idx.size} sample(s); need 2 to stratify")
        idx = rng.permutation(idx)
        half = (idx.size + 1) // 2
        train.append(idx[:half])
        tune.append(idx[half:])
    return SplitPlan(np.sort(np.concatenate(train)), np.sort(np.concatenate(tune)), seed)


@dataclass(frozen=True, eq=False)
class TuningTable:
    cells: tuple
    scores: np.ndarray
    errors: tuple  # message per invalid cell, empty string when valid

    def as_rows(self) -> list[dict]:
        return [
            {"lambdas": list(c), "egkl": (None if not math.isfinite(s) else float(s)), "error": e}
            for c, s, e in zip(self.cells, self.scores, self.errors)
        ]


def pick_cell(cells, scores) -> int:
    """Index of the minimal score; near-ties go to the cell with larger lambdas."""
    scores = np.asarray(scores, dtype=float)
    best = np.min(scores)
    tied = np.flatnonzero(scores <= best + TIE_TOL * max(1.0, abs(best)))
    return max(tied, key=lambda i: (sum(cells[i]), tuple(cells[i])))


def grid_search_tune(
    fit: Callable[[Dataset, tuple], Callable[[np.ndarray], ProbabilityEstimate]],
    train: Dataset,
    tune: Dataset,
    grid: LambdaGrid,
    mapper: Callable = map,
) -> tuple[tuple, TuningTable]:
    """Score every lambda cell by held-out EGKL.

    ``fit(train, cell)`` returns a function mapping features to estimates. A
    cell whose training fails scores ``inf`` and the search continues.
    """
    cells = grid.cells()

    def score(cell):
        try:
            predict = fit(train, cell)
            return egkl(predict(tune.features), tune.labels), ""
        except TrainingError as exc:
            return math.inf, str(exc)

    out = list(mapper(score, cells))
    scores = np.array([s for s, _ in out])
    table = TuningTable(tuple(cells), scores, tuple(e for _, e in out))
    if not np.any(np.isfinite(scores)):
        raise TrainingError(f"every grid cell failed; first error: {out[0][1]}")
    return cells[pick_cell(cells, scores)], table


def tune_on_split(fit, data: Dataset, grid: LambdaGrid, seed: int, mapper: Callable = map):
    """Split ``data`` in half with ``seed`` and run :func:`grid_search_tune`."""
    plan = split_train_tune(data, seed)
    train, tune = plan.apply(data)
    return grid_search_tune(fit, train, tune, grid, mapper)

