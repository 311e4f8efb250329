import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sparse_wsvm.prob_est import ProbabilityEstimate
from sparse_wsvm.tuning import (
    DEFAULT_LAMBDAS,
    Coupling,
    LambdaGrid,
    default_grid,
    egkl,
    gkl,
    grid_search_tune,
    pick_cell,
    split_train_tune,
    tune_on_split,
)
from sparse_wsvm.wsvm_train import Dataset, TrainingError


def _balanced(n_pos, n_neg, p=2, seed=0):
    rng = np.random.default_rng(seed)
    y = np.concatenate([np.ones(n_pos), -np.ones(n_neg)])
    return Dataset(rng.normal(size=(y.size, p)), y)


# ---------------------------------------------------------------- scores


def test_egkl_examples():
    assert egkl(np.full(4, 0.5), [1, -1, 1, -1]) == pytest.approx(math.log(2))
    assert egkl([0.8, 0.4], [1, -1]) == pytest.approx(-0.5 * (math.log(0.8) + math.log(0.6)))
    assert egkl(ProbabilityEstimate([0.95], 10), [1]) == pytest.approx(-math.log(0.95))


def test_egkl_rejects_boundary_and_mismatch():
    with pytest.raises(ValueError):
        egkl([1.0, 0.5], [1, -1])
    with pytest.raises(ValueError):
        egkl([0.0], [-1])
    with pytest.raises(ValueError):
        egkl([0.5], [1, -1])


def test_gkl_examples():
    assert gkl([0.3, 0.7], [0.3, 0.7]) == pytest.approx(0.0, abs=1e-15)
    assert gkl([0.5], [0.9]) == pytest.approx(0.9 * math.log(1.8) + 0.1 * math.log(0.2))
    with pytest.raises(ValueError):
        gkl([0.5], [1.0])


@given(st.lists(st.tuples(st.floats(0.01, 0.99), st.floats(0.01, 0.99)), min_size=1, max_size=50))
def test_gkl_nonnegative(pairs):
    q, p = np.array(pairs).T
    assert gkl(q, p) >= 0


@given(st.integers(0, 10_000), st.integers(1, 60))
def test_scores_permutation_invariant(seed, n):
    rng = np.random.default_rng(seed)
    q = rng.uniform(0.05, 0.95, n)
    p = rng.uniform(0.05, 0.95, n)
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    perm = rng.permutation(n)
    assert egkl(q[perm], y[perm]) == pytest.approx(egkl(q, y), abs=1e-12)
    assert gkl(q[perm], p[perm]) == pytest.approx(gkl(q, p), abs=1e-12)


def test_egkl_decomposes_into_gkl_plus_entropy():
    # E[egkl] = gkl(q; p) + mean Bernoulli entropy of p when labels ~ p
    rng = np.random.default_rng(1)
    n = 100_000
    p = rng.uniform(0.05, 0.95, n)
    q = np.clip(p + rng.normal(0, 0.1, n), 0.05, 0.95)
    y = np.where(rng.random(n) < p, 1.0, -1.0)
    entropy = -np.mean(p * np.log(p) + (1 - p) * np.log(1 - p))
    terms = -np.where(y > 0, np.log(q), np.log1p(-q))
    sigma = terms.std(ddof=1) / math.sqrt(n)
    assert abs(egkl(q, y) - (gkl(q, p) + entropy)) <= 3 * sigma


# ---------------------------------------------------------------- grids and splits


def test_default_grid_has_eight_values():
    g = default_grid()
    assert g.values.size == 8
    np.testing.assert_allclose(g.values, 5.5 * 10.0 ** np.arange(-4, 4))


@pytest.mark.parametrize(
    "coupling,count", [(Coupling.SINGLE, 8), (Coupling.TIED_PAIR, 8), (Coupling.FREE_PAIR, 64)]
)
def test_cell_counts(coupling, count):
    cells = default_grid(coupling).cells()
    assert len(cells) == count
    if coupling is Coupling.TIED_PAIR:
        assert all(a == b for a, b in cells)


@pytest.mark.parametrize("values", [[], [1.0, 1.0], [2.0, 1.0], [-1.0, 1.0]])
def test_grid_validation(values):
    with pytest.raises(ValueError):
        LambdaGrid(values)


def test_split_balanced():
    plan = split_train_tune(_balanced(50, 50), seed=3)
    d = _balanced(50, 50)
    train, tune = plan.apply(d)
    assert train.class_counts() == (25, 25) and tune.class_counts() == (25, 25)
    assert np.intersect1d(plan.train_indices, plan.tune_indices).size == 0
    assert np.union1d(plan.train_indices, plan.tune_indices).size == 100


def test_split_sixty_forty():
    train, tune = split_train_tune(_balanced(60, 40), 0).apply(_balanced(60, 40))
    assert train.class_counts() == (30, 20) and tune.class_counts() == (30, 20)


def test_split_deterministic_and_seed_dependent():
    d = _balanced(20, 20)
    a, b, c = split_train_tune(d, 5), split_train_tune(d, 5), split_train_tune(d, 6)
    np.testing.assert_array_equal(a.train_indices, b.train_indices)
    assert not np.array_equal(a.train_indices, c.train_indices)


def test_split_rejects_tiny_class():
    with pytest.raises(ValueError):
        split_train_tune(_balanced(5, 1), 0)
    with pytest.raises(ValueError):
        split_train_tune(_balanced(2, 1), 0)


@given(st.integers(2, 40), st.integers(2, 40), st.integers(0, 1000))
def test_split_stratified_within_one(n_pos, n_neg, seed):
    d = _balanced(n_pos, n_neg)
    train, tune = split_train_tune(d, seed).apply(d)
    for a, b in zip(train.class_counts(), tune.class_counts()):
        assert abs(a - b) <= 1


# ---------------------------------------------------------------- search


def test_pick_cell_tie_goes_to_larger_lambda():
    cells = [(0.1,), (1.0,), (10.0,)]
    assert pick_cell(cells, [0.3, 0.2, 0.2]) == 2
    assert pick_cell([(1.0, 10.0), (10.0, 1.0)], [0.5, 0.5]) == 1
    assert pick_cell(cells, [0.3, 0.1, 0.2]) == 1


def _target_fit(best):
    """Fake trainer whose estimates sharpen as the cell approaches ``best``."""

    def fit(train, cell):
        dist = sum(abs(math.log10(c) - math.log10(b)) for c, b in zip(cell, best))
        def predict(X):
            q = 0.5 + 0.4 / (1 + dist) * np.sign(X[:, 0])
            return ProbabilityEstimate(q, 10)
        return predict

    return fit


def test_grid_search_finds_best_cell():
    rng = np.random.default_rng(0)
    y = np.repeat([1.0, -1.0], 20)
    X = np.column_stack([y, rng.normal(size=40)])
    d = Dataset(X, y)
    best = (DEFAULT_LAMBDAS[3], DEFAULT_LAMBDAS[5])
    cell, table = grid_search_tune(_target_fit(best), d, d, default_grid(Coupling.FREE_PAIR))
    assert cell == pytest.approx(best)
    assert len(table.cells) == 64
    assert table.scores[table.cells.index(cell)] == np.min(table.scores)


def test_invalid_cells_are_skipped():
    d = _balanced(10, 10)

    def fit(train, cell):
        if cell[0] < 1:
            raise TrainingError("diverged")
        return lambda X: ProbabilityEstimate(np.full(len(X), 0.5), 10)

    cell, table = grid_search_tune(fit, d, d, default_grid())
    assert cell[0] == DEFAULT_LAMBDAS[-1]  # all valid cells tie
    assert np.sum(np.isinf(table.scores)) == 4
    rows = table.as_rows()
    assert rows[0]["egkl"] is None and rows[0]["error"] == "diverged"


def test_all_invalid_raises():
    d = _balanced(10, 10)

    def fit(train, cell):
        raise TrainingError("nope")

    with pytest.raises(TrainingError):
        grid_search_tune(fit, d, d, default_grid())


def test_tune_on_split_deterministic():
    rng = np.random.default_rng(2)
    y = np.repeat([1.0, -1.0], 20)
    d = Dataset(np.column_stack([y + rng.normal(size=40), rng.normal(size=40)]), y)
    best = (DEFAULT_LAMBDAS[2],)
    a = tune_on_split(_target_fit(best), d, default_grid(), seed=4)
    b = tune_on_split(_target_fit(best), d, default_grid(), seed=4)
    assert a[0] == b[0]
    np.testing.assert_array_equal(a[1].scores, b[1].scores)
