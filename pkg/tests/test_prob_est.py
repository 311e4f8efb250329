from itertools import product

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sparse_wsvm.prob_est import (
    ClassifierSequence,
    ProbabilityEstimate,
    WeightGrid,
    bracket_from_signs,
    bracket_probability,
    classify,
    crossing_estimate,
    fit_classifier_sequence,
    make_weight_grid,
    non_monotone_fraction,
)
from sparse_wsvm.wsvm_train import Dataset, LinearModel, Method, TrainingError, train_l2_wsvm


def _constant_sequence(signs, m):
    """Intercept-only models voting ``signs`` at every input."""
    grid = make_weight_grid(m)
    models = tuple(
        LinearModel(1.0 if s else -1.0, np.zeros(1), pi, (1.0,), Method.L2)
        for s, pi in zip(signs, grid.weights)
    )
    return ClassifierSequence(grid, models)


def monotone_sequences(m):
    """All non-increasing boolean sequences of length m-1 (k leading positives)."""
    for k in range(m):
        yield np.array([True] * k + [False] * (m - 1 - k))


def test_weight_grid_examples():
    np.testing.assert_allclose(make_weight_grid(10).weights, np.arange(1, 10) / 10)
    np.testing.assert_allclose(make_weight_grid(2).weights, [0.5])
    np.testing.assert_allclose(make_weight_grid(4).weights, [0.25, 0.5, 0.75])
    with pytest.raises(ValueError):
        make_weight_grid(1)
    with pytest.raises(ValueError):
        WeightGrid(3, [0.6, 0.4])


def test_bracket_examples():
    assert bracket_from_signs([[True] * 3 + [False] * 6], 10)[0] == pytest.approx(0.35)
    assert bracket_from_signs([[True] * 9], 10)[0] == pytest.approx(0.95)
    assert bracket_from_signs([[False] * 9], 10)[0] == pytest.approx(0.05)


def test_zero_decision_counts_positive():
    grid = make_weight_grid(2)
    seq = ClassifierSequence(grid, (LinearModel(0.0, np.zeros(1), 0.5, (1.0,), Method.L2),))
    est = bracket_probability(seq, [[3.0]])
    assert est.values[0] == pytest.approx(0.75)
    assert classify(est)[0] == 1


def test_classify_examples():
    assert classify([0.95, 0.05]).tolist() == [1, -1]
    assert classify([0.5]).tolist() == [1]
    assert classify(ProbabilityEstimate([0.35], 10)).tolist() == [-1]


def test_estimate_range_enforced():
    with pytest.raises(ValueError):
        ProbabilityEstimate([0.01], 10)
    with pytest.raises(ValueError):
        ProbabilityEstimate([0.99], 10)


def test_sequence_shape_checks():
    grid = make_weight_grid(3)
    one = LinearModel(0.0, np.zeros(2), 0.5, (1.0,), Method.L2)
    with pytest.raises(ValueError):
        ClassifierSequence(grid, (one,))
    other = LinearModel(0.0, np.zeros(3), 0.5, (1.0,), Method.L2)
    with pytest.raises(ValueError):
        ClassifierSequence(grid, (one, other))
    with pytest.raises(ValueError):
        ClassifierSequence(grid, (one, one)).decisions(np.ones((2, 3)))


@pytest.mark.parametrize("m", range(2, 9))
def test_monotone_sequences_match_crossing_estimator(m):
    grid = make_weight_grid(m)
    for signs in monotone_sequences(m):
        seq = _constant_sequence(signs, m)
        got = bracket_probability(seq, np.zeros((1, 1))).values[0]
        assert got == pytest.approx(crossing_estimate(signs, grid), abs=1e-15)


@pytest.mark.parametrize("m", range(2, 9))
def test_every_sign_pattern_in_range(m):
    lo, hi = 1 / (2 * m), 1 - 1 / (2 * m)
    signs = np.array(list(product((False, True), repeat=m - 1)))
    est = bracket_from_signs(signs, m)
    assert np.all(est >= lo - 1e-15) and np.all(est <= hi + 1e-15)
    assert np.all(np.isfinite(np.log(est))) and np.all(np.isfinite(np.log1p(-est)))


@given(st.integers(2, 16), st.data())
def test_permutation_invariance(m, data):
    signs = np.array(data.draw(st.lists(st.booleans(), min_size=m - 1, max_size=m - 1)))
    perm = np.array(data.draw(st.permutations(range(m - 1))))
    assert bracket_from_signs([signs], m)[0] == bracket_from_signs([signs[perm]], m)[0]


@pytest.mark.parametrize("m", [2, 4, 6, 8, 10])
def test_classification_agrees_with_half_weight_classifier(m):
    grid = make_weight_grid(m)
    half = int(np.flatnonzero(np.isclose(grid.weights, 0.5))[0])
    for signs in monotone_sequences(m):
        est = bracket_from_signs([signs], m)
        assert classify(est)[0] == (1 if signs[half] else -1)


def test_fit_sequence_cardinality_and_determinism():
    rng = np.random.default_rng(0)
    y = np.repeat([1.0, -1.0], 10)
    d = Dataset(rng.normal(size=(20, 3)) + y[:, None], y)
    grid = make_weight_grid(10)
    a = fit_classifier_sequence(lambda data, pi: train_l2_wsvm(data, pi, 0.1), d, grid)
    b = fit_classifier_sequence(lambda data, pi: train_l2_wsvm(data, pi, 0.1), d, grid)
    assert len(a.models) == 9
    for ma, mb in zip(a.models, b.models):
        np.testing.assert_allclose(ma.coefficients, mb.coefficients, rtol=0, atol=1e-12)
        assert ma.intercept == mb.intercept


def test_fit_sequence_failure_names_weight():
    d = Dataset([[0.0], [1.0]], [-1, 1])

    def trainer(data, pi):
        if pi > 0.6:
            raise TrainingError("boom")
        return train_l2_wsvm(data, pi, 1.0)

    with pytest.raises(TrainingError, match="pi=0.7"):
        fit_classifier_sequence(trainer, d, make_weight_grid(10))


def test_l2_decision_falls_across_the_grid():
    # finite samples need not give a monotone decision at every step, so the
    # check is statistical: the smallest weight scores at least the largest
    for seed in range(5):
        rng = np.random.default_rng(seed)
        y = np.repeat([1.0, -1.0], 20)
        X = rng.normal(size=(40, 2)) + 2.5 * y[:, None]
        seq = fit_classifier_sequence(
            lambda data, pi: train_l2_wsvm(data, pi, 0.05), Dataset(X, y), make_weight_grid(10)
        )
        points = rng.normal(size=(200, 2))
        dec = seq.decisions(points)
        assert np.mean(dec[:, 0] >= dec[:, -1] - 1e-9) >= 0.95
        assert 0.0 <= non_monotone_fraction(seq, points) <= 1.0
