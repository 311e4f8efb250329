"""End-to-end sparse probability estimation schemes.

Every scheme trains one weighted classifier per grid weight, turns the
family into bracketed probabilities and records which features each weight
selected.  The schemes differ in how each weight's classifier is built:

* ``LTWSVM``   L2 classifier on all features.
* ``LOTWSVM``  L1 selection, then an L2 classifier on the selected columns.
* ``ENTPWSVM`` / ``ENTWSVM``  elastic-net selection (primal / dual QP), then L2.
* ``ENPWSVM`` / ``ENWSVM``    the elastic-net classifiers themselves.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .datasets import Standardizer
from .prob_est import (
    ClassifierSequence,
    ProbabilityEstimate,
    WeightGrid,
    bracket_probability,
    classify,
    make_weight_grid,
)
from .tuning import Coupling, LambdaGrid, TuningTable, default_grid, grid_search_tune, split_train_tune
from .wsvm_train import (
    DEFAULT_P_BETA,
    Dataset,
    Form,
    LinearModel,
    SelectionIndicator,
    TrainingError,
    fit_l1_wsvm,
    train_en_wsvm,
    train_l2_wsvm,
)


class PipelineMethod(enum.Enum):
    LTWSVM = "LTWSVM"
    LOTWSVM = "LOTWSVM"
    ENPWSVM = "ENPWSVM"
    ENWSVM = "ENWSVM"
    ENTPWSVM = "ENTPWSVM"
    ENTWSVM = "ENTWSVM"

    @property
    def coupling(self) -> Coupling:
        return COUPLING[self]

    @property
    def two_stage(self) -> bool:
        return self in (PipelineMethod.LOTWSVM, PipelineMethod.ENTPWSVM, PipelineMethod.ENTWSVM)

    @property
    def en_form(self) -> Form | None:
        if self in (PipelineMethod.ENPWSVM, PipelineMethod.ENTPWSVM):
            return Form.PRIMAL
        if self in (PipelineMethod.ENWSVM, PipelineMethod.ENTWSVM):
            return Form.DUAL
        return None


COUPLING = {
    PipelineMethod.LTWSVM: Coupling.SINGLE,
    PipelineMethod.LOTWSVM: Coupling.TIED_PAIR,
    PipelineMethod.ENPWSVM: Coupling.FREE_PAIR,
    PipelineMethod.ENWSVM: Coupling.FREE_PAIR,
    PipelineMethod.ENTPWSVM: Coupling.FREE_PAIR,
    PipelineMethod.ENTWSVM: Coupling.FREE_PAIR,
}


@dataclass(frozen=True)
class PipelineSpec:
    """Scheme and its settings; ``m`` and ``s`` default from the training size."""

    method: PipelineMethod
    m: int | None = None
    p_beta: float = DEFAULT_P_BETA
    s: float | None = None
    lambda_grid: LambdaGrid | None = None
    seed: int = 0
    standardize: bool = True

    def __post_init__(self):
        object.__setattr__(self, "method", PipelineMethod(self.method))
        if self.m is not None and self.m < 2:
            raise ValueError("m must be at least 2")
        if self.p_beta < 0:
            raise ValueError("p_beta must be nonnegative")
        if self.m is not None and self.s is not None and not 0 <= self.s <= self.m - 1:
            raise ValueError("s must lie in [0, m-1]")
        if self.lambda_grid is not None and self.lambda_grid.coupling is not self.method.coupling:
            raise ValueError(
                f"{self.method.value} needs {self.method.coupling.value} coupling, "
                f"got {self.lambda_grid.coupling.value}"
            )

    def resolve_m(self, n_train: int) -> int:
        m = self.m if self.m is not None else int(np.floor(np.sqrt(n_train)))
        if m < 2:
            raise ValueError(f"training set of {n_train} is too small for a weight grid")
        return m

    def resolve_s(self, m: int) -> float:
        s = (m - 1) / 2 if self.s is None else float(self.s)
        if not 0 <= s <= m - 1:
            raise ValueError("s must lie in [0, m-1]")
        return s

    def grid(self) -> LambdaGrid:
        return self.lambda_grid or default_grid(self.method.coupling)


def fit_weight(
    method: PipelineMethod,
    data: Dataset,
    pi: float,
    cell: tuple,
    p_beta: float = DEFAULT_P_BETA,
    retain_all: bool = False,
) -> tuple[LinearModel, SelectionIndicator]:
    """One weight's classifier (coefficients over all columns of ``data``) and selection.

    ``retain_all`` skips the selection stage of the two-stage schemes.
    """
    method = PipelineMethod(method)
    p = data.p
    if method is PipelineMethod.LTWSVM:
        model = train_l2_wsvm(data, pi, cell[0])
        return model, SelectionIndicator(np.ones(p, dtype=bool), p_beta)
    if method.two_stage:
        lam_sel, lam_fit = cell
        if retain_all:
            selection = SelectionIndicator(np.ones(p, dtype=bool), p_beta)
        elif method is PipelineMethod.LOTWSVM:
            selection = fit_l1_wsvm(data, pi, lam_sel, p_beta).selection
        else:
            _, selection = train_en_wsvm(data, pi, lam_sel, lam_fit, method.en_form, p_beta)
        cols = selection.selected
        reduced = train_l2_wsvm(data.columns(cols), pi, lam_fit)
        beta = np.zeros(p)
        beta[cols] = reduced.coefficients
        model = LinearModel(reduced.intercept, beta, pi, cell, reduced.method)
        return model, selection
    return train_en_wsvm(data, pi, cell[0], cell[1], method.en_form, p_beta)


def fit_sequence(
    method: PipelineMethod,
    data: Dataset,
    grid: WeightGrid,
    cell: tuple,
    p_beta: float = DEFAULT_P_BETA,
    retain_all: bool = False,
    mapper: Callable = map,
) -> tuple[ClassifierSequence, list[SelectionIndicator]]:
    def run(pi):
        try:
            return fit_weight(method, data, float(pi), cell, p_beta, retain_all)
        except TrainingError as exc:
            raise TrainingError(f"pi={pi}, lambdas={cell}: {exc}") from exc

    out = list(mapper(run, grid.weights))
    return ClassifierSequence(grid, tuple(m for m, _ in out)), [s for _, s in out]


@dataclass(frozen=True, eq=False)
class ProbabilityModel:
    """Classifier family in the standardised feature space plus its scaler."""

    sequence: ClassifierSequence
    scaler: Standardizer

    def estimate(self, features) -> ProbabilityEstimate:
        return bracket_probability(self.sequence, self.scaler.transform_features(features))

    def predict(self, features) -> np.ndarray:
        return classify(self.estimate(features))


@dataclass(frozen=True, eq=False)
class FitResult:
    probability_model: ProbabilityModel
    per_weight_selection: list
    frequency: np.ndarray
    final_variables: np.ndarray
    wall_time: float
    lambdas: tuple = ()
    tuning_table: TuningTable | None = field(default=None, repr=False)
    m: int = 0
    s: float = 0.0


def selection_frequency(per_weight, p: int | None = None) -> np.ndarray:
    """Number of weights at which each feature was selected."""
    masks = [np.asarray(getattr(s, "mask", s), dtype=bool) for s in per_weight]
    if not masks:
        return np.zeros(0 if p is None else p, dtype=int)
    return np.sum(masks, axis=0).astype(int)


def final_variable_set(frequency, s: float) -> np.ndarray:
    """Indices with frequency strictly above ``s``."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    return np.flatnonzero(np.asarray(frequency) > s)


def _prepare(spec: PipelineSpec, train: Dataset, tune: Dataset | None):
    if tune is not None and tune.p != train.p:
        raise ValueError(f"train has {train.p} features but tune has {tune.p}")
    scaler = Standardizer.fit(train, center=spec.standardize)
    tr = scaler.transform(train)
    tu = scaler.transform(tune) if tune is not None else None
    return scaler, tr, tu


def fit_at(
    spec: PipelineSpec,
    train: Dataset,
    cell: tuple,
    retain_all: bool = False,
    mapper: Callable = map,
) -> FitResult:
    """Fit the scheme at fixed lambdas without tuning."""
    start = time.perf_counter()
    scaler, tr, _ = _prepare(spec, train, None)
    return _final_fit(spec, scaler, tr, cell, None, start, retain_all, mapper)


def _final_fit(spec, scaler, tr, cell, table, start, retain_all=False, mapper=map):
    m = spec.resolve_m(tr.n)
    s = spec.resolve_s(m)
    grid = make_weight_grid(m)
    sequence, selections = fit_sequence(
        spec.method, tr, grid, tuple(cell), spec.p_beta, retain_all, mapper
    )
    # report selections over the original columns; dropped ones are never selected
    fill = spec.method is PipelineMethod.LTWSVM
    full = [
        SelectionIndicator(scaler.expand(sel.mask, fill=fill), sel.threshold_used)
        for sel in selections
    ]
    freq = selection_frequency(full, scaler.p)
    return FitResult(
        ProbabilityModel(sequence, scaler),
        full,
        freq,
        final_variable_set(freq, s),
        time.perf_counter() - start,
        tuple(cell),
        table,
        m,
        s,
    )


def run_pipeline(
    spec: PipelineSpec,
    train: Dataset,
    tune: Dataset,
    mapper: Callable = map,
    audit: Callable | None = None,
) -> FitResult:
    """Tune lambdas by held-out EGKL on ``tune``, then fit on ``train``.

    ``audit(train_std, model)`` is called for every classifier of every fitted
    sequence, grid cells included, with the standardised training data.
    """
    start = time.perf_counter()
    scaler, tr, tu = _prepare(spec, train, tune)
    m = spec.resolve_m(tr.n)
    grid = make_weight_grid(m)

    def fit_cell(data, cell):
        sequence, _ = fit_sequence(spec.method, data, grid, cell, spec.p_beta)
        if audit is not None:
            for model in sequence.models:
                audit(data, model)
        return lambda X: bracket_probability(sequence, X)

    cell, table = grid_search_tune(fit_cell, tr, tu, spec.grid(), mapper)
    fit = _final_fit(spec, scaler, tr, cell, table, start)
    if audit is not None:
        for model in fit.probability_model.sequence.models:
            audit(tr, model)
    return fit


def run_pipeline_split(spec: PipelineSpec, data: Dataset, mapper: Callable = map) -> FitResult:
    """Halve ``data`` (stratified, ``spec.seed``) into train and tune, then run."""
    train, tune = split_train_tune(data, spec.seed).apply(data)
    return run_pipeline(spec, train, tune, mapper)
