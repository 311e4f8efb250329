"""Weighted SVM trainers: L2, L1 (LP dual with KKT selection) and elastic net.

All three problems minimise the weighted hinge risk

    (1/n) [ (1-pi) sum_{y=+1} (1 - y f)_+  +  pi sum_{y=-1} (1 - y f)_+ ]

for a linear decision function ``f(x) = b0 + beta'x`` plus a penalty on
``beta``.  Each trainer assembles one ``ConicProgram`` and makes one call to
:func:`sparse_wsvm.qp_core.solve`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .qp_core import ConicProgram, SolverResult, SolverSettings, solve

DEFAULT_P_BETA = 1e-4
KKT_SLACK_REL = 1e-6
MAX_PROGRAM_VARIABLES = 50_000
SV_EPS = 1e-10
BOUND_SNAP = 1e-5


class TrainingError(RuntimeError):
    """A trainer could not produce a model (solver failure or bad input)."""


class Method(enum.Enum):
    L2 = "L2"
    L1_SELECT = "L1Select"
    EN_PRIMAL = "ENPrimal"
    EN_DUAL = "ENDual"


class Form(enum.Enum):
    PRIMAL = "primal"
    DUAL = "dual"


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix (rows are samples) and labels in {-1, +1}."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float).ravel()
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise ValueError("features must be a 2-d array")
        if X.shape[0] != y.size:
            raise ValueError(f"{X.shape[0]} feature rows but {y.size} labels")
        if not np.all((y == 1) | (y == -1)):
            raise ValueError("labels must be -1 or +1")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain NaN or infinite values")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> tuple[int, int]:
        pos = int(np.sum(self.labels > 0))
        return pos, self.n - pos

    def require_both_classes(self):
        pos, neg = self.class_counts()
        if pos == 0 or neg == 0:
            raise TrainingError("training data must contain both classes")

    def rows(self, index) -> "Dataset":
        return Dataset(self.features[index], self.labels[index])

    def columns(self, index) -> "Dataset":
        return Dataset(self.features[:, index], self.labels)


@dataclass(frozen=True, eq=False)
class LinearModel:
    intercept: float
    coefficients: np.ndarray
    weight: float
    lambdas: tuple
    method: Method

    def __post_init__(self):
        beta = np.asarray(self.coefficients, dtype=float).ravel()
        if not (np.isfinite(self.intercept) and np.all(np.isfinite(beta))):
            raise TrainingError("model has non-finite entries")
        object.__setattr__(self, "coefficients", beta)
        object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def p(self) -> int:
        return self.coefficients.size

    def decision(self, features) -> np.ndarray:
        return predict_decision(self, features)


@dataclass(frozen=True, eq=False)
class SelectionIndicator:
    mask: np.ndarray
    threshold_used: float

    def __post_init__(self):
        object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool).ravel())

    @property
    def selected(self) -> np.ndarray:
        return np.flatnonzero(self.mask)


@dataclass(frozen=True, eq=False)
class L1Fit:
    """Full output of the L1 LP: primal model, selection and the dual point."""

    model: LinearModel
    selection: SelectionIndicator
    alpha: np.ndarray
    s: np.ndarray
    t: np.ndarray
    result: SolverResult = field(repr=False)


def build_weights(labels, pi: float) -> np.ndarray:
    """Per-sample hinge weights: ``pi`` for class -1 and ``1 - pi`` for class +1."""
    if not 0.0 <= pi <= 1.0:
        raise ValueError(f"pi must lie in [0, 1], got {pi}")
    y = np.asarray(labels, dtype=float)
    if not np.all((y == 1) | (y == -1)):
        raise ValueError("labels must be -1 or +1")
    return np.where(y < 0, pi, 1.0 - pi)


def weighted_hinge_risk(data: Dataset, pi: float, intercept: float, beta) -> float:
    w = build_weights(data.labels, pi)
    margin = data.labels * (intercept + data.features @ np.asarray(beta, dtype=float))
    return float(w @ np.maximum(0.0, 1.0 - margin) / data.n)


def l2_objective(data, pi, lam, intercept, beta) -> float:
    beta = np.asarray(beta, dtype=float)
    return weighted_hinge_risk(data, pi, intercept, beta) + lam * float(beta @ beta)


def l1_objective(data, pi, lambda1, intercept, beta) -> float:
    beta = np.asarray(beta, dtype=float)
    return weighted_hinge_risk(data, pi, intercept, beta) + lambda1 * float(np.abs(beta).sum())


def en_objective(data, pi, lambda1, lambda2, intercept, beta) -> float:
    beta = np.asarray(beta, dtype=float)
    return (
        weighted_hinge_risk(data, pi, intercept, beta)
        + lambda1 * float(np.abs(beta).sum())
        + 0.5 * lambda2 * float(beta @ beta)
    )


def predict_decision(model: LinearModel, features) -> np.ndarray:
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != model.p:
        raise ValueError(f"features have {X.shape[1]} columns, model expects {model.p}")
    return model.intercept + X @ model.coefficients


def extract_selection(beta, p_beta: float) -> SelectionIndicator:
    if p_beta < 0:
        raise ValueError("p_beta must be nonnegative")
    beta = np.asarray(beta, dtype=float)
    return SelectionIndicator(np.abs(beta) > p_beta, p_beta)


def intercept_interval(data: Dataset, weights, beta) -> tuple[float, float]:
    """Endpoints of the set of minimisers over b0 of
    ``sum_i W_i (1 - y_i (b0 + x_i'beta))_+``.

    The objective is convex and piecewise linear with breakpoints at
    ``y_i - x_i'beta``, so the minimisers form a closed interval whose ends
    are breakpoints.
    """
    data.require_both_classes()
    w = np.asarray(weights, dtype=float)
    y = data.labels
    if w[y > 0].sum() <= 0 or w[y < 0].sum() <= 0:
        raise TrainingError("intercept is unbounded: one class carries zero weight")
    m = data.features @ np.asarray(beta, dtype=float)
    knots = np.unique(y - m)
    risk = np.maximum(0.0, 1.0 - y[None, :] * (knots[:, None] + m[None, :])) @ w
    best = risk.min()
    at_min = knots[risk <= best + 1e-12 * max(1.0, abs(best))]
    return float(at_min.min()), float(at_min.max())


def best_intercept(data: Dataset, weights, beta) -> float:
    """Exact minimiser over b0 of the weighted hinge risk; the midpoint when
    the minimum is attained on an interval."""
    lo, hi = intercept_interval(data, weights, beta)
    return 0.5 * (lo + hi)


def canonical_intercept(data: Dataset, weights, beta, b0, tol: float = 1e-4) -> float:
    """``b0`` unless it sits in a flat optimal interval, then its midpoint.

    With ``beta`` fixed the intercept only enters the hinge risk; when that
    risk is flat at its minimum every point of the interval is optimal and
    the midpoint is a reproducible choice independent of the solve route.
    """
    lo, hi = intercept_interval(data, weights, beta)
    if hi - lo > tol and lo - tol <= b0 <= hi + tol:
        return 0.5 * (lo + hi)
    return float(b0)


def zero_coefficient_certificate(data: Dataset, pi: float, lambda1: float):
    """Intercept ``b0`` when ``beta = 0`` provably minimises an L1 or elastic-net
    objective with L1 weight ``lambda1``, else None.

    At ``beta = 0`` the hinge multipliers are pinned to ``W`` or 0 except on
    the margin, where they are spread to satisfy ``y'alpha = 0``.  If the
    resulting ``|X'Y alpha|`` stays within ``n*lambda1`` the KKT conditions
    hold with zero coefficients.
    """
    n = data.n
    y = data.labels
    W = build_weights(y, pi)
    b0 = best_intercept(data, W, np.zeros(data.p))
    margin = y * b0
    on = np.abs(margin - 1.0) <= 1e-12
    alpha = np.where(margin < 1.0, W, 0.0)
    alpha[on] = 0.0
    gap = alpha[y < 0].sum() - alpha[y > 0].sum()
    side = (y > 0) if gap >= 0 else (y < 0)
    free = on & side
    room = W[free].sum()
    if abs(gap) > room * (1 + 1e-12) + 1e-12:
        return None
    if room > 0:
        alpha[free] = W[free] * (abs(gap) / room)
    g = (y[:, None] * data.features).T @ alpha
    if np.max(np.abs(g), initial=0.0) <= n * lambda1:
        return b0
    return None


def _check_solved(result: SolverResult, context: str):
    if not result.solved:
        raise TrainingError(
            f"solver returned {result.status.value} after {result.iterations} "
            f"iterations ({context})"
        )


def train_l2_wsvm(
    data: Dataset, pi: float, lam: float, settings: SolverSettings | None = None
) -> LinearModel:
    """Linear L2-penalised weighted SVM, solved through its box-constrained dual.

    The dual variable of the ``y'alpha = 0`` row is the intercept.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    data.require_both_classes()
    n = data.n
    y = data.labels
    W = build_weights(y, pi)
    if data.p == 0:
        b0 = best_intercept(data, W, np.zeros(0))
        return LinearModel(b0, np.zeros(0), pi, (lam,), Method.L2)
    YX = y[:, None] * data.features
    Q = (YX @ YX.T) / (2.0 * n * lam)
    Q = 0.5 * (Q + Q.T)
    C = np.vstack([y[None, :], np.eye(n)])
    lower = np.concatenate([[0.0], np.zeros(n)])
    upper = np.concatenate([[0.0], W])
    result = solve(ConicProgram(Q, -np.ones(n), C, lower, upper), settings)
    _check_solved(result, f"L2 wSVM pi={pi}, lambda={lam}")
    alpha = result.solution
    beta = YX.T @ alpha / (2.0 * n * lam)
    return LinearModel(result.duals[0], beta, pi, (lam,), Method.L2)


def fit_l1_wsvm(
    data: Dataset,
    pi: float,
    lambda1: float,
    p_beta: float = DEFAULT_P_BETA,
    settings: SolverSettings | None = None,
) -> L1Fit:
    """L1-penalised weighted SVM through its dual LP.

    Selection follows complementary slackness: variable ``j`` is removed when
    both dual slacks ``s_j = n*lambda1 - (X'Y alpha)_j`` and
    ``t_j = n*lambda1 + (X'Y alpha)_j`` are strictly positive.  The primal
    coefficients are the LP multipliers of the ``X'Y alpha`` rows and the
    intercept is the multiplier of ``y'alpha = 0``.
    """
    if lambda1 <= 0:
        raise ValueError("lambda1 must be positive")
    data.require_both_classes()
    n, p = data.n, data.p
    y = data.labels
    W = build_weights(y, pi)
    XtY = (y[:, None] * data.features).T
    bound = n * lambda1
    C = np.vstack([y[None, :], np.eye(n), XtY])
    lower = np.concatenate([[0.0], np.zeros(n), np.full(p, -bound)])
    upper = np.concatenate([[0.0], W, np.full(p, bound)])
    result = solve(ConicProgram(np.zeros((n, n)), -np.ones(n), C, lower, upper), settings)
    if not result.solved:
        # alpha = 0 is always feasible, so anything else is a solver defect
        raise TrainingError(
            f"L1 LP not solved ({result.status.value}) pi={pi}, lambda1={lambda1}"
        )
    alpha = result.solution
    g = XtY @ alpha
    s = bound - g
    t = bound + g
    eps = KKT_SLACK_REL * bound
    keep = ~((s > eps) & (t > eps))
    beta = result.duals[1 + n :].copy()
    beta[~keep] = 0.0
    beta[np.abs(beta) <= p_beta] = 0.0
    model = LinearModel(result.duals[0], beta, pi, (lambda1,), Method.L1_SELECT)
    return L1Fit(model, SelectionIndicator(keep, p_beta), alpha, s, t, result)


def train_l1_select(
    data: Dataset,
    pi: float,
    lambda1: float,
    p_beta: float = DEFAULT_P_BETA,
    settings: SolverSettings | None = None,
) -> SelectionIndicator:
    return fit_l1_wsvm(data, pi, lambda1, p_beta, settings).selection


def _check_en_args(data, lambda1, lambda2, n_vars, max_variables):
    if lambda1 <= 0 or lambda2 <= 0:
        raise ValueError("lambda1 and lambda2 must be positive")
    if n_vars > max_variables:
        raise ValueError(f"program would have {n_vars} variables (cap {max_variables})")


def assemble_en_primal(
    data: Dataset, pi, lambda1, lambda2, max_variables: int = MAX_PROGRAM_VARIABLES
) -> ConicProgram:
    """Primal elastic-net QP over ``w = [z, u, v, b0]`` (hinge slacks, beta = u - v)."""
    n, p = data.n, data.p
    N = n + 2 * p + 1
    _check_en_args(data, lambda1, lambda2, N, max_variables)
    y = data.labels
    YX = y[:, None] * data.features
    P = np.zeros((N, N))
    idx = np.arange(n, n + 2 * p)
    P[idx, idx] = n * lambda2
    d = np.concatenate([build_weights(y, pi), np.full(2 * p, n * lambda1), [0.0]])
    R = np.zeros((2 * n + 2 * p, N))
    R[: n + 2 * p, : n + 2 * p] = np.eye(n + 2 * p)
    hinge = R[n + 2 * p :]
    hinge[:, :n] = np.eye(n)
    hinge[:, n : n + p] = YX
    hinge[:, n + p : n + 2 * p] = -YX
    hinge[:, -1] = y
    b0 = np.concatenate([np.zeros(n + 2 * p), np.ones(n)])
    return ConicProgram(P, d, R, b0, np.full(b0.size, np.inf))


def en_dual_maps(data: Dataset, lambda1, lambda2) -> tuple[np.ndarray, np.ndarray]:
    """The ``p x (n + 3p)`` maps A, B with ``u = A w`` and ``v = B w``."""
    n, p = data.n, data.p
    XtY = (data.labels[:, None] * data.features).T
    scale = 1.0 / (n * lambda2)
    A = np.zeros((p, n + 3 * p))
    B = np.zeros((p, n + 3 * p))
    eye = np.eye(p)
    A[:, :n] = scale * XtY
    A[:, n : n + p] = scale * eye
    A[:, n + 2 * p :] = -(lambda1 / lambda2) * eye
    B[:, :n] = -scale * XtY
    B[:, n + p : n + 2 * p] = scale * eye
    B[:, n + 2 * p :] = -(lambda1 / lambda2) * eye
    return A, B


def assemble_en_dual(
    data: Dataset, pi, lambda1, lambda2, max_variables: int = MAX_PROGRAM_VARIABLES
) -> ConicProgram:
    """Dual elastic-net QP over ``w = [alpha, s, t, 1_p]``.

    Rows, in order: ``y'alpha = 0``; ``0 <= alpha <= W(y)``; ``s >= 0``;
    ``t >= 0``; ``A w >= 0``; ``B w >= 0``; trailing block pinned to one.
    """
    n, p = data.n, data.p
    N = n + 3 * p
    _check_en_args(data, lambda1, lambda2, N, max_variables)
    y = data.labels
    A, B = en_dual_maps(data, lambda1, lambda2)
    Q = n * lambda2 * (A.T @ A + B.T @ B)
    Q = 0.5 * (Q + Q.T)
    cost = -np.concatenate([np.ones(n), np.zeros(3 * p)])
    rows = [np.concatenate([y, np.zeros(3 * p)])[None, :]]
    rows.append(np.eye(n, N))
    rows.append(np.eye(p, N, k=n))
    rows.append(np.eye(p, N, k=n + p))
    rows.append(A)
    rows.append(B)
    rows.append(np.eye(p, N, k=n + 2 * p))
    C = np.vstack(rows)
    inf = np.full(p, np.inf)
    lower = np.concatenate([[0.0], np.zeros(n), np.zeros(4 * p), np.ones(p)])
    upper = np.concatenate([[0.0], build_weights(y, pi), inf, inf, inf, inf, np.ones(p)])
    return ConicProgram(Q, cost, C, lower, upper)


def _shifted_en_dual(data: Dataset, pi, lambda1, lambda2):
    """The elastic-net dual with the pinned block eliminated and ``s, t``
    shifted by ``n*lambda1``.

    Over ``z = [alpha, s - n*lambda1, t - n*lambda1]`` the program is the same
    QP as ``assemble_en_dual`` but every variable stays O(1) at the optimum,
    which keeps the splitting solver well conditioned when lambda1/lambda2 is
    large.  Returns the program and the maps with ``u = A z``, ``v = B z``.
    """
    n, p = data.n, data.p
    N = n + 2 * p
    _check_en_args(data, lambda1, lambda2, N + p, MAX_PROGRAM_VARIABLES)
    y = data.labels
    XtY = (y[:, None] * data.features).T
    scale = 1.0 / (n * lambda2)
    eye = np.eye(p)
    A = np.zeros((p, N))
    B = np.zeros((p, N))
    A[:, :n], A[:, n : n + p] = scale * XtY, scale * eye
    B[:, :n], B[:, n + p :] = -scale * XtY, scale * eye
    Q = n * lambda2 * (A.T @ A + B.T @ B)
    Q = 0.5 * (Q + Q.T)
    cost = -np.concatenate([np.ones(n), np.zeros(2 * p)])
    # u, v rows rescaled by n*lambda2 so their entries match the box rows
    C = np.vstack([np.concatenate([y, np.zeros(2 * p)])[None, :], np.eye(N), A / scale, B / scale])
    shift = np.full(2 * p, -n * lambda1)
    lower = np.concatenate([[0.0], np.zeros(n), shift, np.zeros(2 * p)])
    upper = np.concatenate([[0.0], build_weights(y, pi), np.full(4 * p, np.inf)])
    return ConicProgram(Q, cost, C, lower, upper), A, B


def recover_intercept_dual(data: Dataset, alpha, weights, beta) -> float:
    """Support-vector weighted average of ``y_i - x_i'beta``.

    Each sample is weighted by ``alpha_i (W_i - alpha_i)``, which vanishes at
    both box bounds; without interior support vectors the intercept falls back
    to the exact one-dimensional minimiser of the weighted hinge risk.
    """
    alpha = np.asarray(alpha, dtype=float)
    W = np.asarray(weights, dtype=float)
    slack = 1e-6 * max(1.0, float(np.max(W, initial=0.0)))
    if np.any(alpha < -slack) or np.any(alpha > W + slack):
        raise ValueError("alpha lies outside [0, W]")
    a = np.clip(alpha, 0.0, W)
    # multipliers within solver noise of a bound count as at the bound
    snap = BOUND_SNAP * max(1.0, float(np.max(W, initial=0.0)))
    a = np.where(a <= snap, 0.0, np.where(W - a <= snap, W, a))
    sv = a * (W - a)
    den = sv.sum()
    if den > SV_EPS * max(1.0, float(np.max(W, initial=0.0))) ** 2:
        resid = data.labels - data.features @ np.asarray(beta, dtype=float)
        return float(sv @ resid / den)
    return best_intercept(data, W, beta)


def train_en_wsvm(
    data: Dataset,
    pi: float,
    lambda1: float,
    lambda2: float,
    form: Form = Form.PRIMAL,
    p_beta: float = DEFAULT_P_BETA,
    settings: SolverSettings | None = None,
    working_set: bool = True,
) -> tuple[LinearModel, SelectionIndicator]:
    """Elastic-net weighted SVM; coefficients below ``p_beta`` are zeroed.

    In primal form ``working_set`` solves the QP on a growing subset of
    features and stops once every excluded feature passes the optimality test
    for a zero coefficient, which gives the same minimiser at a fraction of
    the cost when p is large.
    """
    data.require_both_classes()
    form = Form(form)
    n, p = data.n, data.p
    context = f"pi={pi}, lambda1={lambda1}, lambda2={lambda2}, form={form.value}"
    if form is Form.PRIMAL:
        b0 = zero_coefficient_certificate(data, pi, lambda1) if working_set else None
        if b0 is not None:
            beta = np.zeros(p)
        elif working_set:
            b0, beta = _en_primal_working_set(data, pi, lambda1, lambda2, settings, context)
        else:
            program = assemble_en_primal(data, pi, lambda1, lambda2)
            result = solve(program, settings)
            _check_solved(result, context)
            w = result.solution
            beta = w[n : n + p] - w[n + p : n + 2 * p]
            b0 = w[-1]
        method = Method.EN_PRIMAL
    else:
        program, A, B = _shifted_en_dual(data, pi, lambda1, lambda2)
        if settings is None:
            # beta = (A - B) z magnifies multiplier error by 1/(n*lambda2)
            eps = max(1e-9, 1e-6 * min(1.0, n * lambda2))
            settings = SolverSettings(eps_abs=eps, eps_rel=eps)
        result = solve(program, settings)
        _check_solved(result, context)
        z = result.solution
        beta = A @ z - B @ z
        W = build_weights(data.labels, pi)
        # the box holds only up to the solver's primal tolerance
        b0 = recover_intercept_dual(data, np.clip(z[:n], 0.0, W), W, beta)
        method = Method.EN_DUAL
    selection = extract_selection(beta, p_beta)
    beta = np.where(selection.mask, beta, 0.0)
    b0 = canonical_intercept(data, build_weights(data.labels, pi), beta, b0)
    model = LinearModel(b0, beta, pi, (lambda1, lambda2), method)
    return model, selection


def class_pair_distances(data: Dataset, chunk: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """``p x p`` sums of ``|x_is - x_it|`` over the positive and the negative class."""
    X, y = data.features, data.labels
    out = []
    for rows in (X[y > 0], X[y < 0]):
        D = np.empty((data.p, data.p))
        for a in range(0, data.p, chunk):
            D[a : a + chunk] = np.abs(rows[:, a : a + chunk, None] - rows[:, None, :]).sum(axis=0)
        out.append(D)
    return out[0], out[1]


def grouping_bound_excess(data: Dataset, model: LinearModel, distances=None) -> float:
    """Largest ``|b_s - b_t|`` minus its elastic-net grouping bound over all pairs.

    The bound is ``((1-pi) D+ + pi D-) / (n lambda2)`` with ``D+-`` the
    class-wise column distances; pairs of zero coefficients cannot violate it,
    so only rows of nonzero coefficients are formed.  Never negative because
    the diagonal contributes zero.
    """
    beta = np.asarray(model.coefficients, dtype=float)
    nz = np.flatnonzero(beta)
    if nz.size == 0:
        return 0.0
    pi, lambda2 = model.weight, model.lambdas[1]
    if distances is None:
        X, y = data.features, data.labels
        Dp, Dn = (np.abs(r[:, nz, None] - r[:, None, :]).sum(axis=0) for r in (X[y > 0], X[y < 0]))
    else:
        Dp, Dn = distances[0][nz], distances[1][nz]
    bound = ((1 - pi) * Dp + pi * Dn) / (data.n * lambda2)
    gap = np.abs(beta[nz, None] - beta[None, :])
    return float(max(0.0, np.max(gap - bound)))


def _en_primal_working_set(data, pi, lambda1, lambda2, settings, context):
    """Primal elastic net grown over features until no excluded one wants in.

    A coefficient held at zero is optimal when ``|x_j'Y alpha| <= n*lambda1``,
    with ``alpha`` the multipliers of the hinge rows.
    """
    n, p = data.n, data.p
    y = data.labels
    XtY = (y[:, None] * data.features).T
    bound = n * lambda1
    W = build_weights(y, pi)
    # start from the features most correlated with a balanced multiplier guess
    a0 = W.copy()
    pos, neg = y > 0, y < 0
    sp, sn = a0[pos].sum(), a0[neg].sum()
    if sp > sn:
        a0[pos] *= sn / sp
    else:
        a0[neg] *= sp / sn
    score = np.abs(XtY @ a0)
    k0 = min(p, max(10, n // 2))
    active = np.zeros(p, dtype=bool)
    active[np.argsort(-score, kind="stable")[:k0]] = True
    tol = KKT_SLACK_REL * max(1.0, bound)
    while True:
        cols = np.flatnonzero(active)
        sub = data.columns(cols)
        program = assemble_en_primal(sub, pi, lambda1, lambda2)
        result = solve(program, settings)
        _check_solved(result, context)
        k = cols.size
        w = result.solution
        alpha = -result.duals[-n:]
        excess = np.abs(XtY @ alpha) - bound
        excess[active] = -np.inf
        violators = np.flatnonzero(excess > tol)
        if violators.size == 0:
            beta = np.zeros(p)
            beta[cols] = w[n : n + k] - w[n + k : n + 2 * k]
            return w[-1], beta
        order = violators[np.argsort(-excess[violators], kind="stable")]
        active[order[: max(10, k)]] = True
