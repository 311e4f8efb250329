"""Dense operator-splitting solver for convex quadratic and linear programs.

Every program has the canonical form

    minimize    0.5 * w' Q w + c' w
    subject to  lower <= C w <= upper

and is solved by an ADMM iteration with over-relaxation, Ruiz equilibration,
adaptive penalty updates and an active-set polish.  A zero curvature matrix
turns the same routine into an LP solver.

Rows of ``C`` with a single nonzero (simple bounds) are kept out of the dense
linear algebra: when the curvature is diagonal the per-iteration linear system
is solved through the Woodbury identity on the remaining "general" rows only.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

INFINITY = 1e20
SIGMA = 1e-6
RHO_MIN = 1e-6
RHO_MAX = 1e6
RHO_EQ_FACTOR = 1e3
SCALING_MIN = 1e-4
SCALING_MAX = 1e4


class Status(enum.Enum):
    SOLVED = "solved"
    MAX_ITERATIONS = "max_iterations"
    PRIMAL_INFEASIBLE = "primal_infeasible"
    DUAL_INFEASIBLE = "dual_infeasible"


@dataclass(frozen=True, eq=False)
class ConicProgram:
    """Convex QP/LP data: ``min 0.5 w'Qw + c'w  s.t.  lower <= Cw <= upper``."""

    curvature: np.ndarray
    linear_cost: np.ndarray
    constraints: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.curvature, dtype=float))
        c = np.asarray(self.linear_cost, dtype=float).ravel()
        C = np.asarray(self.constraints, dtype=float)
        n = c.size
        if C.ndim == 1 and C.size == 0:
            C = C.reshape(0, n)
        C = np.atleast_2d(C)
        lo = np.asarray(self.lower, dtype=float).ravel()
        up = np.asarray(self.upper, dtype=float).ravel()
        if Q.shape != (n, n):
            raise ValueError(f"curvature has shape {Q.shape}, expected {(n, n)}")
        if C.shape[1] != n:
            raise ValueError(f"constraints have {C.shape[1]} columns, expected {n}")
        m = C.shape[0]
        if lo.shape != (m,) or up.shape != (m,):
            raise ValueError(
                f"bounds have shapes {lo.shape}/{up.shape}, expected ({m},)"
            )
        if n and np.max(np.abs(Q - Q.T), initial=0.0) > 1e-10:
            raise ValueError("curvature is not symmetric")
        if np.any(lo > up):
            raise ValueError("lower bound exceeds upper bound")
        for arr in (Q, c, C):
            if not np.all(np.isfinite(arr)):
                raise ValueError("program data must be finite")
        if np.any(np.isnan(lo)) or np.any(np.isnan(up)):
            raise ValueError("bounds must not be NaN")
        object.__setattr__(self, "curvature", Q)
        object.__setattr__(self, "linear_cost", c)
        object.__setattr__(self, "constraints", C)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @property
    def n_variables(self) -> int:
        return self.linear_cost.size

    @property
    def n_constraints(self) -> int:
        return self.constraints.shape[0]

    def objective(self, w) -> float:
        w = np.asarray(w, dtype=float)
        return float(0.5 * w @ self.curvature @ w + self.linear_cost @ w)


@dataclass(frozen=True)
class SolverSettings:
    eps_abs: float = 1e-6
    eps_rel: float = 1e-6
    max_iterations: int = 20000
    step_scale: float = 1.0
    polish: bool = True
    relaxation: float = 1.6
    adaptive_interval: int = 100
    check_interval: int = 25
    scaling_iterations: int = 10
    eps_infeasible: float = 1e-5

    def __post_init__(self):
        for name in ("eps_abs", "eps_rel", "step_scale", "eps_infeasible"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")
        if not 0 < self.relaxation < 2:
            raise ValueError("relaxation must lie in (0, 2)")


@dataclass(frozen=True, eq=False)
class SolverResult:
    status: Status
    solution: np.ndarray
    duals: np.ndarray
    primal_residual: float
    dual_residual: float
    iterations: int
    polished: bool = False

    @property
    def solved(self) -> bool:
        return self.status is Status.SOLVED


def kkt_residuals(program: ConicProgram, solution, duals) -> tuple[float, float]:
    """Bound violation of ``C w`` and the infinity norm of ``Qw + c + C'y``."""
    w = np.asarray(solution, dtype=float).ravel()
    y = np.asarray(duals, dtype=float).ravel()
    if w.size != program.n_variables:
        raise ValueError(f"solution has length {w.size}, expected {program.n_variables}")
    if y.size != program.n_constraints:
        raise ValueError(f"duals have length {y.size}, expected {program.n_constraints}")
    Cw = program.constraints @ w
    viol = np.maximum(program.lower - Cw, Cw - program.upper)
    primal = float(max(np.max(viol, initial=0.0), 0.0))
    grad = program.curvature @ w + program.linear_cost + program.constraints.T @ y
    dual = float(np.max(np.abs(grad), initial=0.0))
    return primal, dual


def _inf_norm(v) -> float:
    return float(np.max(np.abs(v), initial=0.0))


class _Structure:
    """Split of the constraint rows into simple-bound rows and general rows."""

    def __init__(self, C: np.ndarray):
        m, n = C.shape
        nnz = np.count_nonzero(C, axis=1)
        self.n = n
        self.m = m
        self.single = np.flatnonzero(nnz == 1)
        self.general = np.flatnonzero(nnz != 1)
        if self.single.size:
            block = C[self.single]
            self.single_col = np.argmax(block != 0, axis=1)
            self.single_val = block[np.arange(self.single.size), self.single_col]
        else:
            self.single_col = np.zeros(0, dtype=int)
            self.single_val = np.zeros(0)
        self.G = np.ascontiguousarray(C[self.general])

    def matvec(self, x):
        out = np.empty(self.m)
        out[self.single] = self.single_val * x[self.single_col]
        out[self.general] = self.G @ x
        return out

    def rmatvec(self, y):
        out = np.bincount(
            self.single_col, weights=self.single_val * y[self.single], minlength=self.n
        ).astype(float)
        if self.general.size:
            out += self.G.T @ y[self.general]
        return out


class _LinearSystem:
    """Factorisation of ``Q + sigma I + C' diag(rho) C``."""

    def __init__(self, Q: np.ndarray, structure: _Structure, q_diagonal: bool):
        self.Q = Q
        self.s = structure
        self.q_diag = np.diag(Q).copy() if q_diagonal else None
        self.woodbury = q_diagonal and structure.general.size < structure.n

    def factor(self, rho: np.ndarray):
        s = self.s
        d = SIGMA + np.bincount(
            s.single_col, weights=rho[s.single] * s.single_val**2, minlength=s.n
        ).astype(float)
        rho_g = rho[s.general]
        if self.woodbury:
            self.h = self.q_diag + d
            GH = s.G / self.h
            self.GH = GH
            K = GH @ s.G.T
            K[np.diag_indices_from(K)] += 1.0 / rho_g
            self.chol = sla.cho_factor(K, check_finite=False)
        else:
            M = self.Q.copy()
            M[np.diag_indices_from(M)] += d
            if s.general.size:
                M += s.G.T @ (rho_g[:, None] * s.G)
            self.chol = sla.cho_factor(M, check_finite=False)

    def solve(self, r: np.ndarray) -> np.ndarray:
        if self.woodbury:
            hr = r / self.h
            if self.s.general.size == 0:
                return hr
            t = sla.cho_solve(self.chol, self.GH @ r, check_finite=False)
            return hr - (self.s.G.T @ t) / self.h
        return sla.cho_solve(self.chol, r, check_finite=False)


def _col_max(size, index, values):
    out = np.zeros(size)
    np.maximum.at(out, index, values)
    return out


def _ruiz(Q, c, C, iterations):
    """Modified Ruiz equilibration of the KKT matrix plus cost scaling.

    The iteration only touches the nonzero entries since the programs built
    here are mostly identity blocks; dense scaled matrices are formed once.
    """
    n = c.size
    m = C.shape[0]
    D = np.ones(n)
    E = np.ones(m)
    c_scale = 1.0
    qi, qj = np.nonzero(Q)
    qv = np.abs(Q[qi, qj])
    ci, cj = np.nonzero(C)
    cv = np.abs(C[ci, cj])
    cs = c.copy()
    for _ in range(iterations):
        q_now = qv * D[qi] * D[qj] * c_scale
        c_now = cv * E[ci] * D[cj]
        col = np.maximum(_col_max(n, qj, q_now), _col_max(n, cj, c_now))
        row = _col_max(m, ci, c_now)
        dD = np.where(col == 0, 1.0, 1.0 / np.sqrt(np.clip(col, SCALING_MIN, SCALING_MAX)))
        dE = np.where(row == 0, 1.0, 1.0 / np.sqrt(np.clip(row, SCALING_MIN, SCALING_MAX)))
        D *= dD
        E *= dE
        cs = dD * cs
        qnorm = np.mean(_col_max(n, qj, qv * D[qi] * D[qj] * c_scale)) if n else 0.0
        gamma = max(qnorm, _inf_norm(cs))
        gamma = 1.0 if gamma == 0 else 1.0 / np.clip(gamma, SCALING_MIN, SCALING_MAX)
        cs *= gamma
        c_scale *= gamma
    Qs = c_scale * (D[:, None] * Q * D[None, :])
    Cs = E[:, None] * C * D[None, :]
    return Qs, cs, Cs, D, E, c_scale


class _Workspace:
    def __init__(self, program: ConicProgram, settings: SolverSettings):
        self.settings = settings
        self.program = program
        Q, c, C = program.curvature, program.linear_cost, program.constraints
        lo = np.clip(program.lower, -INFINITY, INFINITY)
        up = np.clip(program.upper, -INFINITY, INFINITY)
        self.Q, self.c, self.C, self.D, self.E, self.cs = _ruiz(
            Q, c, C, settings.scaling_iterations
        )
        self.lo = np.where(lo <= -INFINITY, -INFINITY, lo * self.E)
        self.up = np.where(up >= INFINITY, INFINITY, up * self.E)
        self.structure = _Structure(self.C)
        q_diag = np.count_nonzero(self.Q - np.diag(np.diag(self.Q))) == 0
        self.system = _LinearSystem(self.Q, self.structure, q_diag)
        self.eq = (self.up - self.lo) < 1e-12
        self.loose = (self.lo <= -INFINITY) & (self.up >= INFINITY)
        self.rho_base = float(np.clip(settings.step_scale, RHO_MIN, RHO_MAX))
        self.rho = self._rho_vector(self.rho_base)
        self.system.factor(self.rho)

    def _rho_vector(self, base):
        rho = np.full(self.structure.m, base)
        rho[self.eq] = RHO_EQ_FACTOR * base
        rho[self.loose] = RHO_MIN
        return rho

    def set_rho(self, base):
        self.rho_base = float(np.clip(base, RHO_MIN, RHO_MAX))
        self.rho = self._rho_vector(self.rho_base)
        self.system.factor(self.rho)

    # conversions between scaled and original variables
    def unscale(self, x, y):
        return self.D * x, self.E * y / self.cs

    def residuals(self, x, z, y):
        """Unscaled ADMM residuals and their normalisers."""
        Ax = self.structure.matvec(x)
        Qx = self.Q @ x
        ATy = self.structure.rmatvec(y)
        Einv = 1.0 / self.E
        cD = 1.0 / (self.cs * self.D)
        r_prim = _inf_norm((Ax - z) * Einv)
        r_dual = _inf_norm((Qx + self.c + ATy) * cD)
        prim_scale = max(_inf_norm(Ax * Einv), _inf_norm(z * Einv))
        dual_scale = max(_inf_norm(Qx * cD), _inf_norm(ATy * cD), _inf_norm(self.c * cD))
        # scaled versions drive the penalty update
        sp = max(_inf_norm(Ax), _inf_norm(z), 1e-30)
        sd = max(_inf_norm(Qx), _inf_norm(ATy), _inf_norm(self.c), 1e-30)
        ratio = (_inf_norm(Ax - z) / sp) / max(_inf_norm(Qx + self.c + ATy) / sd, 1e-30)
        return r_prim, r_dual, prim_scale, dual_scale, ratio

    def tolerances(self, prim_scale, dual_scale):
        s = self.settings
        return s.eps_abs + s.eps_rel * prim_scale, s.eps_abs + s.eps_rel * dual_scale

    def primal_infeasible(self, dy) -> bool:
        eps = self.settings.eps_infeasible
        dy = self.E * dy
        dy = np.where((dy > 0) & (self.up >= INFINITY), 0.0, dy)
        dy = np.where((dy < 0) & (self.lo <= -INFINITY), 0.0, dy)
        norm = _inf_norm(dy)
        if norm < 1e-30:
            return False
        ATdy = self.structure.rmatvec(dy / self.E) / self.D
        if _inf_norm(ATdy) > eps * norm:
            return False
        up = np.where(self.up >= INFINITY, 0.0, self.up / self.E)
        lo = np.where(self.lo <= -INFINITY, 0.0, self.lo / self.E)
        support = up @ np.maximum(dy, 0) + lo @ np.minimum(dy, 0)
        return support < -eps * norm

    def dual_infeasible(self, dx) -> bool:
        eps = self.settings.eps_infeasible
        dxu = self.D * dx
        norm = _inf_norm(dxu)
        if norm < 1e-30:
            return False
        tol = eps * norm
        if _inf_norm(self.Q @ dx / (self.cs * self.D)) > tol:
            return False
        if (self.c / (self.cs * self.D)) @ dxu > -tol:
            return False
        Adx = self.structure.matvec(dx) / self.E
        upper_ok = np.where(self.up >= INFINITY, True, Adx <= tol)
        lower_ok = np.where(self.lo <= -INFINITY, True, Adx >= -tol)
        return bool(np.all(upper_ok & lower_ok))

    def active_sets(self, z, y):
        low = (z - self.lo) < -y
        upp = (self.up - z) < y
        low |= self.eq
        upp &= ~self.eq
        low &= ~upp
        return low, upp

    def polish(self, z, y):
        """Re-solve the equality-constrained KKT system on a guessed active set.

        Returns scaled ``(x, y, low, upp)`` or None when the guess is unusable.
        """
        return self.polish_on(*self.active_sets(z, y))

    def polish_on(self, low, upp):
        s = self.structure
        active = low | upp
        target = np.where(upp, self.up, self.lo)
        n = s.n
        fixed_val = np.full(n, np.nan)
        fixed_row = np.full(n, -1)
        single_active = active[s.single]
        for k, j, a in zip(
            s.single[single_active],
            s.single_col[single_active],
            s.single_val[single_active],
        ):
            v = target[k] / a
            if fixed_row[j] >= 0:
                if abs(fixed_val[j] - v) > 1e-9 * max(1.0, abs(v)):
                    return None
                continue
            fixed_val[j] = v
            fixed_row[j] = k
        fixed = fixed_row >= 0
        free = np.flatnonzero(~fixed)
        fixed_idx = np.flatnonzero(fixed)
        gen_active = s.general[active[s.general]]
        # position of each general row inside s.G
        gpos = np.searchsorted(s.general, gen_active)
        Ga = s.G[gpos]
        x = np.zeros(n)
        x[fixed_idx] = fixed_val[fixed_idx]
        nf, na = free.size, gen_active.size
        if nf + na:
            Qff = self.Q[np.ix_(free, free)]
            rhs_x = -(self.c[free] + self.Q[np.ix_(free, fixed_idx)] @ x[fixed_idx])
            GaF = Ga[:, free]
            rhs_y = target[gen_active] - Ga[:, fixed_idx] @ x[fixed_idx]
            K = np.zeros((nf + na, nf + na))
            K[:nf, :nf] = Qff
            K[:nf, nf:] = GaF.T
            K[nf:, :nf] = GaF
            delta = 1e-7
            Kreg = K.copy()
            Kreg[np.arange(nf), np.arange(nf)] += delta
            Kreg[np.arange(nf, nf + na), np.arange(nf, nf + na)] -= delta
            try:
                lu = sla.lu_factor(Kreg, check_finite=False)
            except (ValueError, np.linalg.LinAlgError):
                return None
            rhs = np.concatenate([rhs_x, rhs_y])
            sol = sla.lu_solve(lu, rhs, check_finite=False)
            for _ in range(25):
                r = rhs - K @ sol
                if _inf_norm(r) <= 1e-13 * max(1.0, _inf_norm(rhs)):
                    break
                sol = sol + sla.lu_solve(lu, r, check_finite=False)
            if not np.all(np.isfinite(sol)):
                return None
            x[free] = sol[:nf]
            yg = sol[nf:]
        else:
            yg = np.zeros(0)
        y_new = np.zeros(s.m)
        y_new[gen_active] = yg
        grad = self.Q @ x + self.c + s.rmatvec(y_new)
        rows = fixed_row[fixed_idx]
        col_of_row = fixed_idx
        pos = np.searchsorted(s.single, rows)
        y_new[rows] = -grad[col_of_row] / s.single_val[pos]
        return x, y_new, low, upp


def _refine_sets(ws: _Workspace, x, y, low, upp, single: bool = False):
    """Swap rows in or out of the active set after a failed polish.

    Violated rows become active at the violated side; active rows whose
    multiplier has the wrong sign are released.  With ``single`` only the
    worst offender moves, which avoids cycling on nearly degenerate sets.
    """
    Cx = ws.structure.matvec(x)
    scale = np.maximum(1.0, np.maximum(np.abs(ws.lo), np.abs(ws.up)))
    scale = np.where(scale < INFINITY, scale, 1.0)
    tol = 1e-9 * scale
    below = np.where(Cx < ws.lo - tol, ws.lo - Cx, 0.0)
    above = np.where(Cx > ws.up + tol, Cx - ws.up, 0.0)
    wrong_low = np.where(low & ~ws.eq & (y > tol), y, 0.0)
    wrong_upp = np.where(upp & (y < -tol), -y, 0.0)
    if single:
        worst = np.argmax(np.stack([below, above, wrong_low, wrong_upp]), axis=None)
        kind, row = divmod(int(worst), Cx.size)
        low, upp = low.copy(), upp.copy()
        if kind == 0:
            low[row], upp[row] = True, False
        elif kind == 1:
            upp[row], low[row] = True, False
        elif kind == 2:
            low[row] = False
        else:
            upp[row] = False
        return low, upp
    new_low = (low & ~(wrong_low > 0)) | (below > 0)
    new_upp = (upp & ~(wrong_upp > 0)) | (above > 0)
    new_low |= ws.eq
    new_upp &= ~ws.eq
    new_low &= ~new_upp
    return new_low, new_upp


def _polish_refined(ws: _Workspace, z, y, rounds: int = 30, block_rounds: int = 3):
    """Polish with rounds of active-set correction; None on failure."""
    low, upp = ws.active_sets(z, y)
    seen = set()
    for k in range(rounds):
        key = np.packbits(low).tobytes() + np.packbits(upp).tobytes()
        if key in seen:
            return None
        seen.add(key)
        out = ws.polish_on(low, upp)
        if out is None:
            return None
        ok, xu, yu, rp, rd = _verify(ws, *out)
        if ok:
            return xu, yu, rp, rd
        low, upp = _refine_sets(ws, out[0], out[1], low, upp, single=k >= block_rounds)
    return None


def _verify(ws: _Workspace, x, y, low, upp):
    """Unscaled residuals of a candidate, with dual sign violations folded in."""
    xu, yu = ws.unscale(x, y)
    prog = ws.program
    r_prim, r_dual = kkt_residuals(prog, xu, yu)
    Cx = prog.constraints @ xu
    Qx = prog.curvature @ xu
    CTy = prog.constraints.T @ yu
    eq = ws.eq
    sign = max(
        np.max(yu[low & ~eq], initial=0.0),
        np.max(-yu[upp & ~eq], initial=0.0),
        0.0,
    )
    tol_p, tol_d = ws.tolerances(
        _inf_norm(Cx), max(_inf_norm(Qx), _inf_norm(CTy), _inf_norm(prog.linear_cost))
    )
    ok = r_prim <= tol_p and r_dual <= tol_d and sign <= tol_d
    return ok, xu, yu, r_prim, r_dual


def solve(program: ConicProgram, settings: SolverSettings | None = None) -> SolverResult:
    """Solve a convex QP (or LP when the curvature is zero).

    Deterministic for identical inputs.  ``Status.SOLVED`` guarantees that the
    returned point satisfies the residual tolerances of ``settings``; on
    ``MAX_ITERATIONS`` the last iterate is attached.
    """
    settings = settings or SolverSettings()
    n, m = program.n_variables, program.n_constraints
    if n == 0:
        return SolverResult(Status.SOLVED, np.zeros(0), np.zeros(m), 0.0, 0.0, 0)

    ws = _Workspace(program, settings)
    s = ws.structure
    alpha = settings.relaxation
    x = np.zeros(n)
    z = np.clip(np.zeros(m), ws.lo, ws.up)
    y = np.zeros(m)
    last_guess = None
    previous_guess = None
    adapt = True
    rho_prev = None

    for it in range(1, settings.max_iterations + 1):
        x_prev, y_prev = x, y
        rhs = SIGMA * x - ws.c + s.rmatvec(ws.rho * z - y)
        x_tilde = ws.system.solve(rhs)
        z_tilde = s.matvec(x_tilde)
        x = alpha * x_tilde + (1 - alpha) * x_prev
        z_relax = alpha * z_tilde + (1 - alpha) * z
        z_new = np.clip(z_relax + y / ws.rho, ws.lo, ws.up)
        y = y + ws.rho * (z_relax - z_new)
        z = z_new

        check = it % settings.check_interval == 0 or it == settings.max_iterations
        if not check:
            continue
        r_prim, r_dual, ps, ds, ratio = ws.residuals(x, z, y)
        tol_p, tol_d = ws.tolerances(ps, ds)
        if r_prim <= tol_p and r_dual <= tol_d:
            xu, yu = ws.unscale(x, y)
            result = SolverResult(Status.SOLVED, xu, yu, *kkt_residuals(program, xu, yu), it)
            if settings.polish:
                result = _try_final_polish(ws, z, y, result)
            return result

        if ws.primal_infeasible(y - y_prev):
            xu, yu = ws.unscale(x, y)
            return SolverResult(
                Status.PRIMAL_INFEASIBLE, xu, yu, *kkt_residuals(program, xu, yu), it
            )
        if ws.dual_infeasible(x - x_prev):
            xu, yu = ws.unscale(x, y)
            return SolverResult(
                Status.DUAL_INFEASIBLE, xu, yu, *kkt_residuals(program, xu, yu), it
            )

        if settings.polish:
            low, upp = ws.active_sets(z, y)
            guess = np.packbits(low).tobytes() + np.packbits(upp).tobytes()
            # only polish once the guessed active set has settled
            if guess == previous_guess and guess != last_guess:
                last_guess = guess
                out = _polish_refined(ws, z, y)
                if out is not None:
                    return SolverResult(Status.SOLVED, *out, it, True)
            previous_guess = guess

        if it % settings.adaptive_interval == 0:
            new_rho = ws.rho_base * np.sqrt(ratio)
            if not adapt and max(new_rho / ws.rho_base, ws.rho_base / new_rho) > 25:
                # frozen but badly unbalanced: resume adapting
                adapt, rho_prev = True, None
            if adapt and (new_rho > 5 * ws.rho_base or new_rho < ws.rho_base / 5):
                # a jump back towards the previous penalty means the estimate
                # is oscillating: settle between the two and stop adapting
                if rho_prev is not None and max(new_rho / rho_prev, rho_prev / new_rho) < 5:
                    new_rho = np.sqrt(ws.rho_base * rho_prev)
                    adapt = False
                rho_prev = ws.rho_base
                ws.set_rho(new_rho)

    xu, yu = ws.unscale(x, y)
    result = SolverResult(
        Status.MAX_ITERATIONS, xu, yu, *kkt_residuals(program, xu, yu), settings.max_iterations
    )
    if settings.polish:
        out = _polish_refined(ws, z, y)
        if out is not None:
            return SolverResult(Status.SOLVED, *out, result.iterations, True)
    return result


def _try_final_polish(ws, z, y, result):
    out = _polish_refined(ws, z, y)
    if out is None:
        return result
    return SolverResult(Status.SOLVED, *out, result.iterations, True)
