"""Block coordinate-descent solver for the combined l1 + row-wise l2
penalty, with active-row screening between full passes.

Each update optimizes one full coefficient row exactly: soft-threshold
every penalized entry, then rescale the penalized part of the row as a
group. Residuals are maintained incrementally so a row update costs
O(N * Q).
"""

from dataclasses import dataclass

import numpy as np

from remmap.core import CoefficientMatrix, objective, validate_problem


def lasso_update(u, col_sq_norm, lambda1, penalized=True):
    """Soft-threshold update for a single coefficient.

    Minimizes 0.5 * ||r - x * b||^2 + lambda1 * |b| over the scalar b,
    where u = x'r + ||x||^2 * b_old is the inner product with the
    response after removing every other term from the fit. Entries
    exempt from the penalty take their plain least-squares value.

    Parameters
    ----------
    u : float or ndarray
        Inner product of the predictor column with the working response.
    col_sq_norm : float
        Squared l2 norm of the predictor column.
    lambda1 : float or ndarray
        l1 penalty weight; broadcasts against `u`.
    penalized : bool or ndarray, optional
        Where False the threshold is skipped and u / col_sq_norm is
        returned unchanged. Broadcasts against `u`.

    Returns
    -------
    float or ndarray
        sign(u) * (|u| - lambda1)_+ / col_sq_norm where penalized,
        u / col_sq_norm elsewhere.
    """
    shrunk = np.sign(u) * np.maximum(np.abs(u) - lambda1, 0.0) / col_sq_norm
    if penalized is True:
        return shrunk
    return np.where(penalized, shrunk, u / col_sq_norm)


def group_shrink_row(lasso_row, c_row, col_sq_norm, lambda2):
    """Shrink the penalized entries of a soft-thresholded row as a group.

    With m the l2 norm of the penalized entries of `lasso_row`, those
    entries are scaled by (1 - lambda2 / (m * col_sq_norm))_+, or set to
    zero outright when m == 0. Unpenalized entries pass through.
    """
    lasso_row = np.asarray(lasso_row, dtype=np.float64)
    masked = np.where(c_row == 1, lasso_row, 0.0)
    m = np.sqrt((masked * masked).sum())
    factor = max(0.0, 1.0 - lambda2 / (m * col_sq_norm)) if m > 0 else 0.0
    return np.where(c_row == 1, factor * lasso_row, lasso_row)


@dataclass
class ResidualState:
    """Mutable solver state.

    partial_residuals holds y - x @ b for the current coefficients; row
    updates patch it by a rank-one correction. col_sq_norms caches the
    squared column norms of x.
    """

    partial_residuals: np.ndarray
    col_sq_norms: np.ndarray

    @classmethod
    def from_coefficients(cls, x, y, b):
        return cls(y - x @ b, np.einsum("ij,ij->j", x, x))

    def refresh(self, x, y, b):
        """Recompute residuals from scratch to shed accumulated drift."""
        np.subtract(y, x @ b, out=self.partial_residuals)


@dataclass(frozen=True)
class SolveReport:
    """Outcome of a solver run."""

    b: CoefficientMatrix
    sweeps_used: int
    converged: bool
    final_max_delta: float
    objective_value: float


def _update_row(state, x, b, p, c, frozen, lambda1, lambda2):
    """Optimize row p of b in place against the current residuals.

    Unpenalized entries (c == 0) take their exact least-squares value;
    penalized entries are soft-thresholded and then group-shrunk; frozen
    entries stay at zero. Returns the largest absolute change.
    """
    x_col = x[:, p]
    nrm = state.col_sq_norms[p]
    r = state.partial_residuals
    old = b[p]
    c_row = c[p]
    u = x_col @ r + nrm * old
    new = lasso_update(u, nrm, lambda1, c_row == 1)
    frozen_row = frozen[p] == 1
    if frozen_row.any():
        new[frozen_row] = 0.0
    if lambda2 > 0:
        new = group_shrink_row(new, c_row, nrm, lambda2)
    delta = new - old
    dmax = float(np.abs(delta).max())
    if dmax > 0.0:
        b[p] = new
        r -= np.outer(x_col, delta)
    return dmax


def update_row(state, b, p, problem, params):
    """Optimize one coefficient row in place and report whether it moved.

    Row p of `b` is replaced by its exact minimizer given every other
    row, and `state.partial_residuals` is patched to match.

    Parameters
    ----------
    state : ResidualState
        Residuals consistent with `b`; mutated in place.
    b : (P, Q) ndarray
        Current coefficients; row p is overwritten.
    p : int
        Row index to update.
    problem : RegressionProblem
    params : PenaltyParams

    Returns
    -------
    (ndarray, bool)
        A copy of the new row values, and whether any entry changed.
    """
    dmax = _update_row(
        state, problem.x, b, p, problem.c, problem.frozen,
        params.lambda1, params.lambda2,
    )
    return b[p].copy(), dmax > 0.0


def _initial_coefficients(x, y, c, frozen, lambda1):
    """Entrywise first guess: soft-threshold each raw inner product
    x_p'y_q (least squares where c == 0), with no group step."""
    col_sq_norms = np.einsum("ij,ij->j", x, x)[:, None]
    u = x.T @ y
    b0 = np.where(
        c == 1,
        np.sign(u) * np.maximum(np.abs(u) - lambda1, 0.0) / col_sq_norms,
        u / col_sq_norms,
    )
    b0[frozen == 1] = 0.0
    return b0


def _solve(x, y, c, frozen, lambda1, lambda2, tol, max_sweeps, max_inner, b0=None):
    """Active-shooting loop on raw arrays.

    lambda1 may be a scalar or a length-Q vector (one weight per
    response column). Returns (b, sweeps_used, converged, final_max_delta)
    where sweeps_used counts full passes over all rows.
    """
    n_rows = x.shape[1]
    if b0 is None:
        b = _initial_coefficients(x, y, c, frozen, lambda1)
    else:
        b = np.array(b0, dtype=np.float64)
        b[frozen == 1] = 0.0
    state = ResidualState.from_coefficients(x, y, b)
    sweeps_used = 0
    converged = False
    final_max_delta = np.inf
    while True:
        # cycle the rows whose penalized part is active until they settle
        active = np.flatnonzero(np.any((b != 0) & (c == 1), axis=1))
        for inner in range(1, max_inner + 1):
            if active.size == 0:
                break
            delta = 0.0
            for p in active:
                delta = max(delta, _update_row(state, x, b, p, c, frozen, lambda1, lambda2))
            if inner % 50 == 0:
                # shed drift accumulated by the rank-one residual patches
                state.refresh(x, y, b)
            if delta <= tol:
                break
        # one pass over every row decides convergence
        state.refresh(x, y, b)
        delta = 0.0
        for p in range(n_rows):
            delta = max(delta, _update_row(state, x, b, p, c, frozen, lambda1, lambda2))
        sweeps_used += 1
        final_max_delta = delta
        if delta <= tol:
            converged = True
            break
        if sweeps_used >= max_sweeps:
            break
    return b, sweeps_used, converged, final_max_delta


def fit(problem, params, warm_start=None):
    """Fit the penalized coefficient matrix.

    Parameters
    ----------
    problem : RegressionProblem
    params : PenaltyParams
    warm_start : (P, Q) array or CoefficientMatrix, optional
        Starting coefficients. When omitted the solver starts from an
        entrywise soft-threshold of x'y.

    Returns
    -------
    SolveReport
        Coefficients plus sweep count, convergence flag, the largest
        coefficient change in the final full pass, and the objective.

    Notes
    -----
    With both penalties zero the problem is plain least squares, which
    only has a unique minimizer when x has full column rank; anything
    else raises ValueError.
    """
    validate_problem(problem)
    if params.lambda1 == 0 and params.lambda2 == 0:
        if np.linalg.matrix_rank(problem.x) < problem.p:
            raise ValueError(
                "lambda1 = lambda2 = 0 requires x with full column rank"
            )
    if isinstance(warm_start, CoefficientMatrix):
        warm_start = warm_start.b
    b, sweeps_used, converged, final_max_delta = _solve(
        problem.x,
        problem.y,
        problem.c,
        problem.frozen,
        params.lambda1,
        params.lambda2,
        params.tol,
        params.max_sweeps,
        params.max_inner,
        b0=warm_start,
    )
    coef = CoefficientMatrix(b)
    return SolveReport(
        b=coef,
        sweeps_used=sweeps_used,
        converged=converged,
        final_max_delta=final_max_delta,
        objective_value=objective(problem, coef, params),
    )
