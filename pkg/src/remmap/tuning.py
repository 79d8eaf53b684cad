"""Penalty selection: v-fold cross-validation scored through least-squares
refits on each training support, majority voting of fold supports, and a
BIC criterion built on an estimated degrees of freedom."""

import warnings
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from remmap.core import (
    CoefficientMatrix,
    PenaltyParams,
    penalty_value,
    validate_problem,
)
from remmap.solver import SolveReport, _solve, fit, lasso_update


@dataclass(frozen=True)
class FoldAssignment:
    """Fold label per sample for v-fold cross-validation.

    Labels run from 0 to v - 1. The seed that produced the split is kept
    alongside so an assignment can be reproduced from its record.
    """

    labels: np.ndarray
    v: int = None
    seed: int = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        if self.v is None:
            object.__setattr__(self, "v", int(labels.max()) + 1)

    @property
    def n_samples(self):
        return self.labels.shape[0]

    @property
    def n_folds(self):
        return self.v

    def test_indices(self, fold):
        return np.flatnonzero(self.labels == fold)

    def train_indices(self, fold):
        return np.flatnonzero(self.labels != fold)


def assign_folds(n_samples, n_folds, seed=0):
    """Randomly split `n_samples` into `n_folds` near-equal folds.

    Fold sizes differ by at most one. The split is a pure function of
    (n_samples, n_folds, seed).
    """
    if n_folds < 2:
        raise ValueError("need at least 2 folds")
    if n_folds > n_samples:
        raise ValueError(f"cannot split {n_samples} samples into {n_folds} folds")
    rng = np.random.default_rng(seed)
    labels = np.empty(n_samples, dtype=np.int64)
    labels[rng.permutation(n_samples)] = np.arange(n_samples) % n_folds
    return FoldAssignment(labels, n_folds, seed)


def ols_refit(x, y, support):
    """Least-squares refit of each response on its selected predictors.

    Coefficients outside `support` are zero. Each response column is fit
    by minimum-norm least squares; singular values below 1e-10 times the
    largest are treated as zero, so rank-deficient supports are handled.

    Parameters
    ----------
    x : (N, P) predictor matrix.
    y : (N, Q) response matrix.
    support : (P, Q) boolean selection mask.

    Returns
    -------
    (P, Q) ndarray of refit coefficients.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    support = np.asarray(support, dtype=bool)
    if support.shape != (x.shape[1], y.shape[1]):
        raise ValueError(
            f"support has shape {support.shape}, expected {(x.shape[1], y.shape[1])}"
        )
    b = np.zeros(support.shape)
    # responses sharing a selection pattern are solved in one call
    groups = {}
    for j in range(support.shape[1]):
        groups.setdefault(support[:, j].tobytes(), []).append(j)
    for key, cols in groups.items():
        idx = np.flatnonzero(np.frombuffer(key, dtype=bool))
        if idx.size == 0:
            continue
        sol, *_ = np.linalg.lstsq(x[:, idx], y[:, cols], rcond=1e-10)
        b[np.ix_(idx, cols)] = sol
    return b


def cv_vote(fold_supports, final_support=None, vote_threshold=None):
    """Combine per-fold supports by majority vote.

    An entry survives when strictly more than `vote_threshold` folds
    selected it (default: half the fold count) and, when `final_support`
    is given, only where that support is also set.
    """
    fold_supports = [np.asarray(s, dtype=bool) for s in fold_supports]
    if not fold_supports:
        raise ValueError("need at least one fold support")
    if vote_threshold is None:
        vote_threshold = len(fold_supports) // 2
    counts = np.zeros(fold_supports[0].shape, dtype=np.int64)
    for s in fold_supports:
        counts += s
    keep = counts > vote_threshold
    if final_support is not None:
        keep &= np.asarray(final_support, dtype=bool)
    return keep


def lasso_intermediate(problem, b, lambda1):
    """Entrywise soft-threshold estimates evaluated at `b`.

    For each predictor row this is the value the solver's first update
    step would produce from the residuals at `b`: the inner product
    u = x_p'(y - x b) + ||x_p||^2 b_p soft-thresholded by `lambda1`
    where the entry is penalized, and left at its least-squares value
    u / ||x_p||^2 where it is not. Frozen entries are zero. At a
    converged solution this recovers the intermediate quantity whose
    row norms drive the group-shrink step.
    """
    bm = b.b if isinstance(b, CoefficientMatrix) else np.asarray(b, dtype=np.float64)
    x, y = problem.x, problem.y
    col_sq = np.einsum("ij,ij->j", x, x)[:, None]
    u = x.T @ (y - x @ bm) + col_sq * bm
    out = np.asarray(lasso_update(u, col_sq, lambda1, problem.c == 1))
    out[problem.frozen == 1] = 0.0
    return out


def _df_by_response(c, col_sq, b_hat, b_lasso, lambda2):
    """Per-response model degrees of freedom given a solution and its
    soft-threshold intermediate. Penalized entries that survived both
    shrinkage steps count 1 minus a group-shrink correction; unpenalized
    entries count 1 each."""
    masked = np.where(c == 1, b_lasso, 0.0)
    m = np.sqrt((masked * masked).sum(axis=1))
    m_safe = np.where(m > 0, m, 1.0)
    shrink = 1.0 - (lambda2 / col_sq)[:, None] * (
        (m * m)[:, None] - b_lasso * b_lasso
    ) / (m_safe ** 3)[:, None]
    keep = (b_hat != 0) & (c == 1)
    return np.where(keep, shrink, 0.0).sum(axis=0) + (1.0 - c).sum(axis=0)


def _warn_if_correlated(x, stacklevel=3):
    gram = x.T @ x
    off = gram - np.diag(np.diag(gram))
    if np.abs(off).max() > 1e-8 * np.diag(gram).max():
        warnings.warn(
            "predictor columns are not orthogonal; the degrees-of-freedom "
            "estimate is an approximation",
            stacklevel=stacklevel,
        )


def df_estimate(problem, b_hat, b_lasso, lambda2, warn_if_correlated=True):
    """Estimate the model degrees of freedom for each response.

    Counts, per response, the penalized coefficients that survived both
    shrinkage steps, each discounted by the derivative of the
    group-shrink factor, plus one for every unpenalized coefficient.
    The l1 weight enters through `b_lasso`, which already reflects it.

    The estimate is unbiased when the predictor columns are orthogonal;
    otherwise it is an approximation and a warning is issued unless
    `warn_if_correlated` is False.

    Parameters
    ----------
    problem : RegressionProblem
    b_hat : (P, Q) array or CoefficientMatrix
        Solution of the penalized fit.
    b_lasso : (P, Q) ndarray
        Soft-threshold intermediate at the same solution, from
        `lasso_intermediate`.
    lambda2 : float
        Row-penalty weight the solution was fit with.

    Returns
    -------
    (Q,) ndarray of per-response degrees of freedom.
    """
    validate_problem(problem)
    bh = b_hat.b if isinstance(b_hat, CoefficientMatrix) else np.asarray(b_hat)
    bl = np.asarray(b_lasso, dtype=np.float64)
    if bh.shape != (problem.p, problem.q) or bl.shape != (problem.p, problem.q):
        raise ValueError(
            f"coefficient shapes {bh.shape} and {bl.shape} do not match "
            f"the problem shape {(problem.p, problem.q)}"
        )
    if warn_if_correlated:
        _warn_if_correlated(problem.x, stacklevel=2)
    col_sq = np.einsum("ij,ij->j", problem.x, problem.x)
    return _df_by_response(problem.c, col_sq, bh, bl, lambda2)


def bic_score(problem, b, df):
    """BIC of a fitted coefficient matrix.

    N * sum_q log(RSS_q) + log(N) * sum_q df_q, with RSS computed from
    `b` directly (no refit) and `df` the per-response degrees of
    freedom, typically from `df_estimate`.

    Raises
    ------
    ValueError
        If any response has zero residual sum of squares: its log is
        undefined, which signals an interpolating fit.
    """
    bm = b.b if isinstance(b, CoefficientMatrix) else np.asarray(b, dtype=np.float64)
    if bm.shape != (problem.p, problem.q):
        raise ValueError(f"b has shape {bm.shape}, expected {(problem.p, problem.q)}")
    df = np.asarray(df, dtype=np.float64).ravel()
    if df.shape != (problem.q,):
        raise ValueError(f"df has length {df.shape[0]}, expected {problem.q}")
    resid = problem.y - problem.x @ bm
    rss = (resid * resid).sum(axis=0)
    if np.any(rss == 0):
        j = int(np.flatnonzero(rss == 0)[0])
        raise ValueError(
            f"response {j} has zero residual sum of squares; BIC is undefined"
        )
    n = problem.n
    return float(n * np.log(rss).sum() + np.log(n) * df.sum())


def default_grid(problem, n_lambda1=10, n_lambda2=10, ratio=0.01):
    """Log-spaced penalty values anchored at the smallest l1 weight that
    zeroes every penalized coefficient in a single soft-threshold pass.

    Returns (lambda1_values, lambda2_values), each descending from the
    anchor down to `ratio` times the anchor.
    """
    mask = problem.c == 1
    if not mask.any():
        raise ValueError("no penalized entries; there is nothing to tune")
    lam_max = float(np.abs((problem.x.T @ problem.y)[mask]).max())
    if lam_max == 0:
        raise ValueError("x'y vanishes on all penalized entries")

    def levels(k):
        if k == 1:
            return np.array([lam_max])
        return lam_max * ratio ** (np.arange(k) / (k - 1))

    return levels(n_lambda1), levels(n_lambda2)


def _pack(support):
    return np.packbits(support.ravel())


def _unpack(packed, shape):
    flat = np.unpackbits(packed, count=shape[0] * shape[1])
    return flat.astype(bool).reshape(shape)


def _check_fold_columns(x_train):
    col_sq = np.einsum("ij,ij->j", x_train, x_train)
    dead = np.flatnonzero(col_sq == 0)
    if dead.size:
        raise ValueError(
            f"predictor column {dead[0]} is identically zero within a training fold"
        )


def _fold_pass(x, y, c, frozen, train, test, cells, tol, max_sweeps, max_inner):
    """Fit every penalty cell on one training fold with warm starts and
    score each cell's refit on the held-out samples.

    Returns (errors, packed_supports, converged) where errors has shape
    (n_cells, Q) holding per-response squared prediction error.
    """
    x_tr, y_tr = x[train], y[train]
    x_te, y_te = x[test], y[test]
    _check_fold_columns(x_tr)
    errors = np.empty((len(cells), y.shape[1]))
    packed = []
    converged = []
    b_prev = None
    for i, (lam1, lam2) in enumerate(cells):
        b, _, conv, _ = _solve(
            x_tr, y_tr, c, frozen, lam1, lam2, tol, max_sweeps, max_inner, b0=b_prev
        )
        support = b != 0
        refit = ols_refit(x_tr, y_tr, support)
        resid = y_te - x_te @ refit
        errors[i] = (resid * resid).sum(axis=0)
        packed.append(_pack(support))
        converged.append(conv)
        b_prev = b
    return errors, packed, converged


@dataclass(frozen=True)
class CVScore:
    """Cross-validation outcome for a single penalty setting."""

    score: float
    per_response: np.ndarray
    fold_supports: tuple
    all_converged: bool


def cv_score(problem, params, folds=None, n_folds=10, seed=0, n_jobs=1):
    """Cross-validation prediction error for one penalty setting.

    Each fold is fit on its training part, the selected support is refit
    by least squares, and squared prediction error is accumulated on the
    held-out part. The score sums over folds and responses.
    """
    validate_problem(problem)
    if folds is None:
        folds = assign_folds(problem.n, n_folds, seed)
    cells = [(params.lambda1, params.lambda2)]
    results = Parallel(n_jobs=n_jobs)(
        delayed(_fold_pass)(
            problem.x,
            problem.y,
            problem.c,
            problem.frozen,
            folds.train_indices(i),
            folds.test_indices(i),
            cells,
            params.tol,
            params.max_sweeps,
            params.max_inner,
        )
        for i in range(folds.n_folds)
    )
    shape = (problem.p, problem.q)
    per_response = np.zeros(problem.q)
    supports = []
    all_conv = True
    for errors, packed, conv in results:
        per_response += errors[0]
        supports.append(_unpack(packed[0], shape))
        all_conv &= conv[0]
    return CVScore(
        score=float(per_response.sum()),
        per_response=per_response,
        fold_supports=tuple(supports),
        all_converged=all_conv,
    )


@dataclass(frozen=True)
class TuningResult:
    """Outcome of a penalty search.

    lambda1 is a float for grid searches and a (Q,) array when each
    response was tuned separately. grid lists the evaluated cells in
    fit order and scores aligns with it; for per-response searches the
    scores matrix has one column per response. fold_supports holds the
    per-fold supports at the chosen cell (cross-validation only).
    """

    method: str
    lambda1: object
    lambda2: float
    score: float
    grid: tuple
    scores: np.ndarray
    report: SolveReport
    support: np.ndarray
    vote_support: np.ndarray = None
    fold_supports: tuple = None
    vote_threshold: int = None
    all_converged: bool = True


def _make_cells(problem, lambda1_values, lambda2_values):
    if lambda1_values is None or lambda2_values is None:
        l1_default, l2_default = default_grid(problem)
        if lambda1_values is None:
            lambda1_values = l1_default
        if lambda2_values is None:
            lambda2_values = l2_default
    l1 = np.sort(np.asarray(lambda1_values, dtype=np.float64).ravel())[::-1]
    l2 = np.sort(np.asarray(lambda2_values, dtype=np.float64).ravel())[::-1]
    if l1.size == 0 or l2.size == 0:
        raise ValueError("penalty grids must be non-empty")
    if np.any(l1 < 0) or np.any(l2 < 0):
        raise ValueError("penalty values must be non-negative")
    return [(float(a), float(b)) for a in l1 for b in l2]


def _best_cell(scores, cells):
    """Index of the lowest score; ties go to the larger lambda1 + lambda2."""
    return min(
        range(len(cells)),
        key=lambda i: (scores[i], -(cells[i][0] + cells[i][1])),
    )


def _warn_unconverged(flags):
    bad = sum(1 for f in flags if not f)
    if bad:
        warnings.warn(
            f"{bad} of {len(flags)} solver runs stopped at the sweep cap "
            "before converging",
            stacklevel=3,
        )


def grid_search(
    problem,
    lambda1_values=None,
    lambda2_values=None,
    method="cv",
    n_folds=10,
    vote_threshold=None,
    seed=0,
    n_jobs=1,
    tol=1e-6,
    max_sweeps=500,
    max_inner=10000,
):
    """Search a (lambda1, lambda2) grid by cross-validation or BIC.

    Cells are visited from the largest penalties downward with warm
    starts. method="cv" scores each cell by refit prediction error over
    `n_folds` folds and also reports the majority-vote support at the
    winning cell; method="bic" scores full-data fits. Ties in the score
    go to the heavier penalty. The reported fit is a fresh full-data
    solve at the winning cell.

    Returns
    -------
    TuningResult
    """
    validate_problem(problem)
    if method not in ("cv", "bic"):
        raise ValueError(f"unknown method {method!r}")
    cells = _make_cells(problem, lambda1_values, lambda2_values)
    shape = (problem.p, problem.q)
    fold_supports = None
    vote = None
    if method == "cv":
        folds = assign_folds(problem.n, n_folds, seed)
        results = Parallel(n_jobs=n_jobs)(
            delayed(_fold_pass)(
                problem.x,
                problem.y,
                problem.c,
                problem.frozen,
                folds.train_indices(i),
                folds.test_indices(i),
                cells,
                tol,
                max_sweeps,
                max_inner,
            )
            for i in range(folds.n_folds)
        )
        scores = np.zeros(len(cells))
        conv_flags = []
        for errors, _, conv in results:
            scores += errors.sum(axis=1)
            conv_flags.extend(conv)
        best = _best_cell(scores, cells)
        fold_supports = tuple(_unpack(packed[best], shape) for _, packed, _ in results)
    else:
        _warn_if_correlated(problem.x, stacklevel=2)
        col_sq = np.einsum("ij,ij->j", problem.x, problem.x)
        scores = np.empty(len(cells))
        conv_flags = []
        b_prev = None
        for i, (lam1, lam2) in enumerate(cells):
            b, _, conv, _ = _solve(
                problem.x,
                problem.y,
                problem.c,
                problem.frozen,
                lam1,
                lam2,
                tol,
                max_sweeps,
                max_inner,
                b0=b_prev,
            )
            rss = ((problem.y - problem.x @ b) ** 2).sum(axis=0)
            if np.any(rss == 0):
                # interpolating fit; flag the cell rather than abort
                scores[i] = np.inf
            else:
                bl = lasso_intermediate(problem, b, lam1)
                df = _df_by_response(problem.c, col_sq, b, bl, lam2)
                scores[i] = problem.n * np.log(rss).sum() + np.log(problem.n) * df.sum()
            conv_flags.append(conv)
            b_prev = b
        if not np.isfinite(scores).any():
            raise RuntimeError("every grid cell interpolates; BIC cannot rank them")
        best = _best_cell(scores, cells)
    lam1, lam2 = cells[best]
    report = fit(
        problem,
        PenaltyParams(lam1, lam2, tol=tol, max_sweeps=max_sweeps, max_inner=max_inner),
    )
    conv_flags.append(report.converged)
    _warn_unconverged(conv_flags)
    support = report.b.support()
    if method == "cv":
        if vote_threshold is None:
            vote_threshold = n_folds // 2
        vote = cv_vote(fold_supports, support, vote_threshold)
    return TuningResult(
        method=method,
        lambda1=lam1,
        lambda2=lam2,
        score=float(scores[best]),
        grid=tuple(cells),
        scores=scores,
        report=report,
        support=support,
        vote_support=vote,
        fold_supports=fold_supports,
        vote_threshold=vote_threshold if method == "cv" else None,
        all_converged=all(conv_flags),
    )


def bic_search(problem, lambda1_values=None, lambda2_values=None, **kwargs):
    """Grid search scored by BIC; see `grid_search`."""
    return grid_search(
        problem, lambda1_values, lambda2_values, method="bic", **kwargs
    )


def joint_search(problem, lambda1_values=None, **kwargs):
    """l1-only grid search (lambda2 pinned at zero), one shared lambda1
    across all responses; see `grid_search`."""
    return grid_search(problem, lambda1_values, np.array([0.0]), **kwargs)


def _sep_levels(problem, n_levels, ratio):
    """Per-response l1 paths sharing log-spaced ratios: level i assigns
    response q the value anchor_q * ratio ** (i / (n_levels - 1))."""
    u = np.abs(problem.x.T @ problem.y)
    u = np.where(problem.c == 1, u, 0.0)
    anchors = u.max(axis=0)
    if np.any(anchors == 0):
        dead = int(np.flatnonzero(anchors == 0)[0])
        raise ValueError(
            f"response {dead} has no penalized signal; cannot anchor its path"
        )
    if n_levels == 1:
        ratios = np.array([1.0])
    else:
        ratios = ratio ** (np.arange(n_levels) / (n_levels - 1))
    return [anchors * r for r in ratios]


def _sep_objective(problem, b, lambda1_by_response):
    resid = problem.y - problem.x @ b
    l1 = (np.abs(problem.c * b) * lambda1_by_response).sum()
    return 0.5 * float((resid * resid).sum()) + float(l1)


def sep_search(
    problem,
    n_levels=10,
    ratio=0.01,
    method="cv",
    n_folds=10,
    vote_threshold=None,
    seed=0,
    n_jobs=1,
    tol=1e-6,
    max_sweeps=500,
    max_inner=10000,
):
    """Tune each response's l1 penalty separately (lambda2 is zero).

    With no row penalty the problem separates across responses, so one
    descending path of penalty levels is fit jointly and each response
    picks its own best level, by refit prediction error (method="cv") or
    BIC (method="bic"). The reported fit solves the full data once with
    the per-response winners.

    Returns
    -------
    TuningResult
        lambda1 is the (Q,) vector of selected values; scores has shape
        (n_levels, Q).
    """
    validate_problem(problem)
    if method not in ("cv", "bic"):
        raise ValueError(f"unknown method {method!r}")
    levels = _sep_levels(problem, n_levels, ratio)
    cells = [(lam1, 0.0) for lam1 in levels]
    shape = (problem.p, problem.q)
    n_resp = problem.q
    fold_supports = None
    vote = None
    if method == "cv":
        folds = assign_folds(problem.n, n_folds, seed)
        results = Parallel(n_jobs=n_jobs)(
            delayed(_fold_pass)(
                problem.x,
                problem.y,
                problem.c,
                problem.frozen,
                folds.train_indices(i),
                folds.test_indices(i),
                cells,
                tol,
                max_sweeps,
                max_inner,
            )
            for i in range(folds.n_folds)
        )
        scores = np.zeros((len(cells), n_resp))
        conv_flags = []
        for errors, _, conv in results:
            scores += errors
            conv_flags.extend(conv)
    else:
        scores = np.empty((len(cells), n_resp))
        conv_flags = []
        b_prev = None
        for i, (lam1, _) in enumerate(cells):
            b, _, conv, _ = _solve(
                problem.x,
                problem.y,
                problem.c,
                problem.frozen,
                lam1,
                0.0,
                tol,
                max_sweeps,
                max_inner,
                b0=b_prev,
            )
            rss = ((problem.y - problem.x @ b) ** 2).sum(axis=0)
            # per-response lasso BIC: df is the selected-predictor count
            df = (b != 0).sum(axis=0)
            scores[i] = np.where(
                rss > 0,
                problem.n * np.log(np.where(rss > 0, rss, 1.0))
                + np.log(problem.n) * df,
                np.inf,
            )
            conv_flags.append(conv)
            b_prev = b
        dead_mask = ~np.isfinite(scores).any(axis=0)
        if dead_mask.any():
            dead = int(np.flatnonzero(dead_mask)[0])
            raise RuntimeError(
                f"every penalty level interpolates response {dead}; "
                "BIC cannot rank them"
            )
    # levels run from the heaviest penalty down, so the first minimum
    # realizes the heavier-penalty tie-break per response
    best_level = scores.argmin(axis=0)
    chosen = np.array([levels[best_level[j]][j] for j in range(n_resp)])
    b_final, sweeps_final, conv_final, delta_final = _solve(
        problem.x,
        problem.y,
        problem.c,
        problem.frozen,
        chosen,
        0.0,
        tol,
        max_sweeps,
        max_inner,
    )
    conv_flags.append(conv_final)
    _warn_unconverged(conv_flags)
    coef = CoefficientMatrix(b_final)
    report = SolveReport(
        b=coef,
        sweeps_used=sweeps_final,
        converged=conv_final,
        final_max_delta=delta_final,
        objective_value=_sep_objective(problem, b_final, chosen),
    )
    support = coef.support()
    if method == "cv":
        # assemble each fold's support column-wise at the level its
        # response selected, then vote across folds
        mixed = []
        for _, packed, _ in results:
            unpacked = {}
            s = np.zeros(shape, dtype=bool)
            for j in range(n_resp):
                lvl = int(best_level[j])
                if lvl not in unpacked:
                    unpacked[lvl] = _unpack(packed[lvl], shape)
                s[:, j] = unpacked[lvl][:, j]
            mixed.append(s)
        fold_supports = tuple(mixed)
        if vote_threshold is None:
            vote_threshold = n_folds // 2
        vote = cv_vote(fold_supports, support, vote_threshold)
    per_response_best = scores[best_level, np.arange(n_resp)]
    return TuningResult(
        method=method,
        lambda1=chosen,
        lambda2=0.0,
        score=float(per_response_best.sum()),
        grid=tuple(cells),
        scores=scores,
        report=report,
        support=support,
        vote_support=vote,
        fold_supports=fold_supports,
        vote_threshold=vote_threshold if method == "cv" else None,
        all_converged=all(conv_flags),
    )
