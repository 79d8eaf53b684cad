"""Reference implementations the tests compare against.

Everything here is written independently of the package internals: an
accelerated proximal-gradient solver for the full penalized objective,
and a stationarity (KKT) checker that certifies a candidate minimizer
directly from the optimality conditions.
"""

import numpy as np


def penalty_value(b, c, lam1, lam2):
    cb = np.where(c == 1, b, 0.0)
    return lam1 * np.abs(cb).sum() + lam2 * np.sqrt((cb * cb).sum(axis=1)).sum()


def objective_value(x, y, b, c, lam1, lam2):
    r = y - x @ b
    return 0.5 * (r * r).sum() + penalty_value(b, c, lam1, lam2)


def prox_step(v, c, frozen, step, lam1, lam2):
    """Proximal map of the combined penalty (plus the frozen-at-zero
    constraint): entrywise soft threshold, then rowwise group shrink."""
    out = np.where(
        c == 1, np.sign(v) * np.maximum(np.abs(v) - step * lam1, 0.0), v
    )
    out = np.where(frozen == 1, 0.0, out)
    if lam2 > 0:
        masked = np.where(c == 1, out, 0.0)
        norms = np.sqrt((masked * masked).sum(axis=1))
        factor = np.zeros_like(norms)
        nz = norms > 0
        factor[nz] = np.maximum(0.0, 1.0 - step * lam2 / norms[nz])
        out = np.where(c == 1, out * factor[:, None], out)
    return out


def fista(x, y, c, frozen, lam1, lam2, max_iter=100000, rel_tol=1e-14, patience=30):
    """Accelerated proximal gradient with function restarts.

    Runs until the objective stalls for `patience` consecutive
    iterations (relative improvement below rel_tol) or max_iter.
    Returns (b, objective).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    p, q = x.shape[1], y.shape[1]
    step = 1.0 / np.linalg.norm(x, 2) ** 2
    b = np.zeros((p, q))
    z = b.copy()
    theta = 1.0
    best = objective_value(x, y, b, c, lam1, lam2)
    stalled = 0
    for _ in range(max_iter):
        grad = x.T @ (x @ z - y)
        b_new = prox_step(z - step * grad, c, frozen, step, lam1, lam2)
        cur = objective_value(x, y, b_new, c, lam1, lam2)
        if cur > best:
            # restart the momentum from the last good iterate
            theta = 1.0
            z = b.copy()
            continue
        theta_new = (1.0 + np.sqrt(1.0 + 4.0 * theta * theta)) / 2.0
        z = b_new + ((theta - 1.0) / theta_new) * (b_new - b)
        b = b_new
        theta = theta_new
        if best - cur <= rel_tol * max(1.0, abs(best)):
            stalled += 1
            if stalled >= patience:
                best = min(best, cur)
                break
        else:
            stalled = 0
        best = min(best, cur)
    return b, best


def kkt_violation(x, y, b, c, frozen, lam1, lam2):
    """Largest violation of the first-order optimality conditions at b.

    Zero (up to numerical error) certifies b as the minimizer of the
    penalized objective.
    """
    grad = x.T @ (x @ b - y)
    worst = 0.0
    for p in range(b.shape[0]):
        row, g = b[p], grad[p]
        pen = (c[p] == 1) & (frozen[p] == 0)
        free = (c[p] == 0) & (frozen[p] == 0)
        if free.any():
            worst = max(worst, np.abs(g[free]).max())
        if not pen.any():
            continue
        m = np.linalg.norm(row[pen])
        if m > 0:
            sub = g + lam2 * np.where(pen, row, 0.0) / m
            nz = pen & (row != 0)
            if nz.any():
                worst = max(worst, np.abs(sub[nz] + lam1 * np.sign(row[nz])).max())
            zz = pen & (row == 0)
            if zz.any():
                worst = max(worst, max(0.0, np.abs(sub[zz]).max() - lam1))
        else:
            # an all-zero penalized row is optimal iff the soft-thresholded
            # gradient fits inside the group-penalty ball
            soft = np.sign(g[pen]) * np.maximum(np.abs(g[pen]) - lam1, 0.0)
            worst = max(worst, max(0.0, np.linalg.norm(soft) - lam2))
    return worst


def random_problem(rng, n=20, p=6, q=5, density=0.4, noise=0.5, mixed_c=True,
                   with_frozen=False):
    """Small random instance with a sparse planted coefficient matrix."""
    x = rng.standard_normal((n, p))
    b = np.where(rng.random((p, q)) < density, rng.uniform(-3, 3, (p, q)), 0.0)
    y = x @ b + noise * rng.standard_normal((n, q))
    if mixed_c:
        c = (rng.random((p, q)) < 0.85).astype(float)
    else:
        c = np.ones((p, q))
    frozen = np.zeros((p, q))
    if with_frozen:
        frozen = ((rng.random((p, q)) < 0.1) & (c == 1)).astype(float)
    return x, y, c, frozen


def row_objective(x_col, r_plus, row, c_row, lam1, lam2):
    """Objective restricted to one coefficient row, everything else fixed.

    r_plus is the residual with that row's contribution added back, so
    the row-restricted residual is r_plus - outer(x_col, row).
    """
    resid = r_plus - np.outer(x_col, row)
    masked = np.where(c_row == 1, row, 0.0)
    return (
        0.5 * (resid * resid).sum()
        + lam1 * np.abs(masked).sum()
        + lam2 * np.sqrt((masked * masked).sum())
    )


def row_grid_search(x_col, r_plus, c_row, frozen_row, lam1, lam2, span, rounds=10):
    """Minimize the single-row objective by an iteratively refined dense
    grid, one axis at a time. Slow and simple on purpose."""
    q = r_plus.shape[1]
    row = np.zeros(q)
    width = float(span)
    for _ in range(rounds):
        for _ in range(60):
            moved = 0.0
            for j in range(q):
                if frozen_row[j] == 1:
                    continue
                candidates = row[j] + np.linspace(-width, width, 81)
                best_val, best_c = None, row[j]
                for cand in candidates:
                    trial = row.copy()
                    trial[j] = cand
                    val = row_objective(x_col, r_plus, trial, c_row, lam1, lam2)
                    if best_val is None or val < best_val:
                        best_val, best_c = val, cand
                moved = max(moved, abs(best_c - row[j]))
                row[j] = best_c
            # exact zero is a kink of the penalty; always offer it
            trial = np.where(c_row == 1, 0.0, row)
            if row_objective(x_col, r_plus, trial, c_row, lam1, lam2) <= \
                    row_objective(x_col, r_plus, row, c_row, lam1, lam2):
                row = trial
            if moved < width / 400.0:
                break
        width /= 8.0
    return row
