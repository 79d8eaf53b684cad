"""Shared data model: regression problems, penalty settings, coefficient
matrices, and column standardization."""

from dataclasses import dataclass, field

import numpy as np


def _as_matrix(a, name):
    """Copy `a` into a read-only float64 2-D array."""
    out = np.array(a, dtype=np.float64, order="C")
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got {out.ndim}-D")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class RegressionProblem:
    """A multivariate regression instance.

    Parameters
    ----------
    y : (N, Q) response matrix.
    x : (N, P) predictor matrix.
    c : (P, Q) 0/1 penalty indicator; c[p, q] == 0 means the coefficient
        for predictor p on response q is never penalized. Defaults to
        all ones (everything penalized).
    frozen : (P, Q) 0/1 mask; entries set to 1 are held at exactly zero
        and never updated. Defaults to all zeros.
    """

    y: np.ndarray
    x: np.ndarray
    c: np.ndarray = None
    frozen: np.ndarray = None

    def __post_init__(self):
        y = _as_matrix(self.y, "y")
        x = _as_matrix(self.x, "x")
        p, q = x.shape[1], y.shape[1]
        c = np.ones((p, q)) if self.c is None else np.asarray(self.c, dtype=np.float64)
        frozen = np.zeros((p, q)) if self.frozen is None else np.asarray(self.frozen, dtype=np.float64)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "c", _as_matrix(c, "c"))
        object.__setattr__(self, "frozen", _as_matrix(frozen, "frozen"))

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def p(self):
        return self.x.shape[1]

    @property
    def q(self):
        return self.y.shape[1]


@dataclass(frozen=True)
class PenaltyParams:
    """Penalty weights plus solver convergence controls.

    lambda1 weights the entrywise l1 penalty, lambda2 the row-wise l2
    penalty; both act only on entries with c == 1.
    """

    lambda1: float
    lambda2: float
    tol: float = 1e-6
    max_sweeps: int = 500
    max_inner: int = 10000

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("penalty weights must be non-negative")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_sweeps < 1 or self.max_inner < 1:
            raise ValueError("sweep caps must be positive integers")


@dataclass(frozen=True)
class CoefficientMatrix:
    """A (P, Q) coefficient estimate with support-query helpers."""

    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "b", _as_matrix(self.b, "b"))

    def support(self):
        """Boolean (P, Q) matrix of nonzero entries."""
        return self.b != 0

    def n_nonzero(self):
        return int(np.count_nonzero(self.b))

    def nonzero_penalized_rows(self, c):
        """Boolean (P,) vector: rows with a nonzero penalized entry."""
        c = np.asarray(c)
        return np.any((self.b != 0) & (c == 1), axis=1)


@dataclass(frozen=True)
class StandardizationRecord:
    """Column centers and scales recorded by `standardize`.

    Scales are strictly positive; `destandardize` inverts the transform.
    """

    center: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64).ravel()
        scale = np.asarray(self.scale, dtype=np.float64).ravel()
        if center.shape != scale.shape:
            raise ValueError("center and scale must have equal length")
        if np.any(scale <= 0):
            raise ValueError("scales must be strictly positive")
        center.setflags(write=False)
        scale.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "scale", scale)


def validate_problem(problem):
    """Check all RegressionProblem invariants, raising ValueError with the
    offending index on the first violation."""
    y, x, c, frozen = problem.y, problem.x, problem.c, problem.frozen
    if y.shape[0] != x.shape[0]:
        raise ValueError(
            f"y has {y.shape[0]} rows but x has {x.shape[0]}; sample counts must agree"
        )
    if y.shape[0] < 1 or x.shape[1] < 1 or y.shape[1] < 1:
        raise ValueError("need N >= 1, P >= 1, Q >= 1")
    p, q = x.shape[1], y.shape[1]
    for name, m in (("c", c), ("frozen", frozen)):
        if m.shape != (p, q):
            raise ValueError(f"{name} has shape {m.shape}, expected {(p, q)}")
        bad = np.argwhere((m != 0) & (m != 1))
        if bad.size:
            i, j = bad[0]
            raise ValueError(f"{name}[{i},{j}] = {m[i, j]} is not in {{0,1}}")
    conflict = np.argwhere((c == 0) & (frozen == 1))
    if conflict.size:
        i, j = conflict[0]
        raise ValueError(
            f"entry ({i},{j}) is both unpenalized (c=0) and frozen; masks conflict"
        )
    norms = np.einsum("ij,ij->j", x, x)
    dead = np.flatnonzero(norms == 0)
    if dead.size:
        raise ValueError(f"predictor column {dead[0]} has zero l2 norm")


def standardize(matrix):
    """Center each column to mean zero and scale to sample standard
    deviation one (denominator N - 1).

    Returns the transformed matrix and a StandardizationRecord; a constant
    column is an error, as is a single-row matrix (its sample standard
    deviation is undefined).

    Returns
    -------
    (out, record) : ((N, K) ndarray, StandardizationRecord)
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if m.shape[0] < 2:
        raise ValueError("need at least 2 rows to standardize")
    center = m.mean(axis=0)
    scale = m.std(axis=0, ddof=1)
    flat = np.flatnonzero(scale == 0)
    if flat.size:
        raise ValueError(f"column {flat[0]} is constant; cannot standardize")
    return (m - center) / scale, StandardizationRecord(center, scale)


def destandardize(matrix, record):
    """Invert `standardize`: multiply columns by scale and add back centers."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.shape[1] != record.scale.shape[0]:
        raise ValueError(
            f"matrix has {m.shape[1]} columns, record covers {record.scale.shape[0]}"
        )
    return m * record.scale + record.center


def penalty_value(b, c, lambda1, lambda2):
    """The combined penalty: lambda1 * sum |c*b| + lambda2 * sum_p ||c_p * b_p||_2."""
    cb = c * b
    value = 0.0
    if lambda1 > 0:
        value += lambda1 * np.abs(cb).sum()
    if lambda2 > 0:
        value += lambda2 * np.sqrt((cb * cb).sum(axis=1)).sum()
    return float(value)


def objective(problem, b, params):
    """Penalized least-squares criterion.

    0.5 * ||Y - XB||_F^2 + lambda1 * sum_p ||C_p . B_p||_1
                         + lambda2 * sum_p ||C_p . B_p||_2
    """
    bm = b.b if isinstance(b, CoefficientMatrix) else np.asarray(b, dtype=np.float64)
    if bm.shape != (problem.p, problem.q):
        raise ValueError(f"b has shape {bm.shape}, expected {(problem.p, problem.q)}")
    resid = problem.y - problem.x @ bm
    return 0.5 * float((resid * resid).sum()) + penalty_value(
        bm, problem.c, params.lambda1, params.lambda2
    )
