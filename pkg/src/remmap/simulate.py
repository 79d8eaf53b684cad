"""Synthetic data generation for sparse bipartite regulatory networks,
plus support-recovery scoring and a replicated study driver.

Predictors follow a zero-mean Gaussian with either power-decay or block
correlation; a sparse adjacency matrix with unit diagonal defines which
predictor drives which response; responses are linear in the predictors
plus autocorrelated Gaussian noise calibrated to a target signal-to-noise
ratio.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from remmap.core import RegressionProblem, standardize
from remmap.tuning import default_grid, grid_search, sep_search

# block-size proportions for 23 predictor blocks, roughly matching human
# chromosome sizes; scaled to P and overridable per scenario
DEFAULT_BLOCK_PROPORTIONS = (
    249, 243, 198, 191, 182, 171, 159, 146, 141, 136, 135, 133,
    114, 107, 102, 90, 83, 80, 59, 64, 47, 51, 156,
)

STUDY_METHODS = (
    "remMap.cv",
    "remMap.cv.vote",
    "remMap.bic",
    "joint.cv",
    "joint.cv.vote",
    "joint.bic",
    "sep.cv",
    "sep.cv.vote",
    "sep.bic",
)


@dataclass(frozen=True)
class ArCovariance:
    """Power-decay predictor correlation: entry (p, p') = rho_x ** |p - p'|."""

    rho_x: float = 0.0

    def __post_init__(self):
        if not -1 < self.rho_x < 1:
            raise ValueError(f"rho_x must lie in (-1, 1), got {self.rho_x}")


@dataclass(frozen=True)
class BlockCovariance:
    """Blocked predictor correlation.

    Within block i the correlation decays as rho_wb ** (0.5 * |j - l|);
    every pair of distinct blocks (i, k) shares one constant rho_ik with
    random sign and magnitude drawn from {rho_bb, rho_bb**2, ...} up to
    the block count. block_sizes=None scales DEFAULT_BLOCK_PROPORTIONS
    to P.
    """

    rho_wb: float = 0.9
    rho_bb: float = 0.25
    block_sizes: tuple = None

    def __post_init__(self):
        if not -1 < self.rho_wb < 1:
            raise ValueError(f"rho_wb must lie in (-1, 1), got {self.rho_wb}")
        if not 0 <= self.rho_bb < 1:
            raise ValueError(f"rho_bb must lie in [0, 1), got {self.rho_bb}")
        if self.block_sizes is not None:
            sizes = tuple(int(s) for s in self.block_sizes)
            if any(s < 1 for s in sizes):
                raise ValueError("block sizes must be positive")
            object.__setattr__(self, "block_sizes", sizes)


@dataclass(frozen=True)
class HubTopology:
    """A few hub predictors, each driving many responses."""

    n_hubs: int
    degree_range: tuple
    target_trans_edges: int

    def groups(self):
        lo, hi = self.degree_range
        return [(self.n_hubs, int(lo), int(hi))]


@dataclass(frozen=True)
class UniformTopology:
    """Many predictors with a handful of driven responses each."""

    n_trans_predictors: int
    degree_range: tuple
    target_trans_edges: int

    def groups(self):
        lo, hi = self.degree_range
        return [(self.n_trans_predictors, int(lo), int(hi))]


@dataclass(frozen=True)
class MixedTopology:
    """Large hubs, small hubs, and singleton regulators side by side.

    Each field is a (count, degree_low, degree_high) triple.
    """

    large_hubs: tuple
    small_hubs: tuple
    singletons: tuple
    target_trans_edges: int

    def groups(self):
        return [
            (int(c), int(lo), int(hi))
            for c, lo, hi in (self.large_hubs, self.small_hubs, self.singletons)
        ]


@dataclass(frozen=True)
class SimScenario:
    """Everything needed to draw one synthetic data set family.

    n, p, q are the sample / predictor / response counts (p must equal
    q); snr is the target average signal-to-noise ratio; rho_eps is the
    power-decay parameter of the residual correlation. All randomness
    derives from (seed, replicate index).
    """

    n: int
    p: int
    q: int
    covariance: object
    topology: object
    snr: float
    rho_eps: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.p != self.q:
            raise ValueError(f"p and q must be equal, got p={self.p}, q={self.q}")
        if self.n < 2:
            raise ValueError("need at least 2 samples")
        if self.p < 1:
            raise ValueError("need at least 1 predictor")
        if self.snr <= 0:
            raise ValueError("snr must be positive")
        if not -1 < self.rho_eps < 1:
            raise ValueError(f"rho_eps must lie in (-1, 1), got {self.rho_eps}")
        if int(self.seed) < 0:
            raise ValueError("seed must be a non-negative integer")


@dataclass(frozen=True)
class GroundTruth:
    """The generating network: adjacency, coefficients, and the derived
    trans-edge / trans-predictor sets (entries off the unit diagonal)."""

    adjacency: np.ndarray
    coefficients: np.ndarray
    trans_edge_set: tuple
    trans_predictor_set: tuple

    @classmethod
    def from_parts(cls, adjacency, coefficients, c):
        adjacency = np.asarray(adjacency, dtype=np.int8)
        coefficients = np.asarray(coefficients, dtype=np.float64)
        trans = (adjacency == 1) & (np.asarray(c) == 1)
        edges = tuple((int(a), int(b)) for a, b in np.argwhere(trans))
        preds = tuple(int(v) for v in np.flatnonzero(trans.any(axis=1)))
        adjacency.setflags(write=False)
        coefficients.setflags(write=False)
        return cls(adjacency, coefficients, edges, preds)

    def __post_init__(self):
        adj, coef = self.adjacency, self.coefficients
        if adj.shape != coef.shape:
            raise ValueError("adjacency and coefficients must share a shape")
        if not np.all(np.diagonal(adj) == 1):
            raise ValueError("adjacency diagonal must be all ones")
        if np.any(coef[adj == 0] != 0):
            raise ValueError("coefficients must vanish off the adjacency")
        mags = np.abs(coef[adj == 1])
        if mags.size and (mags.min() < 1 or mags.max() > 5):
            raise ValueError("edge coefficient magnitudes must lie in [1, 5]")


@dataclass(frozen=True)
class ErrorMetrics:
    """Support-recovery error counts for the penalized (trans) entries."""

    fp: int
    fn: int
    tf: int
    fpp: int
    fnp: int

    def __post_init__(self):
        vals = (self.fp, self.fn, self.tf, self.fpp, self.fnp)
        if any(v < 0 for v in vals):
            raise ValueError("error counts must be non-negative")
        if self.tf != self.fp + self.fn:
            raise ValueError("tf must equal fp + fn")

    def as_array(self):
        return np.array([self.fp, self.fn, self.tf, self.fpp, self.fnp])


def _replicate_rng(scenario, replicate):
    """Independent generator stream for one replicate of one scenario."""
    return np.random.default_rng(
        np.random.SeedSequence(int(scenario.seed), spawn_key=(int(replicate),))
    )


def scale_block_sizes(p, proportions=DEFAULT_BLOCK_PROPORTIONS):
    """Split p predictors into blocks proportional to `proportions`.

    Sizes are all at least 1 and sum to p exactly; leftover counts go to
    the blocks with the largest fractional parts.
    """
    props = np.asarray(proportions, dtype=np.float64)
    k = props.size
    if p < k:
        raise ValueError(f"cannot split {p} predictors into {k} blocks")
    raw = props / props.sum() * p
    sizes = np.floor(raw).astype(np.int64)
    order = np.argsort(-(raw - np.floor(raw)), kind="stable")
    sizes[order[: p - sizes.sum()]] += 1
    # guarantee every block is populated
    for i in np.flatnonzero(sizes == 0):
        donor = int(np.argmax(sizes))
        sizes[donor] -= 1
        sizes[i] = 1
    return tuple(int(s) for s in sizes)


def make_covariance(scenario, rng=None):
    """Predictor covariance matrix for a scenario.

    Power-decay designs are deterministic. Block designs draw random
    between-block levels, so they consume from `rng` (defaulting to the
    replicate-0 stream of the scenario seed); when the drawn matrix is
    not positive definite its eigenvalues are clipped at 1e-6 and the
    result is rescaled to unit diagonal, with a warning.
    """
    spec = scenario.covariance
    p = scenario.p
    if isinstance(spec, ArCovariance):
        idx = np.arange(p)
        return spec.rho_x ** np.abs(idx[:, None] - idx[None, :])
    if not isinstance(spec, BlockCovariance):
        raise ValueError(f"unknown covariance spec {type(spec).__name__}")
    if rng is None:
        rng = _replicate_rng(scenario, 0)
    sizes = spec.block_sizes
    if sizes is None:
        sizes = scale_block_sizes(p)
    elif sum(sizes) != p:
        raise ValueError(f"block sizes sum to {sum(sizes)} but p = {p}")
    k = len(sizes)
    # one signed constant per block pair, magnitudes rho_bb ** {1..k}
    n_pairs = k * (k - 1) // 2
    signs = rng.integers(0, 2, size=n_pairs) * 2 - 1
    expo = rng.integers(1, k + 1, size=n_pairs)
    levels = np.zeros((k, k))
    iu = np.triu_indices(k, 1)
    levels[iu] = signs * spec.rho_bb ** expo
    levels += levels.T
    block_id = np.repeat(np.arange(k), sizes)
    sigma = levels[block_id][:, block_id]
    offsets = np.concatenate(([0], np.cumsum(sizes)))
    for i in range(k):
        local = np.arange(sizes[i])
        gaps = np.abs(local[:, None] - local[None, :])
        sl = slice(offsets[i], offsets[i + 1])
        sigma[sl, sl] = spec.rho_wb ** (0.5 * gaps)
    eigvals, eigvecs = np.linalg.eigh(sigma)
    if eigvals.min() < 1e-6:
        warnings.warn(
            "block covariance is not positive definite; eigenvalues clipped "
            "at 1e-6 and the matrix rescaled to unit diagonal",
            stacklevel=2,
        )
        sigma = (eigvecs * np.maximum(eigvals, 1e-6)) @ eigvecs.T
        d = 1.0 / np.sqrt(np.diagonal(sigma))
        sigma = sigma * d[:, None] * d[None, :]
        sigma = (sigma + sigma.T) / 2
    return sigma


def make_topology(scenario, rng=None):
    """Draw the 0/1 adjacency matrix for a scenario.

    The diagonal is all ones. Regulator identities are drawn without
    replacement, each regulator's degree is drawn from its group range,
    and the last regulator's degree is adjusted so the total off-diagonal
    edge count hits the target exactly (redrawing until that adjusted
    degree also lies in its stated range).
    """
    topology = scenario.topology
    if not hasattr(topology, "groups"):
        raise ValueError(f"unknown topology spec {type(topology).__name__}")
    if rng is None:
        rng = _replicate_rng(scenario, 0)
    groups = topology.groups()
    target = int(topology.target_trans_edges)
    p, q = scenario.p, scenario.q
    counts = [c for c, _, _ in groups]
    if any(c < 0 for c in counts):
        raise ValueError("group counts must be non-negative")
    n_regulators = sum(counts)
    if n_regulators > p:
        raise ValueError(f"{n_regulators} regulators exceed {p} predictors")
    lows = np.concatenate([[lo] * c for c, lo, _ in groups]).astype(np.int64) \
        if n_regulators else np.empty(0, dtype=np.int64)
    highs = np.concatenate([[hi] * c for c, _, hi in groups]).astype(np.int64) \
        if n_regulators else np.empty(0, dtype=np.int64)
    if np.any(lows > highs):
        raise ValueError("degree ranges must satisfy low <= high")
    if np.any(highs > q - 1):
        raise ValueError("a degree range exceeds the q - 1 available responses")
    if not lows.sum() <= target <= highs.sum():
        raise ValueError(
            f"target of {target} edges is outside the achievable range "
            f"[{lows.sum()}, {highs.sum()}]"
        )
    adjacency = np.eye(p, q, dtype=np.int8)
    if n_regulators == 0:
        return adjacency
    regulators = rng.choice(p, size=n_regulators, replace=False)
    for _ in range(1000):
        degrees = rng.integers(lows, highs + 1)
        degrees[-1] = target - degrees[:-1].sum()
        if lows[-1] <= degrees[-1] <= highs[-1]:
            break
    else:
        raise ValueError(
            "could not hit the edge target within the stated degree ranges"
        )
    for pred, deg in zip(regulators, degrees):
        pool = np.delete(np.arange(q), pred)
        hits = rng.choice(pool, size=int(deg), replace=False)
        adjacency[pred, hits] = 1
    return adjacency


def calibrate_noise(coefficients, covariance, snr):
    """Residual variance giving an average signal-to-noise ratio of `snr`.

    Per-response signal variance is the quadratic form b_q' Sigma b_q;
    the returned variance is the mean of those divided by snr.
    """
    b = np.asarray(coefficients, dtype=np.float64)
    if not np.any(b):
        raise ValueError("all coefficients are zero; snr is undefined")
    if snr <= 0:
        raise ValueError("snr must be positive")
    signal = (b * (np.asarray(covariance) @ b)).sum(axis=0)
    return float(signal.mean() / snr)


def _gaussian_factor(sigma):
    """Matrix F with F F' = sigma, for row-wise sampling z @ F'."""
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        eigvals, eigvecs = np.linalg.eigh(sigma)
        return eigvecs * np.sqrt(np.maximum(eigvals, 0.0))


def generate_dataset(scenario, replicate=0):
    """Draw one standardized data set and its generating truth.

    The draw order is fixed (covariance, topology, coefficients,
    predictors, residuals), so outputs are bitwise reproducible from
    (scenario.seed, replicate). X and Y are column-standardized; the
    penalty indicator has zero diagonal and ones elsewhere.

    Returns
    -------
    (RegressionProblem, GroundTruth)
    """
    rng = _replicate_rng(scenario, replicate)
    sigma_x = make_covariance(scenario, rng)
    adjacency = make_topology(scenario, rng)
    mask = adjacency == 1
    n_edges = int(mask.sum())
    magnitudes = rng.uniform(1.0, 5.0, size=n_edges)
    signs = rng.integers(0, 2, size=n_edges) * 2 - 1
    coefficients = np.zeros(adjacency.shape)
    coefficients[mask] = magnitudes * signs
    x_raw = rng.standard_normal((scenario.n, scenario.p)) @ _gaussian_factor(sigma_x).T
    sigma2_eps = calibrate_noise(coefficients, sigma_x, scenario.snr)
    idx = np.arange(scenario.q)
    noise_corr = scenario.rho_eps ** np.abs(idx[:, None] - idx[None, :])
    noise = rng.standard_normal((scenario.n, scenario.q)) @ _gaussian_factor(
        noise_corr
    ).T * np.sqrt(sigma2_eps)
    y_raw = x_raw @ coefficients + noise
    x_std, _ = standardize(x_raw)
    y_std, _ = standardize(y_raw)
    c = np.ones(adjacency.shape) - np.eye(*adjacency.shape)
    problem = RegressionProblem(y=y_std, x=x_std, c=c)
    truth = GroundTruth.from_parts(adjacency, coefficients, c)
    return problem, truth


def score_support(estimated, truth, c):
    """Count support-recovery errors on the penalized entries.

    FP and FN count wrongly present / wrongly absent penalized entries.
    A regulator-level error is counted when a predictor with no true
    penalized edge gains an estimated one (FPP) or a predictor with true
    penalized edges loses all of them (FNP). `truth` may be a GroundTruth
    or a plain 0/1 adjacency matrix.
    """
    est = np.asarray(estimated) != 0
    adj = truth.adjacency if isinstance(truth, GroundTruth) else np.asarray(truth)
    adj = adj != 0
    c = np.asarray(c)
    if est.shape != adj.shape or c.shape != adj.shape:
        raise ValueError(
            f"shape mismatch: estimate {est.shape}, truth {adj.shape}, c {c.shape}"
        )
    trans = c == 1
    fp = int((est & ~adj & trans).sum())
    fn = int((~est & adj & trans).sum())
    est_trans = (est & trans).any(axis=1)
    true_trans = (adj & trans).any(axis=1)
    fpp = int((est_trans & ~true_trans).sum())
    fnp = int((true_trans & ~est_trans).sum())
    return ErrorMetrics(fp=fp, fn=fn, tf=fp + fn, fpp=fpp, fnp=fnp)


def _method_families(methods):
    """Group method names like 'remMap.cv.vote' by family and rule."""
    families = {}
    for name in methods:
        if name not in STUDY_METHODS:
            raise ValueError(f"unknown method {name!r}; choose from {STUDY_METHODS}")
        family, rule = name.split(".", 1)
        families.setdefault(family, set()).add(rule)
    return families


def _replicate_metrics(
    scenario,
    replicate,
    methods,
    n_lambda1,
    n_lambda2,
    grid_ratio,
    n_folds,
    vote_threshold,
    tol,
    max_sweeps,
    max_inner,
):
    problem, truth = generate_dataset(scenario, replicate=replicate)
    fold_seed = np.random.SeedSequence(
        int(scenario.seed), spawn_key=(int(replicate), 1)
    )
    solver_opts = dict(tol=tol, max_sweeps=max_sweeps, max_inner=max_inner)
    out = {}
    for family, rules in sorted(_method_families(methods).items()):
        searches = []
        if rules & {"cv", "cv.vote"}:
            searches.append("cv")
        if "bic" in rules:
            searches.append("bic")
        for search in searches:
            if family == "sep":
                result = sep_search(
                    problem,
                    n_levels=n_lambda1,
                    ratio=grid_ratio,
                    method=search,
                    n_folds=n_folds,
                    vote_threshold=vote_threshold,
                    seed=fold_seed,
                    **solver_opts,
                )
            else:
                l1, l2 = default_grid(problem, n_lambda1, n_lambda2, grid_ratio)
                if family == "joint":
                    l2 = np.array([0.0])
                result = grid_search(
                    problem,
                    l1,
                    l2,
                    method=search,
                    n_folds=n_folds,
                    vote_threshold=vote_threshold,
                    seed=fold_seed,
                    **solver_opts,
                )
            if search == "bic":
                out[f"{family}.bic"] = score_support(result.support, truth, problem.c)
            else:
                if "cv" in rules:
                    out[f"{family}.cv"] = score_support(
                        result.support, truth, problem.c
                    )
                if "cv.vote" in rules:
                    out[f"{family}.cv.vote"] = score_support(
                        result.vote_support, truth, problem.c
                    )
    return out


def _study_worker(args):
    scenario, replicate, methods, opts = args
    try:
        with warnings.catch_warnings():
            # replicated designs are never orthogonal and occasionally hit
            # the sweep cap; repeating those warnings per replicate is noise
            warnings.simplefilter("ignore", UserWarning)
            metrics = _replicate_metrics(scenario, replicate, methods, **opts)
        return replicate, metrics, None
    except Exception as exc:  # noqa: BLE001 - a bad replicate must not kill the study
        return replicate, None, f"{type(exc).__name__}: {exc}"


@dataclass(frozen=True)
class StudyResult:
    """Replicated study outcome: per-method metric draws plus counts."""

    methods: tuple
    metrics: dict
    n_replicates: int
    n_failed: int
    failures: tuple

    def mean(self, method):
        return self.metrics[method].mean(axis=0)

    def sd(self, method):
        vals = self.metrics[method]
        if vals.shape[0] < 2:
            return None
        return vals.std(axis=0, ddof=1)

    def table(self):
        """Delimited text table, one method per row, cells 'mean(sd)'."""
        lines = ["Method\tFP\tFN\tTF\tFPP\tFNP"]
        for method in self.methods:
            sd = self.sd(method)
            cells = [
                f"{m:.2f}({'—' if sd is None else format(s, '.2f')})"
                for m, s in zip(
                    self.mean(method),
                    sd if sd is not None else np.zeros(5),
                )
            ]
            lines.append("\t".join([method] + cells))
        if self.n_failed:
            lines.append(
                f"# failed replicates: {self.n_failed} of {self.n_replicates}"
            )
        return "\n".join(lines) + "\n"


def run_study(
    scenario,
    methods,
    replicates,
    n_lambda1=10,
    n_lambda2=10,
    grid_ratio=0.01,
    n_folds=10,
    vote_threshold=None,
    tol=1e-6,
    max_sweeps=500,
    max_inner=10000,
    n_jobs=1,
):
    """Generate, tune, and score `replicates` independent data sets.

    Methods are name strings from STUDY_METHODS; families sharing a
    tuning run (cv and cv.vote) are fit once per replicate. A replicate
    that raises is excluded from the averages and counted in the result.

    Returns
    -------
    StudyResult
    """
    methods = tuple(methods)
    _method_families(methods)
    if replicates < 1:
        raise ValueError("need at least 1 replicate")
    opts = dict(
        n_lambda1=n_lambda1,
        n_lambda2=n_lambda2,
        grid_ratio=grid_ratio,
        n_folds=n_folds,
        vote_threshold=vote_threshold,
        tol=tol,
        max_sweeps=max_sweeps,
        max_inner=max_inner,
    )
    rows = Parallel(n_jobs=n_jobs)(
        delayed(_study_worker)((scenario, r, methods, opts))
        for r in range(replicates)
    )
    collected = {m: [] for m in methods}
    failures = []
    for replicate, metrics, error in rows:
        if error is not None:
            failures.append((replicate, error))
            continue
        for m in methods:
            collected[m].append(metrics[m].as_array())
    if not any(collected.values()):
        raise RuntimeError(
            f"every replicate failed; first error: {failures[0][1]}"
        )
    return StudyResult(
        methods=methods,
        metrics={m: np.vstack(v) for m, v in collected.items()},
        n_replicates=replicates,
        n_failed=len(failures),
        failures=tuple(failures),
    )
