"""Acceptance suite. Each test covers one numbered criterion and prints
a single summary line; the tolerances quoted in the assertions are the
accepted thresholds, and the timed criteria enforce their own budgets.

The heavy study in criterion 6 runs at a reduced problem size with a
coarse penalty grid so the whole suite stays inside a desk-scale run.
"""

import sys
import time

import numpy as np
import pytest
from sklearn.linear_model import Lasso

import oracles
from remmap import (
    CoefficientMatrix,
    PenaltyParams,
    RegressionProblem,
    fit,
    objective,
    update_row,
)
from remmap.solver import ResidualState, _update_row
from remmap.tuning import default_grid, df_estimate, grid_search, lasso_intermediate
from remmap.simulate import (
    ArCovariance,
    GroundTruth,
    SimScenario,
    UniformTopology,
    run_study,
    score_support,
)


def announce(number, name, detail):
    print(f"criterion {number} ({name}): PASS; {detail}")


def orthonormal_design(rng, n, p):
    qmat, _ = np.linalg.qr(rng.standard_normal((n, p)))
    return qmat


# ---------------------------------------------------------------------------
# 1. solver vs proximal-gradient oracle


def test_criterion_1_oracle_equivalence():
    levels = [0.1, 1.0, 5.0]
    start = time.perf_counter()
    worst_obj = worst_coef = 0.0
    for i in range(30):
        rng = np.random.default_rng(9000 + i)
        x, y, c, frozen = oracles.random_problem(rng, n=20, p=6, q=5)
        lam1 = levels[i % 3]
        lam2 = levels[(i // 3) % 3]
        problem = RegressionProblem(y=y, x=x, c=c)
        report = fit(problem, PenaltyParams(lam1, lam2))
        b_ref, obj_ref = oracles.fista(
            x, y, c, frozen, lam1, lam2, rel_tol=1e-12, patience=10
        )
        assert report.objective_value <= obj_ref + 1e-6
        assert np.abs(report.b.b - b_ref).max() < 1e-4
        worst_obj = max(worst_obj, report.objective_value - obj_ref)
        worst_coef = max(worst_coef, float(np.abs(report.b.b - b_ref).max()))
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    announce(1, "oracle equivalence",
             f"30 instances, max objective gap {worst_obj:.2e} (tol 1e-6), "
             f"max coefficient gap {worst_coef:.2e} (tol 1e-4), {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 2. reductions to known estimators


def test_criterion_2_reduction_checks():
    rng = np.random.default_rng(41)
    n, p, q = 30, 8, 6
    x = rng.standard_normal((n, p))
    b_true = np.where(rng.random((p, q)) < 0.5, rng.uniform(-2, 2, (p, q)), 0.0)
    y = x @ b_true + 0.5 * rng.standard_normal((n, q))
    problem = RegressionProblem(y=y, x=x)

    # lambda2 = 0 equals q separate lasso fits
    lam1 = 2.0
    ours = fit(problem, PenaltyParams(lam1, 0.0)).b.b
    gap_lasso = 0.0
    for j in range(q):
        ref = Lasso(alpha=lam1 / n, fit_intercept=False, tol=1e-14,
                    max_iter=1_000_000).fit(x, y[:, j]).coef_
        gap_lasso = max(gap_lasso, float(np.abs(ours[:, j] - ref).max()))
    assert gap_lasso < 1e-6

    # no penalty on an orthonormal design is the projection x^T y
    xo = orthonormal_design(rng, n, p)
    yo = xo @ b_true + 0.3 * rng.standard_normal((n, q))
    ortho = RegressionProblem(y=yo, x=xo)
    b_free = fit(ortho, PenaltyParams(0.0, 0.0)).b.b
    gap_proj = float(np.abs(b_free - xo.T @ yo).max())
    assert gap_proj < 1e-10

    # lambda1 at the global threshold zeroes a fully penalized fit
    lam_max = float(np.abs(x.T @ y).max())
    b_zero = fit(problem, PenaltyParams(lam_max, 0.0)).b.b
    assert np.all(b_zero == 0.0)

    announce(2, "reduction checks",
             f"lasso gap {gap_lasso:.2e} (tol 1e-6), projection gap "
             f"{gap_proj:.2e} (tol 1e-10), threshold fit exactly zero")


# ---------------------------------------------------------------------------
# 3. orthonormal row-selection rule


def test_criterion_3_orthonormal_selection_rule():
    violations = 0
    for k in range(100):
        rng = np.random.default_rng(500 + k)
        n, p, q = 30, 10, 6
        x = orthonormal_design(rng, n, p)
        b_true = np.where(rng.random((p, q)) < 0.5,
                          rng.uniform(-2, 2, (p, q)), 0.0)
        y = x @ b_true + 0.5 * rng.standard_normal((n, q))
        u = x.T @ y
        row_norms = np.sqrt((u * u).sum(axis=1))
        lam2 = float(np.median(row_norms))
        b = fit(RegressionProblem(y=y, x=x), PenaltyParams(0.0, lam2)).b.b
        selected = (b != 0).any(axis=1)
        should_select = row_norms > lam2
        violations += int((selected != should_select).sum())
    assert violations == 0
    announce(3, "orthonormal selection rule",
             "100 designs, selection matches the norm threshold everywhere")


# ---------------------------------------------------------------------------
# 4. degrees-of-freedom unbiasedness


def test_criterion_4_df_unbiasedness():
    rng = np.random.default_rng(777)
    n, p, q = 64, 16, 4
    x = orthonormal_design(rng, n, p)
    b_true = np.where(rng.random((p, q)) < 0.4,
                      rng.uniform(-2.5, 2.5, (p, q)), 0.0)
    mu = x @ b_true
    sigma = 1.0
    settings = [(0.5, 0.0), (1.5, 0.0), (0.0, 0.8), (0.0, 1.6),
                (0.8, 0.8), (1.5, 1.2)]
    reps = 2000
    start = time.perf_counter()
    worst_z = 0.0
    for lam1, lam2 in settings:
        params = PenaltyParams(lam1, lam2)
        # paired difference between the closed-form estimate and the
        # per-replicate covariance statistic sum_n yhat_n eps_n / sigma^2,
        # whose expectation is the covariance-definition df
        deltas = np.empty((reps, q))
        for r in range(reps):
            eps = rng.standard_normal((n, q))
            problem = RegressionProblem(y=mu + sigma * eps, x=x)
            b_hat = fit(problem, params).b.b
            df_hat = df_estimate(
                problem, b_hat, lasso_intermediate(problem, b_hat, lam1),
                lam2, warn_if_correlated=False,
            )
            cov_stat = ((x @ b_hat) * eps).sum(axis=0) / sigma**2
            deltas[r] = df_hat - cov_stat
        mean = deltas.mean(axis=0)
        se = deltas.std(axis=0, ddof=1) / np.sqrt(reps)
        z = np.abs(mean / se)
        assert np.all(z <= 3.0), (lam1, lam2, mean, se)
        worst_z = max(worst_z, float(z.max()))
    elapsed = time.perf_counter() - start
    assert elapsed < 300.0
    announce(4, "df unbiasedness",
             f"6 settings x {reps} replicates, worst |mean|/SE {worst_z:.2f} "
             f"(bound 3), {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 5. cv.vote containment and effect


def test_criterion_5_cv_vote_containment_and_effect():
    # containment on ten noisy tuning runs
    for k in range(10):
        rng = np.random.default_rng(1200 + k)
        n, p, q = 40, 12, 10
        x = rng.standard_normal((n, p))
        b_true = np.where(rng.random((p, q)) < 0.2,
                          rng.uniform(-2, 2, (p, q)), 0.0)
        y = x @ b_true + 2.0 * rng.standard_normal((n, q))
        problem = RegressionProblem(y=y, x=x)
        l1, l2 = default_grid(problem, 4, 3)
        result = grid_search(problem, l1, l2, method="cv", n_folds=5,
                             seed=k, n_jobs=1)
        assert not np.any(result.vote_support & ~result.support)

    # effect direction on a reduced uniform-network study
    scenario = SimScenario(
        n=60, p=40, q=40,
        covariance=ArCovariance(0.4),
        topology=UniformTopology(8, (1, 4), 18),
        snr=1.0, rho_eps=0.0, seed=5,
    )
    study = run_study(scenario, methods=("remMap.cv", "remMap.cv.vote"),
                      replicates=10, n_lambda1=8, n_lambda2=4,
                      grid_ratio=0.01, n_folds=5, n_jobs=1)
    cv_mean = study.mean("remMap.cv")
    vote_mean = study.mean("remMap.cv.vote")
    fp_reduction = cv_mean[0] - vote_mean[0]
    fn_increase = vote_mean[1] - cv_mean[1]
    assert vote_mean[0] <= cv_mean[0]
    assert fn_increase <= 0.30 * fp_reduction
    announce(5, "cv.vote containment and effect",
             f"vote within cv on 10/10 runs; study FP {cv_mean[0]:.2f} -> "
             f"{vote_mean[0]:.2f}, FN {cv_mean[1]:.2f} -> {vote_mean[1]:.2f}, "
             f"FN increase {fn_increase:.2f} <= 30% of FP drop "
             f"{fp_reduction:.2f}")


# ---------------------------------------------------------------------------
# 6. reduced-scale uniform-network study ordering


def test_criterion_6_reduced_study_ordering():
    scenario = SimScenario(
        n=100, p=150, q=150,
        covariance=ArCovariance(0.4),
        topology=UniformTopology(15, (1, 4), 38),
        snr=0.25, rho_eps=0.0, seed=22,
    )
    methods = ("remMap.cv", "remMap.cv.vote", "joint.cv", "joint.cv.vote",
               "sep.cv", "sep.cv.vote")
    start = time.perf_counter()
    study = run_study(scenario, methods=methods, replicates=25,
                      n_lambda1=5, n_lambda2=3, grid_ratio=0.05,
                      n_folds=10, tol=1e-4, n_jobs=1)
    elapsed = time.perf_counter() - start
    assert study.n_failed == 0
    tf = {m: study.mean(m)[2] for m in methods}
    assert tf["remMap.cv.vote"] < tf["joint.cv.vote"] < tf["sep.cv.vote"]
    assert tf["remMap.cv"] < tf["sep.cv"]
    assert elapsed < 1800.0
    announce(6, "reduced study ordering",
             "mean TF " + ", ".join(f"{m} {tf[m]:.2f}" for m in
                                    ("remMap.cv.vote", "joint.cv.vote",
                                     "sep.cv.vote", "remMap.cv", "sep.cv"))
             + f"; {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 7. per-sweep cost scaling


def sweep_time(n, p, q, seed, repeats=7):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    y = rng.standard_normal((n, q))
    b0 = 0.1 * rng.standard_normal((p, q))
    c = np.ones((p, q))
    frozen = np.zeros((p, q))

    def one_sweep():
        b = b0.copy()
        state = ResidualState.from_coefficients(x, y, b)
        t0 = time.perf_counter()
        for row in range(p):
            _update_row(state, x, b, row, c, frozen, 0.05, 0.05)
        return time.perf_counter() - t0

    one_sweep()  # warm-up
    return min(one_sweep() for _ in range(repeats))


def test_criterion_7_cost_scaling():
    base = dict(n=400, p=200, q=200)
    t_base = sweep_time(**base, seed=1)
    ratios = {}
    for dim in ("n", "p", "q"):
        doubled = dict(base)
        doubled[dim] *= 2
        ratios[dim] = sweep_time(**doubled, seed=2) / t_base
    for dim, ratio in ratios.items():
        assert 1.6 <= ratio <= 2.6, (dim, ratio)
    announce(7, "cost scaling",
             "per-sweep doubling ratios " +
             ", ".join(f"{d} {r:.2f}" for d, r in ratios.items()) +
             " all in [1.6, 2.6]")


# ---------------------------------------------------------------------------
# 8. CLI determinism


def test_criterion_8_cli_determinism(tmp_path):
    import pathlib

    from remmap.cli import main, write_matrix

    fixtures = pathlib.Path(__file__).resolve().parent / "fixtures"
    scenario_cfg = tmp_path / "scenario.cfg"
    scenario_cfg.write_text(
        "[scenario]\n"
        "n = 30\np = 12\nq = 12\nsnr = 1.0\nseed = 7\n"
        "[scenario.covariance]\nkind = ar\nrho_x = 0.4\n"
        "[scenario.topology]\nkind = uniform\nn_trans_predictors = 4\n"
        "degree_low = 1\ndegree_high = 3\ntarget_trans_edges = 8\n"
    )
    est = tmp_path / "est.txt"
    write_matrix(est, np.eye(12))

    def problem_args(extra=()):
        return ["--x", str(fixtures / "x.txt"), "--y", str(fixtures / "y.txt"),
                "--c", str(fixtures / "c.txt"), *extra]

    commands = {
        "fit": ["fit", *problem_args(("--lambda1", "0.9", "--lambda2", "1.4"))],
        "cv": ["cv", *problem_args(("--grid", "3x2", "--folds", "4",
                                    "--seed", "3", "--threads", "1"))],
        "bic": ["bic", *problem_args(("--grid", "3x2", "--threads", "1"))],
        "simulate": ["simulate", "--scenario", str(scenario_cfg)],
    }
    checked = []
    for name, argv in commands.items():
        trees = []
        for run in ("a", "b"):
            out = tmp_path / f"{name}_{run}"
            assert main([*argv, "--out", str(out)]) == 0
            trees.append({f.name: f.read_bytes()
                          for f in sorted(out.iterdir())})
        assert trees[0] == trees[1], name
        checked.append(name)

    # evaluate consumes simulate's outputs, twice
    sim_out = tmp_path / "simulate_a"
    trees = []
    for run in ("a", "b"):
        out = tmp_path / f"evaluate_{run}"
        argv = ["evaluate", "--truth", str(sim_out / "truth_adjacency.txt"),
                "--estimate", str(est), "--c", str(sim_out / "c.txt"),
                "--out", str(out)]
        assert main(argv) == 0
        trees.append({f.name: f.read_bytes() for f in sorted(out.iterdir())})
    assert trees[0] == trees[1]
    checked.append("evaluate")
    announce(8, "CLI determinism",
             "byte-identical re-runs for " + ", ".join(checked))


# ---------------------------------------------------------------------------
# 9. property suites


def small_problem(rng):
    x, y, c, frozen = oracles.random_problem(rng, n=15, p=5, q=4)
    return RegressionProblem(y=y, x=x, c=c)


def test_criterion_9_objective_convexity():
    for k in range(200):
        rng = np.random.default_rng(3000 + k)
        problem = small_problem(rng)
        params = PenaltyParams(float(rng.uniform(0, 2)),
                               float(rng.uniform(0, 2)))
        b1 = rng.normal(scale=2.0, size=(5, 4))
        b2 = rng.normal(scale=2.0, size=(5, 4))
        t = float(rng.uniform())
        lhs = objective(problem, CoefficientMatrix(t * b1 + (1 - t) * b2),
                        params)
        rhs = (t * objective(problem, CoefficientMatrix(b1), params)
               + (1 - t) * objective(problem, CoefficientMatrix(b2), params))
        assert lhs <= rhs + 1e-9
    announce(9, "property: convexity", "200 random interpolation checks")


def test_criterion_9_monotone_descent_per_sweep():
    for k in range(200):
        rng = np.random.default_rng(4000 + k)
        problem = small_problem(rng)
        params = PenaltyParams(float(rng.uniform(0, 1.5)),
                               float(rng.uniform(0, 1.5)))
        b = rng.normal(scale=1.5, size=(5, 4))
        b[problem.frozen == 1] = 0.0
        before = objective(problem, CoefficientMatrix(b), params)
        state = ResidualState.from_coefficients(problem.x, problem.y, b)
        for row in range(5):
            update_row(state, b, row, problem, params)
        after = objective(problem, CoefficientMatrix(b), params)
        assert after <= before + 1e-10
    announce(9, "property: descent", "200 full sweeps, objective never rose")


def test_criterion_9_fixed_point_after_convergence():
    for k in range(200):
        rng = np.random.default_rng(5000 + k)
        problem = small_problem(rng)
        params = PenaltyParams(float(rng.uniform(0.05, 1.0)),
                               float(rng.uniform(0.05, 1.0)),
                               tol=1e-10)
        report = fit(problem, params)
        assert report.converged
        b = report.b.b.copy()
        state = ResidualState.from_coefficients(problem.x, problem.y, b)
        moved = 0.0
        for row in range(5):
            old = b[row].copy()
            update_row(state, b, row, problem, params)
            moved = max(moved, float(np.abs(b[row] - old).max()))
        assert moved <= 1e-8
    announce(9, "property: fixed point",
             "200 converged fits stable under one more sweep")


def test_criterion_9_metric_identities():
    for k in range(200):
        rng = np.random.default_rng(6000 + k)
        p = int(rng.integers(4, 12))
        adjacency = np.eye(p)
        adjacency[rng.random((p, p)) < 0.2] = 1
        coefficients = adjacency * rng.uniform(1, 5, (p, p))
        c = np.ones((p, p)) - np.eye(p)
        truth = GroundTruth.from_parts(adjacency, coefficients, c)
        estimate = rng.random((p, p)) < 0.25
        metrics = score_support(estimate, truth, c)
        assert metrics.tf == metrics.fp + metrics.fn
        perfect = score_support((adjacency == 1) & (c == 1), truth, c)
        assert (perfect.fp, perfect.fn, perfect.tf, perfect.fpp,
                perfect.fnp) == (0, 0, 0, 0, 0)
    announce(9, "property: metric identities",
             "200 cases, TF = FP + FN and perfect recovery scores zero")
