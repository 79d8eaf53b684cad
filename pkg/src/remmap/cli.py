"""Command-line interface: fit, cv, bic, simulate, and evaluate.

All file formats are plain text and bit-stable: dense matrices carry a
"rows cols" header and 17-significant-digit decimals; sparse files carry
a "p q value" header with 1-based indices. Every option can come from an
INI-style config file, with command-line flags taking precedence.
"""

import argparse
import configparser
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from remmap.core import PenaltyParams, RegressionProblem
from remmap.simulate import (
    ArCovariance,
    BlockCovariance,
    HubTopology,
    MixedTopology,
    SimScenario,
    UniformTopology,
    generate_dataset,
    scale_block_sizes,
    score_support,
)
from remmap.solver import fit
from remmap.tuning import grid_search, sep_search

THREADS_ENV = "REMMAP_THREADS"
TRIPLET_HEADER = "p q value"


# ---------------------------------------------------------------------------
# file formats


def _fmt(value):
    return format(float(value), ".17g")


def write_matrix(path, matrix):
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    with open(path, "w") as fh:
        fh.write(f"{matrix.shape[0]} {matrix.shape[1]}\n")
        for row in matrix:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")


def read_matrix(path):
    """Parse a dense matrix file, reporting the offending line on error."""
    with open(path) as fh:
        header = fh.readline()
        parts = header.split()
        try:
            rows, cols = int(parts[0]), int(parts[1])
            if len(parts) != 2 or rows < 0 or cols < 0:
                raise ValueError
        except (ValueError, IndexError):
            raise ValueError(
                f"{path}:1: expected header 'rows cols', got {header.strip()!r}"
            ) from None
        data = np.empty((rows, cols))
        for i in range(rows):
            line = fh.readline()
            if not line:
                raise ValueError(
                    f"{path}:{i + 2}: file ended after {i} of {rows} data rows"
                )
            vals = line.split()
            if len(vals) != cols:
                raise ValueError(
                    f"{path}:{i + 2}: expected {cols} values, got {len(vals)}"
                )
            try:
                data[i] = [float(v) for v in vals]
            except ValueError:
                raise ValueError(
                    f"{path}:{i + 2}: could not parse a value on this line"
                ) from None
        if fh.read().strip():
            raise ValueError(f"{path}: trailing content after {rows} data rows")
    return data


def write_triplets(path, matrix):
    """Write the nonzero entries as 1-based 'p q value' rows."""
    matrix = np.asarray(matrix, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write(TRIPLET_HEADER + "\n")
        for p, q in np.argwhere(matrix != 0):
            fh.write(f"{p + 1} {q + 1} {_fmt(matrix[p, q])}\n")


def read_triplets(path, shape):
    matrix = np.zeros(shape)
    with open(path) as fh:
        header = fh.readline().strip()
        if header != TRIPLET_HEADER:
            raise ValueError(
                f"{path}:1: expected header {TRIPLET_HEADER!r}, got {header!r}"
            )
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            vals = line.split()
            if len(vals) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'p q value'")
            try:
                p, q, value = int(vals[0]), int(vals[1]), float(vals[2])
            except ValueError:
                raise ValueError(
                    f"{path}:{lineno}: could not parse 'p q value'"
                ) from None
            if not (1 <= p <= shape[0] and 1 <= q <= shape[1]):
                raise ValueError(
                    f"{path}:{lineno}: index ({p}, {q}) outside {shape[0]}x{shape[1]}"
                )
            matrix[p - 1, q - 1] = value
    return matrix


def read_support(path, shape):
    """Load a 0/1 support from either a triplet or a dense matrix file."""
    with open(path) as fh:
        first = fh.readline().strip()
    if first == TRIPLET_HEADER:
        return read_triplets(path, shape) != 0
    return read_matrix(path) != 0


def write_report(path, items):
    with open(path, "w") as fh:
        for key, value in items:
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, (int, np.integer)):
                text = str(int(value))
            else:
                text = _fmt(value)
            fh.write(f"{key} = {text}\n")


# ---------------------------------------------------------------------------
# config handling


def load_config(path):
    cp = configparser.ConfigParser()
    if not Path(path).is_file():
        raise ValueError(f"config file not found: {path}")
    cp.read(path)
    return cp


def _pick(args_value, cp, section, key, default=None):
    """Flag value if given, else config value, else default."""
    if args_value is not None:
        return args_value
    if cp is not None and cp.has_option(section, key):
        return cp.get(section, key)
    return default


def _require(value, what):
    if value is None:
        raise ValueError(f"missing required input: {what}")
    return value


def _resolve_threads(args_value, cp):
    raw = _pick(args_value, cp, "run", "threads", os.environ.get(THREADS_ENV))
    if raw is None:
        return os.cpu_count() or 1
    n = int(raw)
    if n < 1:
        raise ValueError("threads must be a positive integer")
    return n


def _parse_grid_spec(text):
    """'K1xK2[:ratio]' or 'K[:ratio]' -> (k1, k2, ratio)."""
    body, _, ratio_part = text.partition(":")
    try:
        ratio = float(ratio_part) if ratio_part else 0.01
        if "x" in body:
            a, b = body.split("x")
            k1, k2 = int(a), int(b)
        else:
            k1, k2 = int(body), 1
        if k1 < 1 or k2 < 1 or not 0 < ratio <= 1:
            raise ValueError
    except ValueError:
        raise ValueError(
            f"invalid grid spec {text!r}; expected 'K1xK2[:ratio]' with "
            "positive sizes and ratio in (0, 1]"
        ) from None
    return k1, k2, ratio


def _parse_value_list(text):
    try:
        vals = np.array([float(v) for v in text.split(",") if v.strip() != ""])
    except ValueError:
        raise ValueError(f"could not parse penalty list {text!r}") from None
    if vals.size == 0:
        raise ValueError(f"empty penalty list {text!r}")
    return vals


def _load_problem(args, cp):
    x_path = _require(_pick(args.x, cp, "problem", "x"), "--x or [problem] x")
    y_path = _require(_pick(args.y, cp, "problem", "y"), "--y or [problem] y")
    x = read_matrix(x_path)
    y = read_matrix(y_path)
    c_path = _pick(args.c, cp, "problem", "c")
    frozen_path = _pick(args.frozen, cp, "problem", "frozen")
    c = read_matrix(c_path) if c_path else None
    frozen = read_matrix(frozen_path) if frozen_path else None
    return RegressionProblem(y=y, x=x, c=c, frozen=frozen)


def _solver_controls(cp):
    def get_float(key, default):
        return float(_pick(None, cp, "penalty", key, default))

    return dict(
        tol=get_float("tol", 1e-6),
        max_sweeps=int(float(_pick(None, cp, "penalty", "max_sweeps", 500))),
        max_inner=int(float(_pick(None, cp, "penalty", "max_inner", 10000))),
    )


def _out_dir(args, cp):
    out = Path(_pick(args.out, cp, "run", "out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_fit(args):
    cp = load_config(args.config) if args.config else None
    problem = _load_problem(args, cp)
    lam1 = float(_require(_pick(args.lambda1, cp, "penalty", "lambda1"),
                          "--lambda1 or [penalty] lambda1"))
    lam2 = float(_require(_pick(args.lambda2, cp, "penalty", "lambda2"),
                          "--lambda2 or [penalty] lambda2"))
    params = PenaltyParams(lam1, lam2, **_solver_controls(cp))
    out = _out_dir(args, cp)
    start = time.perf_counter()
    report = fit(problem, params)
    elapsed = time.perf_counter() - start
    write_matrix(out / "coefficients.txt", report.b.b)
    write_triplets(out / "triplets.txt", report.b.b)
    write_report(
        out / "report.txt",
        [
            ("lambda1", lam1),
            ("lambda2", lam2),
            ("objective", report.objective_value),
            ("sweeps_used", report.sweeps_used),
            ("converged", report.converged),
            ("final_max_delta", report.final_max_delta),
        ],
    )
    print(
        f"fit: objective {report.objective_value:.6g}, "
        f"{report.sweeps_used} sweeps, converged {report.converged}, "
        f"{elapsed:.2f}s; wrote {out / 'coefficients.txt'}"
    )
    return 0


def _search(problem, args, cp, method_rule):
    """Shared cv/bic dispatch. method_rule is 'cv' or 'bic'."""
    family = _pick(args.method, cp, "tuning", "method", "remmap").lower()
    if family not in ("remmap", "joint", "sep"):
        raise ValueError(f"unknown method {family!r}; use remmap, joint, or sep")
    n_folds = int(_pick(getattr(args, "folds", None), cp, "tuning", "folds", 10))
    vote_raw = _pick(
        getattr(args, "vote_threshold", None), cp, "tuning", "vote_threshold"
    )
    vote_threshold = int(vote_raw) if vote_raw is not None else None
    seed = int(_pick(args.seed, cp, "run", "seed", 0))
    n_jobs = _resolve_threads(args.threads, cp)
    k1, k2, ratio = _parse_grid_spec(
        _pick(args.grid, cp, "penalty", "grid", "10x10")
    )
    controls = _solver_controls(cp)
    common = dict(
        method=method_rule,
        n_folds=n_folds,
        vote_threshold=vote_threshold,
        seed=seed,
        n_jobs=n_jobs,
        **controls,
    )
    if family == "sep":
        if args.lambda1 is not None or args.lambda2 is not None:
            raise ValueError(
                "sep tunes each response on its own path; use --grid K:ratio "
                "instead of explicit penalty lists"
            )
        return family, sep_search(problem, n_levels=k1, ratio=ratio, **common)
    lam1_raw = _pick(args.lambda1, cp, "penalty", "lambda1")
    lam2_raw = _pick(args.lambda2, cp, "penalty", "lambda2")
    l1 = _parse_value_list(lam1_raw) if lam1_raw is not None else None
    if family == "joint":
        if lam2_raw is not None and np.any(_parse_value_list(lam2_raw) != 0):
            raise ValueError("joint pins lambda2 at zero; drop --lambda2")
        l2 = np.array([0.0])
    else:
        l2 = _parse_value_list(lam2_raw) if lam2_raw is not None else None
    if l1 is None or (family == "remmap" and l2 is None):
        from remmap.tuning import default_grid

        d1, d2 = default_grid(problem, k1, k2, ratio)
        if l1 is None:
            l1 = d1
        if l2 is None:
            l2 = d2
    return family, grid_search(problem, l1, l2, **common)


def _write_search_tables(out, result, family, table_name):
    if family == "sep":
        with open(out / table_name, "w") as fh:
            fh.write("response lambda1 score\n")
            for i, (lam_vec, _) in enumerate(result.grid):
                for j in range(result.scores.shape[1]):
                    fh.write(
                        f"{j + 1} {_fmt(lam_vec[j])} {_fmt(result.scores[i, j])}\n"
                    )
        with open(out / "best_pair.txt", "w") as fh:
            fh.write("response lambda1\n")
            for j, v in enumerate(result.lambda1):
                fh.write(f"{j + 1} {_fmt(v)}\n")
    else:
        with open(out / table_name, "w") as fh:
            fh.write("lambda1 lambda2 score\n")
            for (lam1, lam2), score in zip(result.grid, result.scores):
                fh.write(f"{_fmt(lam1)} {_fmt(lam2)} {_fmt(score)}\n")
        with open(out / "best_pair.txt", "w") as fh:
            fh.write("lambda1 lambda2\n")
            fh.write(f"{_fmt(result.lambda1)} {_fmt(result.lambda2)}\n")


def _write_fit_outputs(out, result):
    write_matrix(out / "coefficients.txt", result.report.b.b)
    write_triplets(out / "support.txt", result.support.astype(np.float64))
    write_report(
        out / "report.txt",
        [
            ("score", result.score),
            ("objective", result.report.objective_value),
            ("sweeps_used", result.report.sweeps_used),
            ("converged", result.report.converged),
            ("all_converged", result.all_converged),
        ],
    )


def cmd_cv(args):
    cp = load_config(args.config) if args.config else None
    problem = _load_problem(args, cp)
    out = _out_dir(args, cp)
    start = time.perf_counter()
    family, result = _search(problem, args, cp, "cv")
    elapsed = time.perf_counter() - start
    _write_search_tables(out, result, family, "cv_table.txt")
    _write_fit_outputs(out, result)
    write_triplets(out / "vote_support.txt", result.vote_support.astype(np.float64))
    with open(out / "fold_supports.txt", "w") as fh:
        fh.write("fold p q\n")
        for i, s in enumerate(result.fold_supports):
            for p, q in np.argwhere(s):
                fh.write(f"{i + 1} {p + 1} {q + 1}\n")
    kept = int(result.support.sum())
    voted = int(result.vote_support.sum())
    print(
        f"cv ({family}): best score {result.score:.6g}, support {kept} entries, "
        f"vote keeps {voted}, {elapsed:.2f}s; wrote {out / 'cv_table.txt'}"
    )
    return 0


def cmd_bic(args):
    cp = load_config(args.config) if args.config else None
    problem = _load_problem(args, cp)
    out = _out_dir(args, cp)
    start = time.perf_counter()
    family, result = _search(problem, args, cp, "bic")
    elapsed = time.perf_counter() - start
    _write_search_tables(out, result, family, "bic_table.txt")
    _write_fit_outputs(out, result)
    print(
        f"bic ({family}): best score {result.score:.6g}, support "
        f"{int(result.support.sum())} entries, {elapsed:.2f}s; "
        f"wrote {out / 'bic_table.txt'}"
    )
    return 0


def _scenario_field(section, key, cast, default=None, required=False):
    if key not in section:
        if required:
            raise ValueError(f"[{section.name}] missing field {key!r}")
        return default
    try:
        return cast(section[key])
    except ValueError:
        raise ValueError(
            f"[{section.name}] field {key!r} has invalid value {section[key]!r}"
        ) from None


def _parse_triple(section, key):
    raw = _scenario_field(section, key, str, required=True)
    parts = raw.split()
    if len(parts) != 3:
        raise ValueError(
            f"[{section.name}] field {key!r} must be 'count low high', got {raw!r}"
        )
    return tuple(int(v) for v in parts)


def parse_scenario(cp, seed_override=None):
    """Build a SimScenario from config sections; returns (scenario, replicate)."""
    if not cp.has_section("scenario"):
        raise ValueError("scenario config needs a [scenario] section")
    sec = cp["scenario"]
    n = _scenario_field(sec, "n", int, required=True)
    p = _scenario_field(sec, "p", int, required=True)
    q = _scenario_field(sec, "q", int, required=True)
    snr = _scenario_field(sec, "snr", float, required=True)
    rho_eps = _scenario_field(sec, "rho_eps", float, 0.0)
    seed = _scenario_field(sec, "seed", int, 0)
    replicate = _scenario_field(sec, "replicate", int, 0)
    if seed_override is not None:
        seed = int(seed_override)
    if not cp.has_section("scenario.covariance"):
        raise ValueError("scenario config needs a [scenario.covariance] section")
    cov_sec = cp["scenario.covariance"]
    kind = _scenario_field(cov_sec, "kind", str, required=True).lower()
    if kind == "ar":
        covariance = ArCovariance(rho_x=_scenario_field(cov_sec, "rho_x", float, 0.0))
    elif kind == "block":
        sizes_raw = _scenario_field(cov_sec, "block_sizes", str)
        sizes = tuple(int(v) for v in sizes_raw.split()) if sizes_raw else None
        covariance = BlockCovariance(
            rho_wb=_scenario_field(cov_sec, "rho_wb", float, 0.9),
            rho_bb=_scenario_field(cov_sec, "rho_bb", float, 0.25),
            block_sizes=sizes,
        )
    else:
        raise ValueError(
            f"[scenario.covariance] kind must be 'ar' or 'block', got {kind!r}"
        )
    if not cp.has_section("scenario.topology"):
        raise ValueError("scenario config needs a [scenario.topology] section")
    top_sec = cp["scenario.topology"]
    tkind = _scenario_field(top_sec, "kind", str, required=True).lower()
    target = _scenario_field(top_sec, "target_trans_edges", int, required=True)
    if tkind == "hub":
        topology = HubTopology(
            n_hubs=_scenario_field(top_sec, "n_hubs", int, required=True),
            degree_range=(
                _scenario_field(top_sec, "degree_low", int, required=True),
                _scenario_field(top_sec, "degree_high", int, required=True),
            ),
            target_trans_edges=target,
        )
    elif tkind == "uniform":
        topology = UniformTopology(
            n_trans_predictors=_scenario_field(
                top_sec, "n_trans_predictors", int, required=True
            ),
            degree_range=(
                _scenario_field(top_sec, "degree_low", int, required=True),
                _scenario_field(top_sec, "degree_high", int, required=True),
            ),
            target_trans_edges=target,
        )
    elif tkind == "mixed":
        topology = MixedTopology(
            large_hubs=_parse_triple(top_sec, "large_hubs"),
            small_hubs=_parse_triple(top_sec, "small_hubs"),
            singletons=_parse_triple(top_sec, "singletons"),
            target_trans_edges=target,
        )
    else:
        raise ValueError(
            f"[scenario.topology] kind must be 'hub', 'uniform', or 'mixed', "
            f"got {tkind!r}"
        )
    scenario = SimScenario(
        n=n, p=p, q=q, covariance=covariance, topology=topology,
        snr=snr, rho_eps=rho_eps, seed=seed,
    )
    return scenario, replicate


def _write_scenario_echo(path, scenario, replicate, clipped):
    lines = [
        "[scenario]",
        f"n = {scenario.n}",
        f"p = {scenario.p}",
        f"q = {scenario.q}",
        f"snr = {_fmt(scenario.snr)}",
        f"rho_eps = {_fmt(scenario.rho_eps)}",
        f"seed = {scenario.seed}",
        f"replicate = {replicate}",
        "",
        "[scenario.covariance]",
    ]
    cov = scenario.covariance
    if isinstance(cov, ArCovariance):
        lines += ["kind = ar", f"rho_x = {_fmt(cov.rho_x)}"]
    else:
        sizes = cov.block_sizes or scale_block_sizes(scenario.p)
        lines += [
            "kind = block",
            f"rho_wb = {_fmt(cov.rho_wb)}",
            f"rho_bb = {_fmt(cov.rho_bb)}",
            "block_sizes = " + " ".join(str(s) for s in sizes),
        ]
    lines += ["", "[scenario.topology]"]
    top = scenario.topology
    if isinstance(top, HubTopology):
        lines += [
            "kind = hub",
            f"n_hubs = {top.n_hubs}",
            f"degree_low = {top.degree_range[0]}",
            f"degree_high = {top.degree_range[1]}",
        ]
    elif isinstance(top, UniformTopology):
        lines += [
            "kind = uniform",
            f"n_trans_predictors = {top.n_trans_predictors}",
            f"degree_low = {top.degree_range[0]}",
            f"degree_high = {top.degree_range[1]}",
        ]
    else:
        lines += [
            "kind = mixed",
            "large_hubs = " + " ".join(str(v) for v in top.large_hubs),
            "small_hubs = " + " ".join(str(v) for v in top.small_hubs),
            "singletons = " + " ".join(str(v) for v in top.singletons),
        ]
    lines += [
        f"target_trans_edges = {top.target_trans_edges}",
        "",
        "[flags]",
        f"covariance_clipped = {'true' if clipped else 'false'}",
        "",
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines))


def cmd_simulate(args):
    scenario_path = args.scenario or args.config
    if scenario_path is None:
        raise ValueError("simulate needs --scenario (or --config) pointing at "
                         "a scenario file")
    cp = load_config(scenario_path)
    scenario, replicate = parse_scenario(cp, seed_override=args.seed)
    out = _out_dir(args, cp)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        problem, truth = generate_dataset(scenario, replicate=replicate)
    clipped = any("clipped" in str(w.message) for w in caught)
    write_matrix(out / "x.txt", problem.x)
    write_matrix(out / "y.txt", problem.y)
    write_matrix(out / "c.txt", problem.c)
    write_matrix(out / "truth_adjacency.txt", truth.adjacency)
    write_matrix(out / "truth_coefficients.txt", truth.coefficients)
    _write_scenario_echo(out / "scenario.txt", scenario, replicate, clipped)
    print(
        f"simulate: N={scenario.n} P={scenario.p} Q={scenario.q}, "
        f"{len(truth.trans_edge_set)} trans-edges from "
        f"{len(truth.trans_predictor_set)} trans-predictors; wrote {out}"
    )
    return 0


def cmd_evaluate(args):
    cp = load_config(args.config) if args.config else None
    truth_path = _require(
        _pick(args.truth, cp, "evaluate", "truth"), "--truth or [evaluate] truth"
    )
    estimate_path = _require(
        _pick(args.estimate, cp, "evaluate", "estimate"),
        "--estimate or [evaluate] estimate",
    )
    adjacency = read_matrix(truth_path)
    c_path = _pick(args.c, cp, "problem", "c")
    if c_path:
        c = read_matrix(c_path)
    else:
        c = np.ones(adjacency.shape) - np.eye(*adjacency.shape)
    estimate = read_support(estimate_path, adjacency.shape)
    metrics = score_support(estimate, adjacency, c)
    out = _out_dir(args, cp)
    row = (metrics.fp, metrics.fn, metrics.tf, metrics.fpp, metrics.fnp)
    with open(out / "metrics.txt", "w") as fh:
        fh.write("FP\tFN\tTF\tFPP\tFNP\n")
        fh.write("\t".join(str(v) for v in row) + "\n")
    print("FP\tFN\tTF\tFPP\tFNP")
    print("\t".join(str(v) for v in row))
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="remmap",
        description="Sparse multivariate regression with a combined l1 + "
        "row-wise l2 penalty: fitting, tuning, simulation, and scoring.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", help="INI config file; flags override it")
        sp.add_argument("--out", help="output directory (default .)")
        sp.add_argument("--seed", type=int, help="random seed")
        sp.add_argument("--threads", type=int,
                        help=f"parallel workers (or ${THREADS_ENV})")

    def add_problem(sp):
        sp.add_argument("--x", help="predictor matrix file")
        sp.add_argument("--y", help="response matrix file")
        sp.add_argument("--c", help="0/1 penalty indicator matrix file")
        sp.add_argument("--frozen", help="0/1 mask of entries held at zero")

    p_fit = sub.add_parser("fit", help="solve one penalized fit")
    add_common(p_fit)
    add_problem(p_fit)
    p_fit.add_argument("--lambda1", help="l1 penalty weight")
    p_fit.add_argument("--lambda2", help="row-wise l2 penalty weight")
    p_fit.set_defaults(func=cmd_fit)

    for name, func, extra_help in (
        ("cv", cmd_cv, "tune penalties by v-fold cross-validation"),
        ("bic", cmd_bic, "tune penalties by BIC"),
    ):
        sp = sub.add_parser(name, help=extra_help)
        add_common(sp)
        add_problem(sp)
        sp.add_argument("--lambda1", help="comma-separated candidate values")
        sp.add_argument("--lambda2", help="comma-separated candidate values")
        sp.add_argument("--grid", help="grid spec K1xK2[:ratio] (default 10x10:0.01)")
        sp.add_argument("--method", help="remmap (default), joint, or sep")
        if name == "cv":
            sp.add_argument("--folds", type=int, help="fold count (default 10)")
            sp.add_argument("--vote-threshold", dest="vote_threshold", type=int,
                            help="folds a coefficient must exceed to survive "
                            "the vote (default folds // 2)")
        sp.set_defaults(func=func)

    p_sim = sub.add_parser("simulate", help="draw one synthetic data set")
    add_common(p_sim)
    p_sim.add_argument("--scenario", help="scenario config file")
    p_sim.set_defaults(func=cmd_simulate)

    p_eval = sub.add_parser("evaluate", help="score an estimated support")
    add_common(p_eval)
    p_eval.add_argument("--truth", help="true adjacency matrix file")
    p_eval.add_argument("--estimate", help="estimated support (triplet or dense)")
    p_eval.add_argument("--c", help="0/1 penalty indicator matrix file")
    p_eval.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - uniform CLI error reporting
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
