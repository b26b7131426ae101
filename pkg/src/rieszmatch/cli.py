"""Command-line front end: ate, dre, weights, simulate, verify.

Reports are deterministic given the flags and seed: the body carries no
timings and no scheduling knobs, so reruns (with any ``--jobs``) byte-match.
Wall-clock timings go to stderr.  Exit codes: 0 success, 1 verification
failure, 2 input error.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import equivalence as eq
from . import lsif, matching
from .neighbors import Metric, matching_structures
from .report import render_report

_ESTIMATORS = ("matching", "weight", "bc", "dr")


def default_match_count(n: int) -> int:
    """Default M(n) = ceil(2 n^(1/3)); exposed as a flag everywhere."""
    return int(math.ceil(2.0 * n ** (1.0 / 3.0)))


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="root seed (64-bit unsigned)")
    parser.add_argument("--jobs", type=int, default=1, help="worker pool size")
    parser.add_argument("--metric", choices=["euclidean"], default="euclidean")
    parser.add_argument("--output", type=str, default=None, help="write the report here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rieszmatch")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ate = sub.add_parser("ate", help="estimate the ATE from a CSV dataset")
    p_ate.add_argument("--input", required=True)
    p_ate.add_argument("--m", type=int, default=None, help="match count (default 2 n^{1/3})")
    p_ate.add_argument("--estimator", choices=_ESTIMATORS, default="matching")
    p_ate.add_argument("--degree", type=int, default=1, choices=range(4))
    _add_common(p_ate)

    p_dre = sub.add_parser("dre", help="density-ratio estimates at evaluation points")
    p_dre.add_argument("--denominator", required=True, help="denominator sample CSV")
    p_dre.add_argument("--numerator", required=True, help="numerator sample CSV")
    p_dre.add_argument("--eval-points", required=True, help="evaluation points CSV")
    p_dre.add_argument("--m", type=int, default=1)
    p_dre.add_argument("--lambda", dest="lam", type=float, default=None)
    p_dre.add_argument("--basis", choices=["indicator", "poly", "gauss"], default="indicator")
    p_dre.add_argument("--degree", type=int, default=2, choices=range(4))
    p_dre.add_argument("--grid", type=int, default=4, help="per-dimension Gaussian grid size")
    _add_common(p_dre)

    p_w = sub.add_parser("weights", help="per-unit matching weights")
    p_w.add_argument("--input", default=None, help="dataset CSV (oracle column is na)")
    p_w.add_argument("--dgp", default=None, help="built-in DGP name (enables the oracle column)")
    p_w.add_argument("--n", type=int, default=500)
    p_w.add_argument("--m", type=int, default=None)
    _add_common(p_w)

    p_sim = sub.add_parser("simulate", help="known-truth replication study")
    p_sim.add_argument("--dgp", default="logistic")
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--reps", type=int, required=True)
    p_sim.add_argument("--m", type=int, default=None)
    p_sim.add_argument("--degree", type=int, default=1, choices=range(4))
    _add_common(p_sim)

    p_ver = sub.add_parser("verify", help="run the equivalence suites on random instances")
    p_ver.add_argument("--instances", type=int, default=50)
    _add_common(p_ver)

    return parser


def _emit(body: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(body)
    else:
        Path(output).write_text(body)


def _pool_map(worker, args_list, jobs: int) -> list:
    if jobs <= 1 or len(args_list) <= 1:
        return [worker(args) for args in args_list]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, args_list))


def cmd_ate(args) -> tuple[str, int]:
    data = ds.load_csv(args.input)
    m = args.m if args.m is not None else default_match_count(data.n)
    metric = Metric()
    if args.estimator == "matching":
        est = matching.ate_matching(data, metric, m)
    elif args.estimator == "weight":
        est = matching.ate_weight_form(data, metric, m)
    else:
        outcome = matching.fit_outcome(data, args.degree)
        if args.estimator == "bc":
            est = matching.ate_bias_corrected(data, metric, m, outcome)
        else:
            est = matching.ate_dr_riesz(data, metric, m, outcome)
    header = [
        ("command", "ate"),
        ("input", args.input),
        ("estimator", args.estimator),
        ("m", m),
        ("degree", args.degree),
        ("metric", args.metric),
        ("n", data.n),
        ("n_treated", data.n_treated),
        ("n_control", data.n_control),
        ("tau", est.tau),
    ]
    record = [("tau", est.tau), ("variant", est.variant), ("m", m)]
    if "max_weight" in est.diagnostics:
        record.append(("max_weight", est.diagnostics["max_weight"]))
    return render_report(header, [record]), 0


def cmd_dre(args) -> tuple[str, int]:
    den = ds.load_points_csv(args.denominator)
    num = ds.load_points_csv(args.numerator)
    points = ds.load_points_csv(args.eval_points)
    data = ds.TwoSampleData(denominator=den, numerator=num)
    if points.shape[1] != data.d:
        raise ValueError("evaluation points have the wrong dimension")
    metric = Metric()
    if args.basis == "indicator":
        lam = 0.0 if args.lam is None else args.lam
        values = []
        for point in points:
            fit_result = lsif.fit(data, lsif.indicator_basis(data, metric, args.m, point), lam)
            values.append(lsif.predict(fit_result, point))
    else:
        if args.basis == "poly":
            basis = lsif.polynomial_basis(data.d, args.degree)
        else:
            basis = lsif.gaussian_grid_basis(data.denominator, per_dim=args.grid)
        lam = lsif.default_ridge(data, basis) if args.lam is None else args.lam
        fit_result = lsif.fit(data, basis, lam)
        values = [lsif.predict(fit_result, point) for point in points]
    header = [
        ("command", "dre"),
        ("denominator", args.denominator),
        ("numerator", args.numerator),
        ("eval_points", args.eval_points),
        ("basis", args.basis),
        ("m", args.m),
        ("lambda", float(lam)),
        ("metric", args.metric),
        ("n_denominator", data.n_denominator),
        ("n_numerator", data.n_numerator),
    ]
    records = []
    for t, (point, value) in enumerate(zip(points, values)):
        rec = [("point", t)]
        rec += [(f"x{k}", float(point[k])) for k in range(len(point))]
        rec.append(("r_hat", value))
        records.append(rec)
    return render_report(header, records), 0


def cmd_weights(args) -> tuple[str, int]:
    if (args.input is None) == (args.dgp is None):
        raise ValueError("pass exactly one of --input or --dgp")
    oracle = None
    if args.input is not None:
        data = ds.load_csv(args.input)
        source = [("input", args.input)]
    else:
        spec = ds.builtin_dgp(args.dgp)
        data = ds.generate(spec, args.n, args.seed)
        e = spec.propensity(data.covariates)
        oracle = np.where(data.treatment == 1, 1.0 / e, 1.0 / (1.0 - e))
        source = [("dgp", args.dgp), ("n", args.n), ("seed", args.seed)]
    m = args.m if args.m is not None else default_match_count(data.n)
    structures = matching_structures(data, Metric(), m)
    weights = 1.0 + structures.matched_times / m
    header = [("command", "weights")] + source + [
        ("m", m),
        ("metric", args.metric),
        ("n", data.n),
        ("max_weight", float(weights.max())),
    ]
    records = []
    for i in range(data.n):
        rec = [
            ("i", i),
            ("d", int(data.treatment[i])),
            ("k", int(structures.matched_times[i])),
            ("w", float(weights[i])),
            ("oracle", "na" if oracle is None else float(oracle[i])),
        ]
        records.append(rec)
    return render_report(header, records), 0


def _simulate_replication(task: tuple) -> dict:
    rep, rep_seed, dgp_name, n, m, degree = task
    spec = ds.builtin_dgp(dgp_name)
    data = ds.generate(spec, n, rep_seed)
    metric = Metric()
    outcome = matching.fit_outcome(data, degree)
    return {
        "rep": rep,
        "seed": rep_seed,
        "tau_matching": matching.ate_matching(data, metric, m).tau,
        "tau_weight_form": matching.ate_weight_form(data, metric, m).tau,
        "tau_regression": matching.ate_regression(data, outcome).tau,
        "tau_bias_corrected": matching.ate_bias_corrected(data, metric, m, outcome).tau,
        "tau_dr_riesz": matching.ate_dr_riesz(data, metric, m, outcome).tau,
    }


_SIM_COLUMNS = (
    "tau_matching",
    "tau_weight_form",
    "tau_regression",
    "tau_bias_corrected",
    "tau_dr_riesz",
)


def cmd_simulate(args) -> tuple[str, int]:
    if args.reps < 1:
        raise ValueError("--reps must be >= 1")
    spec = ds.builtin_dgp(args.dgp)
    m = args.m if args.m is not None else default_match_count(args.n)
    seeds = eq.instance_seeds(args.seed, args.reps)
    tasks = [(rep, seeds[rep], args.dgp, args.n, m, args.degree) for rep in range(args.reps)]
    rows = _pool_map(_simulate_replication, tasks, args.jobs)
    rows.sort(key=lambda row: row["rep"])
    header = [
        ("command", "simulate"),
        ("dgp", args.dgp),
        ("n", args.n),
        ("reps", args.reps),
        ("seed", args.seed),
        ("m", m),
        ("degree", args.degree),
        ("metric", args.metric),
        ("true_ate", spec.true_ate),
    ]
    for column in _SIM_COLUMNS:
        taus = np.array([row[column] for row in rows])
        name = column.removeprefix("tau_")
        header.append((f"summary.{name}.mean", float(taus.mean())))
        sd = float(taus.std(ddof=1)) if len(taus) > 1 else 0.0
        header.append((f"summary.{name}.sd", sd))
        header.append((f"summary.{name}.bias", float(taus.mean() - spec.true_ate)))
    records = [
        [("rep", row["rep"]), ("seed", row["seed"])] + [(c, row[c]) for c in _SIM_COLUMNS]
        for row in rows
    ]
    return render_report(header, records), 0


def _verify_instance(task: tuple) -> eq.InstanceRecord:
    index, seed = task
    return eq.run_instance(index, seed)


def cmd_verify(args) -> tuple[str, int]:
    if args.instances < 1:
        raise ValueError("--instances must be >= 1")
    seeds = eq.instance_seeds(args.seed, args.instances)
    tasks = list(enumerate(seeds))
    results = _pool_map(_verify_instance, tasks, args.jobs)
    results.sort(key=lambda rec: rec.index)
    gap_names = (
        "theorem1_gap",
        "eq1_gap",
        "weight_identity_gap",
        "separability_gap",
        "dr_gap",
        "score_mean",
    )
    max_gaps = {name: max(getattr(rec, name) for rec in results) for name in gap_names}
    passed = all(gap <= eq.GAP_THRESHOLD for gap in max_gaps.values())
    header = [
        ("command", "verify"),
        ("seed", args.seed),
        ("instances", args.instances),
        ("metric", args.metric),
        ("threshold", eq.GAP_THRESHOLD),
    ]
    header += [(f"max.{name}", value) for name, value in max_gaps.items()]
    header.append(("status", "pass" if passed else "fail"))
    records = [
        [("instance", rec.index), ("seed", seeds[rec.index])]
        + [(name, getattr(rec, name)) for name in gap_names]
        for rec in results
    ]
    return render_report(header, records), 0 if passed else 1


_DISPATCH = {
    "ate": cmd_ate,
    "dre": cmd_dre,
    "weights": cmd_weights,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        body, status = _DISPATCH[args.command](args)
    except (FileNotFoundError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(body, args.output)
    elapsed = time.perf_counter() - started
    print(f"timing command={args.command} total={elapsed:.3f}s", file=sys.stderr)
    return status


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
