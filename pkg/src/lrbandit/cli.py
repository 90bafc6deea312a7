"""Command-line front end: run single algorithms, full experiment grids,
metric reports, synthetic matrix generation, and matrix inspection."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .core import AlgorithmConfig, InvalidConfigError, RandomStream
from .harness import (
    ALGORITHMS,
    AlgorithmEntry,
    DEFAULT_CHECKPOINTS,
    ExperimentSpec,
    MetricSettings,
    OracleSource,
    WORKERS_ENV,
    load_experiment_spec,
    run_experiment,
)
from .metrics import (
    hardness_h1,
    ndcg_at_k,
    precision_gap,
    precision_significance,
    singular_value_ratios,
)
from .oracle import RemoteOracle, load_matrix, save_matrix, synth_planted


def _parse_dims(text: str) -> tuple[int, int]:
    try:
        m, n = text.lower().split("x")
        return int(m), int(n)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"dims must look like 120x800, got {text!r}") from exc


def _parse_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _parse_means(text: str, m: int | None) -> np.ndarray:
    """Mean specs: 'linspace:0.3,0.7' (needs --m) or a comma list."""
    if text.startswith("linspace:"):
        lo, hi = _parse_floats(text[len("linspace:"):])
        if m is None:
            raise InvalidConfigError("--m is required with a linspace means spec")
        return np.linspace(lo, hi, m)
    values = np.array(_parse_floats(text))
    if m is not None and values.size != m:
        raise InvalidConfigError(f"means list has {values.size} entries, expected m={m}")
    return values


def _add_hyper_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--a", type=float, default=1.0, help="exploration strength (default 1)")
    p.add_argument("--rank", type=int, default=1, help="factorization rank (default 1)")
    p.add_argument("--ensemble", type=int, default=64, help="ensemble size (default 64)")
    p.add_argument(
        "--warmup-frac",
        type=float,
        default=0.05,
        help="warm-up fraction of all pairs (default 0.05)",
    )
    p.add_argument("--eta", type=float, default=5.0, help="uncertainty scaling (default 5)")
    p.add_argument("--batch", type=int, default=32, help="batch size (default 32)")
    p.add_argument(
        "--dropout",
        type=float,
        default=0.1,
        help="observed fraction hidden from each ensemble member (default 0.1)",
    )


def _config_from_flags(args, m: int, n: int) -> AlgorithmConfig:
    if not (0.0 < args.budget_frac <= 1.0):
        raise InvalidConfigError("--budget-frac must lie in (0, 1]")
    budget = max(1, int(args.budget_frac * m * n))
    return AlgorithmConfig(
        budget_total=budget,
        exploration_a=args.a,
        rank=args.rank,
        ensemble_size=args.ensemble,
        warmup_fraction=args.warmup_frac,
        uncertainty_scale=args.eta,
        batch_size=min(args.batch, budget),
        dropout_fraction=args.dropout,
    )


def _load_oracle_for_run(args, parser):
    if args.matrix:
        return load_matrix(args.matrix, args.format)
    if args.remote:
        if not args.dims:
            parser.error("--remote requires --dims MxN")
        m, n = args.dims
        return RemoteOracle(
            args.remote,
            m,
            n,
            run_id=args.run_id,
            timeout=args.timeout,
            retries=args.retries,
        )
    parser.error("either --matrix or --remote is required")


def _cmd_run(args, parser) -> int:
    oracle = _load_oracle_for_run(args, parser)
    try:
        config = _config_from_flags(args, oracle.m, oracle.n)
        needs_warmup = args.algo in ("ucb-e-lrf", "ucb-e-lrf-score-only", "lrf")
        config.validate(oracle.m, oracle.n, needs_warmup=needs_warmup)
    except InvalidConfigError as exc:
        parser.error(str(exc))
    result = ALGORITHMS[args.algo](oracle, config, RandomStream(args.seed))
    best = result.prediction.best_index
    mean = result.prediction.estimated_means[best]
    print(f"best method: {oracle.method_names[best]} (index {best})")
    print(f"estimated mean: {mean:.6f}")
    print(f"evaluations used: {result.state.evaluations_used}")
    for warning in result.trajectory.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(result.trajectory.canonical_dict(), fh)
            fh.write("\n")
        print(f"trajectory written to {args.out}")
    return 0


def _cmd_experiment(args, parser) -> int:
    if args.spec:
        spec = load_experiment_spec(args.spec)
        if args.out_csv:
            spec = _replace_spec(spec, output_csv=args.out_csv)
        if args.out_json:
            spec = _replace_spec(spec, output_json=args.out_json)
    else:
        if not args.matrix:
            parser.error("either --spec or --matrix is required")
        algos = [a.strip() for a in args.algos.split(",") if a.strip()]
        spec = ExperimentSpec(
            oracle=OracleSource(kind="matrix", path=args.matrix, format=args.format),
            algorithms=tuple(AlgorithmEntry(a) for a in algos),
            checkpoints=tuple(args.checkpoints),
            trials=args.trials,
            master_seed=args.seed,
            metrics=MetricSettings(
                epsilons=tuple(args.eps), p_levels=tuple(args.pvals), ndcg_k=args.ndcg_k
            ),
            workers=args.workers,
            output_csv=args.out_csv,
            output_json=args.out_json,
            output_timing=args.out_timing,
        )
    try:
        spec.validate()
    except InvalidConfigError as exc:
        parser.error(str(exc))
    report = run_experiment(spec)
    print(f"experiment complete: {len(report.trials)} trials, {len(report.aggregate)} aggregate rows")
    for target, label in ((spec.output_csv, "csv"), (spec.output_json, "json")):
        if target:
            print(f"{label} report written to {target}")
    return 0


def _replace_spec(spec: ExperimentSpec, **updates) -> ExperimentSpec:
    blob = spec.to_dict()
    output = blob["output"]
    output["csv"] = updates.get("output_csv", output["csv"])
    output["json"] = updates.get("output_json", output["json"])
    return ExperimentSpec.from_dict(blob)


def _cmd_metrics(args, parser) -> int:
    oracle = load_matrix(args.matrix, args.format)
    truth = oracle.ground_truth()
    predicted = args.prediction
    if not (0 <= predicted < oracle.m):
        parser.error(f"--prediction {predicted} out of range for m={oracle.m}")
    print(f"true best: {oracle.method_names[truth.best_index]} (index {truth.best_index})")
    for eps in args.eps:
        print(f"precision (gap eps={eps}): {precision_gap(truth, predicted, eps)}")
    for level in args.pvals:
        print(
            f"precision (significance p={level}): "
            f"{precision_significance(truth, predicted, level)}"
        )
    if args.ranking:
        k = min(args.ndcg_k, oracle.m)
        ranking = [int(x) for x in args.ranking.split(",")]
        print(f"ndcg@{k}: {ndcg_at_k(truth, ranking, k):.6f}")
    try:
        print(f"hardness: {hardness_h1(truth):.6f}")
    except ValueError:
        print("hardness: undefined (all methods tie exactly)")
    return 0


def _cmd_synth(args, parser) -> int:
    means = _parse_means(args.means, args.m)
    m = args.m or means.size
    profile = np.array(_parse_floats(args.column_profile)) if args.column_profile else None
    instance = synth_planted(
        m,
        args.n,
        means,
        noise=args.noise,
        sigma=args.sigma,
        stream=args.seed,
        column_profile=profile,
    )
    save_matrix(instance.oracle, args.out)
    sidecar = args.sidecar or str(args.out) + ".truth.json"
    truth = instance.truth
    blob = {
        "m": m,
        "n": args.n,
        "planted_means": [float(v) for v in instance.planted_means],
        "realized_means": [float(v) for v in truth.means],
        "best_index": truth.best_index,
        "hardness": truth.hardness,
    }
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(blob, fh, indent=2)
        fh.write("\n")
    print(f"matrix written to {args.out}")
    print(f"ground truth written to {sidecar}")
    return 0


def _cmd_inspect(args, parser) -> int:
    oracle = load_matrix(args.matrix, args.format)
    truth = oracle.ground_truth()
    print(f"methods: {oracle.m}")
    print(f"examples: {oracle.n}")
    print(f"mean range: [{truth.means.min():.6f}, {truth.means.max():.6f}]")
    print(f"best method: {oracle.method_names[truth.best_index]} (index {truth.best_index})")
    try:
        print(f"hardness: {hardness_h1(truth):.6f}")
    except ValueError:
        print("hardness: undefined (all methods tie exactly)")
    for idx, ratio in enumerate(singular_value_ratios(oracle.matrix), start=2):
        print(f"sigma{idx}/sigma1: {ratio:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lrbandit",
        description=(
            "Identify the best-performing method on a score matrix under a "
            "fixed evaluation budget."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one algorithm once and print its prediction")
    run_p.add_argument("--matrix", help="path to a CSV/JSON score matrix")
    run_p.add_argument("--format", choices=["csv", "json"], help="matrix format (default: by suffix)")
    run_p.add_argument("--remote", help="URL of a remote scoring endpoint")
    run_p.add_argument("--dims", type=_parse_dims, help="MxN dimensions for --remote")
    run_p.add_argument("--run-id", default="run", help="run identifier sent to the remote endpoint")
    run_p.add_argument("--timeout", type=float, default=10.0, help="remote request timeout seconds")
    run_p.add_argument("--retries", type=int, default=3, help="remote retry count (default 3)")
    run_p.add_argument("--algo", required=True, choices=sorted(ALGORITHMS))
    run_p.add_argument(
        "--budget-frac",
        type=float,
        default=1.0,
        help="budget as a fraction of all pairs, in (0, 1] (default 1.0)",
    )
    run_p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    _add_hyper_flags(run_p)
    run_p.add_argument("--out", help="write the trajectory JSON here")

    exp_p = sub.add_parser("experiment", help="run a seeded multi-trial algorithm grid")
    exp_p.add_argument("--spec", help="experiment spec JSON path")
    exp_p.add_argument("--matrix", help="score matrix path (inline spec)")
    exp_p.add_argument("--format", choices=["csv", "json"])
    exp_p.add_argument(
        "--algos",
        default=",".join(sorted(ALGORITHMS)),
        help="comma-separated algorithm names (default: all)",
    )
    exp_p.add_argument("--trials", type=int, default=50, help="trials per algorithm (default 50)")
    exp_p.add_argument(
        "--checkpoints",
        type=_parse_floats,
        default=list(DEFAULT_CHECKPOINTS),
        help="comma-separated budget fractions (default 0.05..1.0 step 0.05)",
    )
    exp_p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    exp_p.add_argument("--eps", type=_parse_floats, default=[0.001, 0.01],
                       help="gap thresholds (default 0.001,0.01)")
    exp_p.add_argument("--pvals", type=_parse_floats, default=[0.01, 0.1],
                       help="significance levels (default 0.01,0.1)")
    exp_p.add_argument("--ndcg-k", type=int, default=10, help="ranking depth (default 10)")
    exp_p.add_argument("--workers", type=int, default=None,
                       help=f"parallel trial workers (default ${WORKERS_ENV} or 1)")
    exp_p.add_argument("--out-csv", help="aggregate CSV path")
    exp_p.add_argument("--out-json", help="full per-trial JSON path")
    exp_p.add_argument("--out-timing", help="wall-time sidecar path")

    met_p = sub.add_parser("metrics", help="score a prediction against a full matrix")
    met_p.add_argument("--matrix", required=True)
    met_p.add_argument("--format", choices=["csv", "json"])
    met_p.add_argument("--prediction", type=int, required=True, help="predicted best index")
    met_p.add_argument("--ranking", help="comma-separated predicted ranking for NDCG")
    met_p.add_argument("--eps", type=_parse_floats, default=[0.001, 0.01])
    met_p.add_argument("--pvals", type=_parse_floats, default=[0.01, 0.1])
    met_p.add_argument("--ndcg-k", type=int, default=10)

    syn_p = sub.add_parser("synth", help="generate a planted matrix plus ground-truth sidecar")
    syn_p.add_argument("--m", type=int, help="method count (required for linspace means)")
    syn_p.add_argument("--n", type=int, required=True, help="example count")
    syn_p.add_argument("--means", required=True,
                       help="row means: 'linspace:0.3,0.7' or a comma list")
    syn_p.add_argument("--noise", choices=["none", "bernoulli", "gaussian"], default="none")
    syn_p.add_argument("--sigma", type=float, default=0.0, help="gaussian noise scale")
    syn_p.add_argument("--column-profile", help="comma list of positive example difficulties")
    syn_p.add_argument("--seed", type=int, default=0)
    syn_p.add_argument("--out", required=True, help="output CSV path")
    syn_p.add_argument("--sidecar", help="ground-truth JSON path (default <out>.truth.json)")

    ins_p = sub.add_parser("inspect", help="print matrix shape, hardness, and rank diagnostics")
    ins_p.add_argument("--matrix", required=True)
    ins_p.add_argument("--format", choices=["csv", "json"])

    return parser


_HANDLERS = {
    "run": _cmd_run,
    "experiment": _cmd_experiment,
    "metrics": _cmd_metrics,
    "synth": _cmd_synth,
    "inspect": _cmd_inspect,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args, parser)
    except InvalidConfigError as exc:
        parser.error(str(exc))
    except BrokenPipeError:
        return 1
    except Exception as exc:  # runtime failure: diagnostic + exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
