"""Seeded multi-trial experiment runner: run an algorithm grid once per
trial at the largest requested budget, score the prediction at every
checkpoint (valid because each run's prefix is the shorter-budget run), and
aggregate metric means with standard errors into CSV/JSON reports."""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bandit import run_filled_subset, run_row_mean_imputation, run_ucb_e
from .core import AlgorithmConfig, AlsSettings, InvalidConfigError, RandomStream
from .metrics import (
    GroundTruth,
    ndcg_at_k,
    precision_gap,
    precision_significance,
    mcnemar_p,
)
from .oracle import MatrixOracle, load_matrix, synth_planted
from .ucbelrf import run_lrf_baseline, run_ucb_e_lrf, run_ucb_e_lrf_score_only

ALGORITHMS = {
    "ucb-e": run_ucb_e,
    "ucb-e-lrf": run_ucb_e_lrf,
    "ucb-e-lrf-score-only": run_ucb_e_lrf_score_only,
    "lrf": run_lrf_baseline,
    "row-mean": run_row_mean_imputation,
    "filled-subset": run_filled_subset,
}

WORKERS_ENV = "LRBANDIT_WORKERS"

DEFAULT_CHECKPOINTS = tuple(round(0.05 * k, 2) for k in range(1, 21))


@dataclass(frozen=True)
class MetricSettings:
    epsilons: tuple[float, ...] = (0.001, 0.01)
    p_levels: tuple[float, ...] = (0.01, 0.1)
    ndcg_k: int = 10


@dataclass(frozen=True)
class OracleSource:
    """Descriptor for the score source of an experiment.

    kind "matrix" loads a score file; kind "synth" generates a planted
    instance.  Experiments need the full matrix for ground-truth metrics, so
    remote endpoints are supported by the single-run path only.
    """

    kind: str
    path: str | None = None
    format: str | None = None
    m: int | None = None
    n: int | None = None
    means: tuple[float, ...] | None = None
    noise: str = "none"
    sigma: float = 0.0
    seed: int = 0
    column_profile: tuple[float, ...] | None = None

    def build(self) -> tuple[MatrixOracle, GroundTruth]:
        if self.kind == "matrix":
            oracle = load_matrix(self.path, self.format)
            return oracle, oracle.ground_truth()
        if self.kind == "synth":
            inst = synth_planted(
                self.m,
                self.n,
                self.means,
                noise=self.noise,
                sigma=self.sigma,
                stream=self.seed,
                column_profile=self.column_profile,
            )
            return inst.oracle, inst.truth
        raise InvalidConfigError(f"experiments need a matrix or synth source, got {self.kind!r}")

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for key, value in asdict(self).items():
            if key != "kind" and value is not None:
                out[key] = list(value) if isinstance(value, tuple) else value
        return out

    @classmethod
    def from_dict(cls, blob: dict) -> "OracleSource":
        blob = dict(blob)
        for key in ("means", "column_profile"):
            if blob.get(key) is not None:
                blob[key] = tuple(blob[key])
        return cls(**blob)


@dataclass(frozen=True)
class AlgorithmEntry:
    name: str
    config: dict = field(default_factory=dict)

    def build_config(self, budget: int) -> AlgorithmConfig:
        overrides = dict(self.config)
        als = AlsSettings(**overrides.pop("als")) if "als" in overrides else AlsSettings()
        if "batch_size" not in overrides:
            overrides["batch_size"] = min(32, budget)
        return AlgorithmConfig(budget_total=budget, als=als, **overrides)


@dataclass(frozen=True)
class ExperimentSpec:
    oracle: OracleSource
    algorithms: tuple[AlgorithmEntry, ...]
    checkpoints: tuple[float, ...] = DEFAULT_CHECKPOINTS
    trials: int = 50
    master_seed: int = 0
    metrics: MetricSettings = field(default_factory=MetricSettings)
    workers: int | None = None
    output_csv: str | None = None
    output_json: str | None = None
    output_timing: str | None = None

    def validate(self) -> None:
        if self.trials < 1:
            raise InvalidConfigError("trials must be >= 1")
        if not self.algorithms:
            raise InvalidConfigError("at least one algorithm is required")
        pts = list(self.checkpoints)
        if not pts or any(not (0.0 < p <= 1.0) for p in pts):
            raise InvalidConfigError("checkpoints must lie in (0, 1]")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise InvalidConfigError("checkpoints must be strictly increasing")
        for entry in self.algorithms:
            if entry.name not in ALGORITHMS:
                raise InvalidConfigError(
                    f"unknown algorithm {entry.name!r}; choose from {sorted(ALGORITHMS)}"
                )

    def to_dict(self) -> dict:
        return {
            "oracle": self.oracle.to_dict(),
            "algorithms": [{"name": a.name, "config": a.config} for a in self.algorithms],
            "checkpoints": list(self.checkpoints),
            "trials": self.trials,
            "master_seed": self.master_seed,
            "metrics": {
                "epsilons": list(self.metrics.epsilons),
                "p_levels": list(self.metrics.p_levels),
                "ndcg_k": self.metrics.ndcg_k,
            },
            "workers": self.workers,
            "output": {
                "csv": self.output_csv,
                "json": self.output_json,
                "timing": self.output_timing,
            },
        }

    @classmethod
    def from_dict(cls, blob: dict) -> "ExperimentSpec":
        metrics = blob.get("metrics", {})
        output = blob.get("output", {})
        return cls(
            oracle=OracleSource.from_dict(blob["oracle"]),
            algorithms=tuple(
                AlgorithmEntry(a["name"], dict(a.get("config", {})))
                for a in blob["algorithms"]
            ),
            checkpoints=tuple(blob.get("checkpoints", DEFAULT_CHECKPOINTS)),
            trials=int(blob.get("trials", 50)),
            master_seed=int(blob.get("master_seed", 0)),
            metrics=MetricSettings(
                epsilons=tuple(metrics.get("epsilons", (0.001, 0.01))),
                p_levels=tuple(metrics.get("p_levels", (0.01, 0.1))),
                ndcg_k=int(metrics.get("ndcg_k", 10)),
            ),
            workers=blob.get("workers"),
            output_csv=output.get("csv"),
            output_json=output.get("json"),
            output_timing=output.get("timing"),
        )


def load_experiment_spec(path) -> ExperimentSpec:
    with open(path, encoding="utf-8") as fh:
        return ExperimentSpec.from_dict(json.load(fh))


@dataclass
class TrialResult:
    """Per-checkpoint outcomes of one seeded run of one algorithm."""

    algorithm: str
    trial_index: int
    records: list[dict]
    wall_time: float


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    m: int
    n: int
    ndcg_k: int
    aggregate: list[dict]
    trials: list[TrialResult]
    status: str = "complete"
    error: str | None = None


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _checkpoint_counts(fractions, m: int, n: int) -> dict[float, int]:
    total = m * n
    return {f: max(1, math.floor(f * total)) for f in fractions}


def _trial_metrics(
    truth: GroundTruth,
    means: np.ndarray,
    best: int,
    settings: MetricSettings,
    ndcg_k: int,
    p_cache: dict[int, float],
) -> dict:
    out: dict = {"precision_gap": {}, "precision_significance": {}, "ndcg": {}}
    for eps in settings.epsilons:
        out["precision_gap"][repr(eps)] = precision_gap(truth, best, eps)
    for level in settings.p_levels:
        if best == truth.best_index:
            value = 1
        else:
            if best not in p_cache:
                p_cache[best] = mcnemar_p(truth, best, truth.best_index)
            value = int(p_cache[best] > level)
        out["precision_significance"][repr(level)] = value
    order = np.argsort(-means, kind="stable")
    out["ndcg"][repr(ndcg_k)] = ndcg_at_k(truth, order, ndcg_k)
    return out


def _run_single_trial(
    oracle: MatrixOracle,
    truth: GroundTruth,
    entry: AlgorithmEntry,
    trial_index: int,
    spec: ExperimentSpec,
    counts_by_fraction: dict[float, int],
    ndcg_k: int,
    p_cache: dict[int, float],
) -> TrialResult:
    budget = max(counts_by_fraction.values())
    config = entry.build_config(budget)
    stream = RandomStream(spec.master_seed).child(entry.name).child(f"trial-{trial_index}")
    trial_start = time.perf_counter()
    result = ALGORITHMS[entry.name](
        oracle, config, stream, checkpoints=sorted(set(counts_by_fraction.values()))
    )
    by_count = {rec.evaluations_used: rec for rec in result.trajectory.checkpoints}
    records = []
    for fraction in spec.checkpoints:
        rec = by_count.get(counts_by_fraction[fraction])
        if rec is None:
            continue  # below the algorithm's warm-up: no estimate exists there
        records.append(
            {
                "checkpoint_fraction": fraction,
                "evaluations_used": rec.evaluations_used,
                "best_index": rec.best_index,
                "estimated_means": [
                    None if math.isnan(v) else float(v) for v in rec.estimated_means
                ],
                "metrics": _trial_metrics(
                    truth, rec.estimated_means, rec.best_index, spec.metrics, ndcg_k, p_cache
                ),
                "wall_time": rec.wall_time,
            }
        )
    return TrialResult(
        algorithm=entry.name,
        trial_index=trial_index,
        records=records,
        wall_time=time.perf_counter() - trial_start,
    )


_WORKER_CONTEXT: dict = {}


def _worker_init(matrix, names, ids, spec_dict):
    _WORKER_CONTEXT["oracle"] = MatrixOracle(matrix, names, ids)
    _WORKER_CONTEXT["truth"] = _WORKER_CONTEXT["oracle"].ground_truth()
    _WORKER_CONTEXT["spec"] = ExperimentSpec.from_dict(spec_dict)
    _WORKER_CONTEXT["p_cache"] = {}


def _worker_run(task):
    entry_name, entry_config, trial_index, counts_by_fraction, ndcg_k = task
    spec = _WORKER_CONTEXT["spec"]
    return _run_single_trial(
        _WORKER_CONTEXT["oracle"],
        _WORKER_CONTEXT["truth"],
        AlgorithmEntry(entry_name, entry_config),
        trial_index,
        spec,
        counts_by_fraction,
        ndcg_k,
        _WORKER_CONTEXT["p_cache"],
    )


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """Run every algorithm for every trial and aggregate metrics.

    Each trial runs once at the largest checkpoint budget; earlier
    checkpoints re-score the prediction from the trajectory snapshot, which
    matches an independent shorter run exactly (prefix property).  Writes the
    spec's output files; on failure a partial JSON is flushed with a failure
    marker before the error propagates.
    """
    spec.validate()
    oracle, truth = spec.oracle.build()
    counts_by_fraction = _checkpoint_counts(spec.checkpoints, oracle.m, oracle.n)
    ndcg_k = min(spec.metrics.ndcg_k, oracle.m)
    tasks = [
        (entry, trial)
        for entry in spec.algorithms
        for trial in range(spec.trials)
    ]
    trials: list[TrialResult] = []
    workers = spec.workers or default_workers()
    try:
        if workers > 1:
            with ProcessPoolExecutor(
                max_workers=workers,
                initializer=_worker_init,
                initargs=(
                    np.asarray(oracle.matrix),
                    oracle.method_names,
                    oracle.example_ids,
                    spec.to_dict(),
                ),
            ) as pool:
                payload = [
                    (entry.name, entry.config, trial, counts_by_fraction, ndcg_k)
                    for entry, trial in tasks
                ]
                trials = list(pool.map(_worker_run, payload, chunksize=1))
        else:
            p_cache: dict[int, float] = {}
            for entry, trial in tasks:
                trials.append(
                    _run_single_trial(
                        oracle, truth, entry, trial, spec, counts_by_fraction, ndcg_k, p_cache
                    )
                )
    except Exception as exc:
        report = ExperimentReport(
            spec=spec,
            m=oracle.m,
            n=oracle.n,
            ndcg_k=ndcg_k,
            aggregate=[],
            trials=trials,
            status="failed",
            error=f"{type(exc).__name__}: {exc}",
        )
        if spec.output_json:
            write_report(report, spec.output_json, "json")
        raise

    trials.sort(key=lambda tr: (tr.algorithm, tr.trial_index))
    report = ExperimentReport(
        spec=spec,
        m=oracle.m,
        n=oracle.n,
        ndcg_k=ndcg_k,
        aggregate=_aggregate(spec, trials, ndcg_k),
        trials=trials,
    )
    if spec.output_csv:
        write_report(report, spec.output_csv, "csv")
    if spec.output_json:
        write_report(report, spec.output_json, "json")
    if spec.output_timing:
        _write_timing(report, spec.output_timing)
    return report


def _aggregate(spec: ExperimentSpec, trials: list[TrialResult], ndcg_k: int) -> list[dict]:
    rows = []
    metric_items = [("precision_gap", repr(eps)) for eps in spec.metrics.epsilons]
    metric_items += [("precision_significance", repr(p)) for p in spec.metrics.p_levels]
    metric_items.append(("ndcg", repr(ndcg_k)))
    for name in [entry.name for entry in spec.algorithms]:
        mine = [tr for tr in trials if tr.algorithm == name]
        for fraction in spec.checkpoints:
            recs = [
                rec
                for tr in mine
                for rec in tr.records
                if rec["checkpoint_fraction"] == fraction
            ]
            if not recs:
                continue
            for metric_name, param in metric_items:
                values = np.array(
                    [rec["metrics"][metric_name][param] for rec in recs], dtype=float
                )
                stderr = (
                    float(values.std(ddof=1) / math.sqrt(values.size))
                    if values.size > 1
                    else 0.0
                )
                rows.append(
                    {
                        "algorithm": name,
                        "checkpoint_fraction": fraction,
                        "metric_name": metric_name,
                        "metric_param": param,
                        "mean_value": float(values.mean()),
                        "trial_count": int(values.size),
                        "stderr": stderr,
                    }
                )
    return rows


def write_report(report: ExperimentReport, path, format: str) -> None:
    """Write the aggregate table (csv) or the full per-trial detail (json)."""
    path = Path(path)
    if format == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "algorithm",
                    "checkpoint_fraction",
                    "metric_name",
                    "metric_param",
                    "mean_value",
                    "trial_count",
                    "stderr",
                ]
            )
            for row in report.aggregate:
                writer.writerow(
                    [
                        row["algorithm"],
                        repr(row["checkpoint_fraction"]),
                        row["metric_name"],
                        row["metric_param"],
                        repr(row["mean_value"]),
                        row["trial_count"],
                        repr(row["stderr"]),
                    ]
                )
    elif format == "json":
        blob = {
            "status": report.status,
            "error": report.error,
            "m": report.m,
            "n": report.n,
            "ndcg_k": report.ndcg_k,
            "spec": report.spec.to_dict(),
            "aggregate": report.aggregate,
            "trials": [
                {
                    "algorithm": tr.algorithm,
                    "trial_index": tr.trial_index,
                    "records": [
                        {k: v for k, v in rec.items() if k != "wall_time"}
                        for rec in tr.records
                    ],
                }
                for tr in report.trials
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(blob, fh)
            fh.write("\n")
    else:
        raise ValueError(f"unknown report format {format!r}")


def _write_timing(report: ExperimentReport, path) -> None:
    """Wall-clock accounting; kept out of the deterministic report files."""
    per_algo: dict[str, list[float]] = {}
    for tr in report.trials:
        per_algo.setdefault(tr.algorithm, []).append(tr.wall_time)
    blob = {
        "per_algorithm": {
            name: {
                "mean_trial_seconds": float(np.mean(times)),
                "total_seconds": float(np.sum(times)),
            }
            for name, times in sorted(per_algo.items())
        },
        "total_seconds": float(sum(tr.wall_time for tr in report.trials)),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh, indent=2)
        fh.write("\n")
