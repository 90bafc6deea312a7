"""Factorization-guided budgeted selection: after a uniform warm-up, an
ensemble of masked low-rank fits supplies per-method bounds (gated mean plus
scaled uncertainty mass) and per-example uncertainty ranking.  Includes the
score-only ablation (uniform example choice) and the passive baseline that
samples uniformly and only uses the factorization for its final estimate."""

from __future__ import annotations

import time
from typing import Sequence

import numpy as np

from .bandit import _capture, _CheckpointSchedule, _final_prediction
from .core import (
    AlgorithmConfig,
    IndexPool,
    RandomStream,
    RunResult,
    ScoringState,
    Trajectory,
    argmax_with_ties,
    as_stream,
)
from .lrf import FactorEnsemble, fit_ensemble, gated_means
from .oracle import ScoreOracle

__all__ = [
    "warmup",
    "run_ucb_e_lrf",
    "run_ucb_e_lrf_score_only",
    "run_lrf_baseline",
]


def warmup(
    oracle: ScoreOracle,
    state: ScoringState,
    warmup_budget: int,
    stream: RandomStream | int,
) -> ScoringState:
    """Observe ``warmup_budget`` distinct pairs drawn uniformly without
    replacement from the state's unobserved pairs."""
    remaining = state.m * state.n - state.evaluations_used
    if warmup_budget > remaining:
        raise ValueError(f"warm-up budget {warmup_budget} exceeds {remaining} unobserved pairs")
    rng = as_stream(stream).child("select").generator()
    pool = IndexPool(np.flatnonzero(~state.mask.reshape(-1)))
    for _ in range(warmup_budget):
        code = pool.draw(rng)
        i, j = divmod(code, state.n)
        state.record(i, j, oracle.query(i, j))
    return state


def _bounds_from(ensemble: FactorEnsemble, state: ScoringState, scale: float) -> tuple[np.ndarray, np.ndarray]:
    """Gated means plus the scaled per-method uncertainty mass.

    Computed as mean + (scale / n) * row-sum of uncertainty so the bound
    decomposes exactly into its estimate and exploration parts.
    """
    means = gated_means(state, ensemble.estimate)
    bounds = means + (scale / state.n) * ensemble.uncertainty.sum(axis=1)
    return means, bounds


def _run_lrf_family(
    oracle: ScoreOracle,
    config: AlgorithmConfig,
    stream: RandomStream | int,
    checkpoints: Sequence[int] | None,
    variant: str,
) -> RunResult:
    stream = as_stream(stream)
    m, n = oracle.m, oracle.n
    config.validate(m, n, needs_warmup=True)
    budget = config.budget_total
    t0 = config.resolved_warmup(m, n)
    state = ScoringState(m, n)
    select = stream.child("select").generator()
    trajectory = Trajectory(variant, m, n)
    # Estimates exist only once the warm-up fit is available.
    schedule = _CheckpointSchedule([c for c in checkpoints or () if c >= t0], budget)
    start = time.perf_counter()

    def ensemble_at(t: int) -> FactorEnsemble:
        return fit_ensemble(state, config, stream.child(f"fit-{t}"))

    pool = IndexPool(np.arange(m * n))
    counts = np.zeros(m, dtype=np.int64)
    t = 0
    for _ in range(t0):
        code = pool.draw(select)
        i, j = divmod(code, n)
        state.record(i, j, oracle.query(i, j))
        trajectory.pairs.append((i, j))
        counts[i] += 1
        t += 1

    if variant == "lrf":
        # Selection never consults the fits, so they are computed only where
        # an estimate is reported: at checkpoints and for the final answer.
        if schedule.due(t):
            rep = ensemble_at(t)
            trajectory.reporting_fits += 1
            _capture(trajectory, gated_means(state, rep.estimate), stream, t, start)
        for t in range(t0 + 1, budget + 1):
            code = pool.draw(select)
            i, j = divmod(code, n)
            state.record(i, j, oracle.query(i, j))
            trajectory.pairs.append((i, j))
            if schedule.due(t):
                rep = ensemble_at(t)
                trajectory.reporting_fits += 1
                _capture(trajectory, gated_means(state, rep.estimate), stream, t, start)
        final = ensemble_at(budget)
        trajectory.ensemble_fits += 1
        means = gated_means(state, final.estimate)
        prediction = _final_prediction(trajectory, means, stream, budget)
        return RunResult(prediction=prediction, trajectory=trajectory, state=state)

    ensemble = ensemble_at(t)
    trajectory.ensemble_fits += 1
    means, bounds = _bounds_from(ensemble, state, config.uncertainty_scale)
    if schedule.due(t):
        _capture(trajectory, means, stream, t, start)

    score_only = variant == "ucb-e-lrf-score-only"
    while t < budget:
        i, _ = argmax_with_ties(bounds, select, eligible=counts < n)
        unseen = state.unobserved_in_row(i)
        take = min(config.batch_size, unseen.size, budget - t)
        if score_only:
            row_pool = IndexPool(unseen)
            batch = [row_pool.draw(select) for _ in range(take)]
        else:
            tie_keys = select.random(unseen.size)
            order = np.lexsort((tie_keys, -ensemble.uncertainty[i, unseen]))
            batch = [int(j) for j in unseen[order][:take]]
        batch_end = t + take
        pending_capture = False
        for j in batch:
            state.record(i, j, oracle.query(i, j))
            trajectory.pairs.append((i, j))
            t += 1
            if schedule.due(t):
                if t == batch_end:
                    pending_capture = True
                else:
                    rep = ensemble_at(t)
                    trajectory.reporting_fits += 1
                    _capture(trajectory, gated_means(state, rep.estimate), stream, t, start)
        counts[i] += take
        ensemble = ensemble_at(t)
        trajectory.ensemble_fits += 1
        means, bounds = _bounds_from(ensemble, state, config.uncertainty_scale)
        if pending_capture:
            _capture(trajectory, means, stream, t, start)

    prediction = _final_prediction(trajectory, means, stream, budget)
    return RunResult(prediction=prediction, trajectory=trajectory, state=state)


def run_ucb_e_lrf(
    oracle: ScoreOracle,
    config: AlgorithmConfig,
    stream: RandomStream | int,
    checkpoints: Sequence[int] | None = None,
) -> RunResult:
    """Warm up uniformly, then per batch: refit the ensemble, pick the
    bound-maximizing incomplete method, and evaluate its unseen examples in
    descending-uncertainty order.  The prediction is the gated-mean argmax;
    the uncertainty term never enters the final answer."""
    return _run_lrf_family(oracle, config, stream, checkpoints, "ucb-e-lrf")


def run_ucb_e_lrf_score_only(
    oracle: ScoreOracle,
    config: AlgorithmConfig,
    stream: RandomStream | int,
    checkpoints: Sequence[int] | None = None,
) -> RunResult:
    """Ablation of :func:`run_ucb_e_lrf` that draws examples within the
    chosen method's row uniformly instead of by descending uncertainty."""
    return _run_lrf_family(oracle, config, stream, checkpoints, "ucb-e-lrf-score-only")


def run_lrf_baseline(
    oracle: ScoreOracle,
    config: AlgorithmConfig,
    stream: RandomStream | int,
    checkpoints: Sequence[int] | None = None,
) -> RunResult:
    """Uniform pair sampling (identical pair sequence to the row-mean
    baseline under the same stream); only the final estimator differs, using
    the ensemble's gated means."""
    return _run_lrf_family(oracle, config, stream, checkpoints, "lrf")
