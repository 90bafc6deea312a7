"""Budgeted best-method selection on a score matrix: the exploration-bonus
bandit (select the method with the highest mean-plus-bonus bound, then a
uniform unseen example from its row) and the two non-learning baselines,
uniform pair sampling and column-at-a-time filling."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    AlgorithmConfig,
    CheckpointRecord,
    ExhaustedError,
    IndexPool,
    Prediction,
    RandomStream,
    RunResult,
    ScoringState,
    Trajectory,
    argmax_with_ties,
    as_stream,
)
from .oracle import ScoreOracle

__all__ = [
    "UcbState",
    "ucb_select",
    "ucb_update",
    "run_ucb_e",
    "run_row_mean_imputation",
    "run_filled_subset",
]


@dataclass
class UcbState:
    """Per-method upper bounds (infinite until first observation) and counts."""

    bounds: np.ndarray
    counts: np.ndarray

    @classmethod
    def fresh(cls, m: int) -> "UcbState":
        return cls(bounds=np.full(m, np.inf), counts=np.zeros(m, dtype=np.int64))


def exploration_bound(mean: float, count: int, exploration_a: float) -> float:
    return mean + math.sqrt(exploration_a / count)


def ucb_select(
    state: ScoringState, ucb: UcbState, rng: np.random.Generator
) -> tuple[int, int]:
    """One selection step: the bound-maximizing method among rows that still
    have unseen examples (ties uniform), then a uniform unseen example."""
    if state.is_full():
        raise ExhaustedError("every pair is already observed")
    eligible = ucb.counts < state.n
    i, _ = argmax_with_ties(ucb.bounds, rng, eligible=eligible)
    unseen = state.unobserved_in_row(i)
    j = int(unseen[rng.integers(unseen.size)])
    return i, j


def ucb_update(
    state: ScoringState, ucb: UcbState, i: int, exploration_a: float
) -> UcbState:
    """Refresh method i's bound from its observed mean and count."""
    count = state.row_count(i)
    ucb.counts[i] = count
    ucb.bounds[i] = exploration_bound(state.row_mean(i), count, exploration_a)
    return ucb


# ---------------------------------------------------------------------------
# Run loops
# ---------------------------------------------------------------------------

class _CheckpointSchedule:
    """Sorted evaluation counts at which a snapshot is captured."""

    def __init__(self, checkpoints: Sequence[int] | None, budget: int):
        pts = sorted({int(c) for c in checkpoints or ()})
        self.points = [p for p in pts if 1 <= p <= budget]
        self._next = 0

    def due(self, t: int) -> bool:
        fired = False
        while self._next < len(self.points) and self.points[self._next] <= t:
            fired = self.points[self._next] == t
            self._next += 1
        return fired


def _evaluate_means(
    trajectory: Trajectory, means: np.ndarray, stream: RandomStream, t: int
) -> tuple[int, tuple[int, ...]]:
    """Argmax of an estimated-means vector at evaluation count t.

    Ties break via the (seed, t)-labeled stream so that a checkpoint inside a
    longer run reproduces the shorter run's final prediction exactly.
    """
    rng = stream.child(f"predict-{t}").generator()
    nan_count = int(np.isnan(means).sum())
    if nan_count and not trajectory.warnings:
        trajectory.warnings.append(
            f"{nan_count} methods had no observations at t={t}; excluded from argmax"
        )
    return argmax_with_ties(means, rng)


def _capture(
    trajectory: Trajectory,
    means: np.ndarray,
    stream: RandomStream,
    t: int,
    start: float,
) -> None:
    best, ties = _evaluate_means(trajectory, means, stream, t)
    trajectory.checkpoints.append(
        CheckpointRecord(
            evaluations_used=t,
            best_index=best,
            estimated_means=means,
            tie_set=ties,
            wall_time=time.perf_counter() - start,
        )
    )


def _final_prediction(
    trajectory: Trajectory, means: np.ndarray, stream: RandomStream, t: int
) -> Prediction:
    best, ties = _evaluate_means(trajectory, means, stream, t)
    return Prediction(best_index=best, estimated_means=means, tie_set=ties)


def run_ucb_e(
    oracle: ScoreOracle,
    config: AlgorithmConfig,
    stream: RandomStream | int,
    checkpoints: Sequence[int] | None = None,
) -> RunResult:
    """Bound-guided selection under a total budget.

    Each batch fixes the bound-maximizing method once, draws up to
    ``batch_size`` of its unseen examples uniformly without replacement, and
    refreshes that method's bound after the batch.  The returned prediction
    is the plain observed-mean argmax; methods never sampled are excluded.
    """
    stream = as_stream(stream)
    m, n = oracle.m, oracle.n
    config.validate(m, n)
    budget = config.budget_total
    state = ScoringState(m, n)
    ucb = UcbState.fresh(m)
    select = stream.child("select").generator()
    trajectory = Trajectory("ucb-e", m, n)
    schedule = _CheckpointSchedule(checkpoints, budget)
    start = time.perf_counter()
    t = 0
    while t < budget:
        i, _ = argmax_with_ties(ucb.bounds, select, eligible=ucb.counts < n)
        row_pool = IndexPool(state.unobserved_in_row(i))
        take = min(config.batch_size, row_pool.size, budget - t)
        for _ in range(take):
            j = row_pool.draw(select)
            state.record(i, j, oracle.query(i, j))
            trajectory.pairs.append((i, j))
            t += 1
            if schedule.due(t):
                _capture(trajectory, state.means_vector(), stream, t, start)
        ucb_update(state, ucb, i, config.exploration_a)
    prediction = _final_prediction(trajectory, state.means_vector(), stream, t)
    return RunResult(prediction=prediction, trajectory=trajectory, state=state)


def run_row_mean_imputation(
    oracle: ScoreOracle,
    config: AlgorithmConfig,
    stream: RandomStream | int,
    checkpoints: Sequence[int] | None = None,
) -> RunResult:
    """Uniform without-replacement pair sampling; prediction is the observed-
    mean argmax over methods with at least one observation."""
    stream = as_stream(stream)
    m, n = oracle.m, oracle.n
    config.validate(m, n)
    budget = config.budget_total
    state = ScoringState(m, n)
    select = stream.child("select").generator()
    trajectory = Trajectory("row-mean", m, n)
    schedule = _CheckpointSchedule(checkpoints, budget)
    start = time.perf_counter()
    pool = IndexPool(np.arange(m * n))
    for t in range(1, budget + 1):
        code = pool.draw(select)
        i, j = divmod(code, n)
        state.record(i, j, oracle.query(i, j))
        trajectory.pairs.append((i, j))
        if schedule.due(t):
            _capture(trajectory, state.means_vector(), stream, t, start)
    prediction = _final_prediction(trajectory, state.means_vector(), stream, budget)
    return RunResult(prediction=prediction, trajectory=trajectory, state=state)


def run_filled_subset(
    oracle: ScoreOracle,
    config: AlgorithmConfig,
    stream: RandomStream | int,
    checkpoints: Sequence[int] | None = None,
) -> RunResult:
    """Evaluate every method on one uniformly drawn example column before
    moving to the next column, so at most one column is ever partial."""
    stream = as_stream(stream)
    m, n = oracle.m, oracle.n
    config.validate(m, n)
    budget = config.budget_total
    state = ScoringState(m, n)
    select = stream.child("select").generator()
    trajectory = Trajectory("filled-subset", m, n)
    schedule = _CheckpointSchedule(checkpoints, budget)
    start = time.perf_counter()
    column_pool = IndexPool(np.arange(n))
    j = column_pool.draw(select)
    method_pool = IndexPool(np.arange(m))
    for t in range(1, budget + 1):
        i = method_pool.draw(select)
        state.record(i, j, oracle.query(i, j))
        trajectory.pairs.append((i, j))
        if schedule.due(t):
            _capture(trajectory, state.means_vector(), stream, t, start)
        if method_pool.size == 0 and t < budget:
            j = column_pool.draw(select)
            method_pool = IndexPool(np.arange(m))
    prediction = _final_prediction(trajectory, state.means_vector(), stream, budget)
    return RunResult(prediction=prediction, trajectory=trajectory, state=state)
