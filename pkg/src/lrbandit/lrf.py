"""Low-rank completion of a partially observed score matrix: masked ALS
fits, bootstrap-style factor ensembles, the gated per-method score
estimate, and the ensemble-spread uncertainty matrix."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ._alsengine import (
    DegenerateSupportError,
    fit_members,
    member_spread_sq,
    sample_hidden,
)
from .core import AlgorithmConfig, AlsSettings, RandomStream, ScoringState, as_stream

__all__ = [
    "FactorPair",
    "FactorEnsemble",
    "DegenerateSupportError",
    "als_fit",
    "fit_ensemble",
    "gated_means",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FactorPair:
    """One rank-r factorization: ``u`` is (m, r), ``v`` is (n, r).

    ``objective_history`` traces the masked residual plus ridge penalty per
    alternation (index 0 is the random init); it is non-increasing.
    """

    u: np.ndarray
    v: np.ndarray
    objective_history: np.ndarray
    iterations: int

    def predict(self) -> np.ndarray:
        return self.u @ self.v.T


@dataclass(frozen=True)
class FactorEnsemble:
    """C member factorizations with their aggregated estimate and spread.

    ``estimate`` is the member-mean prediction clamped to [0, 1].
    ``uncertainty`` is the root-mean-square deviation of member predictions
    around the unclamped mean, zeroed on observed entries.
    """

    members: tuple[FactorPair, ...]
    estimate: np.ndarray
    uncertainty: np.ndarray


def _dense_views(state: ScoringState) -> tuple[np.ndarray, np.ndarray]:
    scores = np.where(state.mask, state.observed, 0.0)
    mask_f = state.mask.astype(float)
    return scores, mask_f


def als_fit(
    state: ScoringState,
    member_mask: np.ndarray,
    rank: int = 1,
    settings: AlsSettings | None = None,
    stream: RandomStream | int = 0,
) -> FactorPair:
    """Alternating ridge least squares on the entries of ``member_mask``.

    ``member_mask`` must be a subset of the state's observed support.  Factors
    start from small i.i.d. uniform entries and alternate exact row-wise
    solves until the relative objective change drops below the tolerance.
    """
    settings = settings or AlsSettings()
    settings.validate()
    member_mask = np.asarray(member_mask, dtype=bool)
    if member_mask.shape != state.mask.shape:
        raise ValueError("member_mask shape does not match the state")
    if (member_mask & ~state.mask).any():
        raise ValueError("member_mask must only select observed entries")
    if not member_mask.any():
        raise DegenerateSupportError("member_mask is entirely empty")

    hidden = state.mask & ~member_mask
    hid_rows, hid_cols = np.nonzero(hidden)
    scores, mask_f = _dense_views(state)
    rng = as_stream(stream).generator()
    u, v, history, iters = fit_members(
        scores,
        mask_f,
        hid_rows[None, :].astype(np.int64),
        hid_cols[None, :].astype(np.int64),
        rank,
        settings.max_iterations,
        settings.tolerance,
        settings.ridge,
        rng,
    )
    return _member_pair(u, v, history, iters, 0)


def _member_pair(u, v, history, iters, c) -> FactorPair:
    trace = history[c]
    trace = trace[~np.isnan(trace)]
    return FactorPair(
        u=np.ascontiguousarray(u[:, c, :]),
        v=np.ascontiguousarray(v[:, c, :]),
        objective_history=trace,
        iterations=int(iters[c]),
    )


def fit_ensemble(
    state: ScoringState,
    config: AlgorithmConfig,
    stream: RandomStream | int = 0,
) -> FactorEnsemble:
    """Fit C members, each hiding ``dropout_fraction`` of the observed
    entries, and aggregate their mean estimate and spread."""
    if state.evaluations_used == 0:
        raise DegenerateSupportError("cannot fit an ensemble with no observations")
    members = config.ensemble_size
    rank = config.rank
    rng = as_stream(stream).generator()

    flat_obs = np.flatnonzero(state.mask.reshape(-1))
    d = flat_obs.size
    hide = int(config.dropout_fraction * d)
    hidden_entries = sample_hidden(rng, d, hide, members)
    hid_flat = flat_obs[hidden_entries]
    hid_rows = (hid_flat // state.n).astype(np.int64)
    hid_cols = (hid_flat % state.n).astype(np.int64)

    scores, mask_f = _dense_views(state)
    u, v, history, iters = fit_members(
        scores,
        mask_f,
        hid_rows,
        hid_cols,
        rank,
        config.als.max_iterations,
        config.als.tolerance,
        config.als.ridge,
        rng,
    )

    m, n = state.m, state.n
    u2 = u.reshape(m, members * rank)
    v2 = v.reshape(n, members * rank)
    mean_unclamped = (u2 @ v2.T) / members
    if members == 1:
        # A single member never deviates from its own mean.
        uncertainty = np.zeros((m, n))
    else:
        uncertainty = np.sqrt(member_spread_sq(u, v, mean_unclamped))
        uncertainty[state.mask] = 0.0

    pairs = tuple(_member_pair(u, v, history, iters, c) for c in range(members))
    logger.debug(
        "ensemble fit: %d members, %d observations; estimate clamped to [0,1], "
        "spread measured around the unclamped mean",
        members,
        d,
    )
    return FactorEnsemble(
        members=pairs,
        estimate=np.clip(mean_unclamped, 0.0, 1.0),
        uncertainty=uncertainty,
    )


def gated_means(state: ScoringState, estimate: np.ndarray) -> np.ndarray:
    """Per-method means taking observed scores where available and the
    estimate elsewhere, each weighted 1/n."""
    estimate = np.asarray(estimate, dtype=float)
    if estimate.shape != (state.m, state.n):
        raise ValueError("estimate shape does not match the state")
    combined = np.where(state.mask, state.observed, estimate)
    return combined.sum(axis=1) / state.n
