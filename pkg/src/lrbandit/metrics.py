"""Ground-truth evaluation of predictions: top-1 precision under a
performance gap or a paired significance test, NDCG@K, and the hardness
quantity used to characterize instance difficulty."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2


class DegenerateTieError(ValueError):
    """Every method has exactly the same true mean."""


@dataclass(frozen=True)
class GroundTruth:
    """Full score matrix with its derived quantities.

    ``hardness`` is the sum of inverse squared gaps to the best mean over all
    methods that do not tie it exactly; None when every method ties.
    """

    matrix: np.ndarray
    means: np.ndarray
    best_index: int
    hardness: float | None

    @property
    def m(self) -> int:
        return int(self.means.shape[0])

    @property
    def n(self) -> int:
        return int(self.matrix.shape[1])


def ground_truth_from_matrix(matrix: np.ndarray) -> GroundTruth:
    """Derive means, best index, and hardness from a full score matrix."""
    s = np.asarray(matrix, dtype=float)
    if s.ndim != 2 or s.size == 0:
        raise ValueError("score matrix must be a non-empty 2-D array")
    means = s.mean(axis=1)
    best = int(np.argmax(means))
    gaps = means - means[best]
    nontied = gaps != 0.0
    hardness = float(np.sum(1.0 / gaps[nontied] ** 2)) if nontied.any() else None
    return GroundTruth(matrix=s, means=means, best_index=best, hardness=hardness)


def precision_gap(truth: GroundTruth, predicted: int, epsilon: float) -> int:
    """1 iff the predicted method's true mean is within ``epsilon`` of the best."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    return int(truth.means[predicted] >= truth.means[truth.best_index] - epsilon)


def discordant_counts(truth: GroundTruth, i: int, j: int) -> tuple[int, int]:
    """Per-example strict win counts for methods i and j; equal scores count for neither."""
    row_i = truth.matrix[i]
    row_j = truth.matrix[j]
    wins_i = int(np.sum(row_i > row_j))
    wins_j = int(np.sum(row_j > row_i))
    return wins_i, wins_j


def mcnemar_p(truth: GroundTruth, i: int, j: int, continuity: bool = True) -> float:
    """Paired-test p-value for methods i and j.

    With d discordant examples the statistic is (|wins_i - wins_j| - c)^2 / d
    (c = 1 with the default continuity correction) against a chi-squared
    distribution with one degree of freedom; d = 0 is declared
    non-significant (p = 1).
    """
    if i == j:
        raise ValueError("the paired test needs two distinct methods")
    wins_i, wins_j = discordant_counts(truth, i, j)
    d = wins_i + wins_j
    if d <= 0:
        return 1.0
    shift = 1.0 if continuity else 0.0
    stat = (abs(wins_i - wins_j) - shift) ** 2 / d
    return float(chi2.sf(stat, df=1))


def precision_significance(truth: GroundTruth, predicted: int, p_level: float) -> int:
    """1 iff the prediction is the best method or indistinguishable from it at ``p_level``."""
    if not (0.0 < p_level < 1.0):
        raise ValueError("p_level must lie in (0, 1)")
    if predicted == truth.best_index:
        return 1
    return int(mcnemar_p(truth, predicted, truth.best_index) > p_level)


def ndcg_at_k(truth: GroundTruth, predicted_ranking, k: int, gain: str = "mean") -> float:
    """Normalized discounted cumulative gain of the predicted top-k.

    The default gain of a method is its true mean; ``gain="rank"`` uses the
    method's true rank position instead (m - rank).  The discount at position
    p (1-based) is 1 / log2(p + 1).  Returns 1.0 when the ideal DCG is zero.
    """
    ranking = [int(r) for r in predicted_ranking]
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(ranking) < k:
        raise ValueError(f"ranking has {len(ranking)} entries, need at least k={k}")
    top = ranking[:k]
    if len(set(top)) != k:
        raise ValueError("duplicate indices in the predicted top-k")
    for r in top:
        if not (0 <= r < truth.m):
            raise IndexError(f"ranking index {r} out of range")
    if gain == "mean":
        gains = truth.means
    elif gain == "rank":
        order = np.argsort(-truth.means, kind="stable")
        gains = np.empty(truth.m)
        gains[order] = np.arange(truth.m, 0, -1, dtype=float)
    else:
        raise ValueError(f"unknown gain kind {gain!r}")
    discounts = 1.0 / np.log2(np.arange(2, k + 2))
    dcg = float(np.sum(gains[top] * discounts))
    ideal = np.sort(gains)[::-1][:k]
    idcg = float(np.sum(ideal * discounts))
    if idcg == 0.0:
        return 1.0
    return dcg / idcg


def hardness_h1(truth: GroundTruth) -> float:
    """Sum of 1/gap^2 over methods not tied with the best; errors if all tie."""
    if truth.hardness is None:
        raise DegenerateTieError("every method ties the best mean exactly")
    return truth.hardness


def equally_good_set(truth: GroundTruth, epsilon: float) -> np.ndarray:
    """Indices whose true mean is within ``epsilon`` of the best."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    return np.flatnonzero(truth.means >= truth.means[truth.best_index] - epsilon)


def singular_value_ratios(matrix: np.ndarray, count: int = 3) -> list[float]:
    """Ratios sigma_{i+1}/sigma_1 for i = 1..count, as low-rank diagnostics."""
    s = np.linalg.svd(np.asarray(matrix, dtype=float), compute_uv=False)
    if s[0] == 0:
        return [math.nan] * count
    out = []
    for idx in range(1, count + 1):
        out.append(float(s[idx] / s[0]) if idx < s.size else 0.0)
    return out
