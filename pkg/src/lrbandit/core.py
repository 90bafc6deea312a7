"""Shared domain types: scoring state, run configuration, predictions,
trajectories, and the labeled deterministic-randomness tree."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MethodIndex = int
ExampleIndex = int


class DuplicateObservationError(ValueError):
    """A (method, example) pair was recorded twice."""


class ScoreRangeError(ValueError):
    """A score fell outside [0, 1]."""


class EmptyRowError(ValueError):
    """A per-method statistic was requested for a method with no observations."""


class ExhaustedError(RuntimeError):
    """A selection was requested but every pair is already observed."""


class InvalidConfigError(ValueError):
    """Configuration violates an invariant (budget, batch, warm-up, ...)."""


# ---------------------------------------------------------------------------
# Randomness
# ---------------------------------------------------------------------------

def _mix_seed(seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{seed}\x1f{label}".encode()).digest()
    return int.from_bytes(digest[:16], "little")


def derive_rng(master_seed: int, stream_label: str) -> np.random.Generator:
    """Deterministic generator for (seed, label).

    Identical (seed, label) pairs always yield the identical stream;
    distinct labels (or seeds) yield independent streams.
    """
    return RandomStream(master_seed).child(stream_label).generator()


@dataclass(frozen=True)
class RandomStream:
    """A node in a labeled randomness tree rooted at an integer seed.

    ``child(label)`` derives an independent sub-stream; ``generator()``
    materializes the numpy generator for this node.  Deriving children never
    consumes randomness from the parent, so sibling streams are insensitive
    to each other's usage.
    """

    seed: int

    def child(self, label: str) -> "RandomStream":
        return RandomStream(_mix_seed(self.seed, label))

    def generator(self) -> np.random.Generator:
        words = np.frombuffer(
            hashlib.sha256(f"{self.seed}\x1fgen".encode()).digest(), dtype=np.uint32
        )
        return np.random.default_rng(np.random.SeedSequence(words.tolist()))


def as_stream(stream: "RandomStream | int") -> "RandomStream":
    """Coerce an integer seed into a RandomStream; pass streams through."""
    if isinstance(stream, RandomStream):
        return stream
    return RandomStream(int(stream))


# ---------------------------------------------------------------------------
# Scoring state
# ---------------------------------------------------------------------------

class ScoringState:
    """Partially observed m-by-n score matrix.

    ``observed`` holds scores where ``mask`` is True and NaN elsewhere;
    ``evaluations_used`` always equals ``mask.sum()``.  All mutation goes
    through :meth:`record`.
    """

    __slots__ = ("m", "n", "observed", "mask", "evaluations_used")

    def __init__(self, m: int, n: int):
        if m < 1 or n < 1:
            raise InvalidConfigError(f"matrix dimensions must be positive, got {m}x{n}")
        self.m = m
        self.n = n
        self.observed = np.full((m, n), np.nan)
        self.mask = np.zeros((m, n), dtype=bool)
        self.evaluations_used = 0

    def record(self, i: MethodIndex, j: ExampleIndex, score: float) -> None:
        """Store one evaluation.  Rejects duplicates and out-of-range scores."""
        if not (0 <= i < self.m and 0 <= j < self.n):
            raise IndexError(f"pair ({i}, {j}) outside {self.m}x{self.n} matrix")
        if self.mask[i, j]:
            raise DuplicateObservationError(f"pair ({i}, {j}) was already observed")
        if not (0.0 <= score <= 1.0) or not math.isfinite(score):
            raise ScoreRangeError(f"score {score!r} for pair ({i}, {j}) outside [0, 1]")
        self.observed[i, j] = score
        self.mask[i, j] = True
        self.evaluations_used += 1

    def row_count(self, i: MethodIndex) -> int:
        return int(self.mask[i].sum())

    def row_counts(self) -> np.ndarray:
        return self.mask.sum(axis=1)

    def row_mean(self, i: MethodIndex) -> float:
        """Mean of the observed scores in row ``i``."""
        row_mask = self.mask[i]
        k = int(row_mask.sum())
        if k == 0:
            raise EmptyRowError(f"method {i} has no observations")
        return float(self.observed[i][row_mask].sum() / k)

    def means_vector(self) -> np.ndarray:
        """Per-method observed means; NaN for methods with no observations."""
        out = np.full(self.m, np.nan)
        for i in range(self.m):
            if self.mask[i].any():
                out[i] = self.row_mean(i)
        return out

    def unobserved_in_row(self, i: MethodIndex) -> np.ndarray:
        return np.flatnonzero(~self.mask[i])

    def is_full(self) -> bool:
        return self.evaluations_used == self.m * self.n

    def copy(self) -> "ScoringState":
        dup = ScoringState(self.m, self.n)
        dup.observed = self.observed.copy()
        dup.mask = self.mask.copy()
        dup.evaluations_used = self.evaluations_used
        return dup


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AlsSettings:
    """Inner-solver settings for the alternating least squares fits."""

    max_iterations: int = 50
    tolerance: float = 1e-6
    ridge: float = 1e-6

    def validate(self) -> None:
        if self.max_iterations < 1:
            raise InvalidConfigError("als.max_iterations must be >= 1")
        if self.tolerance < 0:
            raise InvalidConfigError("als.tolerance must be >= 0")
        if self.ridge < 0:
            raise InvalidConfigError("als.ridge must be >= 0")


@dataclass(frozen=True)
class AlgorithmConfig:
    """All run hyperparameters.

    Defaults: exploration_a=1, rank=1, ensemble_size=64, uncertainty_scale=5,
    batch_size=32, warm-up = ceil(0.05 * m * n) when ``warmup_budget`` is None.
    """

    budget_total: int
    exploration_a: float = 1.0
    rank: int = 1
    ensemble_size: int = 64
    warmup_budget: int | None = None
    warmup_fraction: float = 0.05
    uncertainty_scale: float = 5.0
    batch_size: int = 32
    dropout_fraction: float = 0.1
    als: AlsSettings = field(default_factory=AlsSettings)

    def resolved_warmup(self, m: int, n: int) -> int:
        if self.warmup_budget is not None:
            return int(self.warmup_budget)
        return int(math.ceil(self.warmup_fraction * m * n))

    def validate(self, m: int, n: int, needs_warmup: bool = False) -> None:
        if self.budget_total < 1:
            raise InvalidConfigError("budget_total must be >= 1")
        if self.budget_total > m * n:
            raise InvalidConfigError(
                f"budget_total {self.budget_total} exceeds the {m}x{n}={m * n} pair count"
            )
        if self.batch_size < 1:
            raise InvalidConfigError("batch_size must be >= 1")
        if self.batch_size > self.budget_total:
            raise InvalidConfigError("batch_size must not exceed budget_total")
        if self.exploration_a < 0:
            raise InvalidConfigError("exploration_a must be >= 0")
        if self.uncertainty_scale < 0:
            raise InvalidConfigError("uncertainty_scale must be >= 0")
        if self.rank < 1:
            raise InvalidConfigError("rank must be >= 1")
        if self.ensemble_size < 1:
            raise InvalidConfigError("ensemble_size must be >= 1")
        if not (0.0 <= self.dropout_fraction < 1.0):
            raise InvalidConfigError("dropout_fraction must lie in [0, 1)")
        if not (0.0 < self.warmup_fraction <= 1.0):
            raise InvalidConfigError("warmup_fraction must lie in (0, 1]")
        self.als.validate()
        if needs_warmup:
            t0 = self.resolved_warmup(m, n)
            if t0 < 1:
                raise InvalidConfigError("warm-up budget must be >= 1")
            if t0 >= self.budget_total:
                raise InvalidConfigError(
                    f"warm-up budget {t0} must be smaller than budget_total {self.budget_total}"
                )


# ---------------------------------------------------------------------------
# Predictions and trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Prediction:
    """A predicted best method with the estimated per-method means.

    ``tie_set`` records the indices that tied exactly for the top estimate
    whenever the winner was drawn at random among more than one.
    """

    best_index: MethodIndex
    estimated_means: np.ndarray
    tie_set: tuple[int, ...] = ()


@dataclass
class CheckpointRecord:
    evaluations_used: int
    best_index: MethodIndex
    estimated_means: np.ndarray
    tie_set: tuple[int, ...] = ()
    wall_time: float = 0.0


@dataclass
class Trajectory:
    """Ordered record of one run: every evaluated pair plus checkpoint snapshots."""

    algorithm: str
    m: int
    n: int
    pairs: list[tuple[int, int]] = field(default_factory=list)
    checkpoints: list[CheckpointRecord] = field(default_factory=list)
    ensemble_fits: int = 0
    reporting_fits: int = 0
    warnings: list[str] = field(default_factory=list)

    def canonical_dict(self) -> dict:
        """Deterministic representation; excludes wall-clock timing."""
        return {
            "algorithm": self.algorithm,
            "m": self.m,
            "n": self.n,
            "pairs": [list(p) for p in self.pairs],
            "checkpoints": [
                {
                    "evaluations_used": c.evaluations_used,
                    "best_index": c.best_index,
                    "estimated_means": [None if math.isnan(v) else v for v in c.estimated_means],
                    "tie_set": list(c.tie_set),
                }
                for c in self.checkpoints
            ],
            "ensemble_fits": self.ensemble_fits,
            "warnings": list(self.warnings),
        }

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.canonical_dict(), sort_keys=True).encode()


@dataclass
class RunResult:
    prediction: Prediction
    trajectory: Trajectory
    state: ScoringState


# ---------------------------------------------------------------------------
# Selection helpers
# ---------------------------------------------------------------------------

def argmax_with_ties(
    values: np.ndarray,
    rng: np.random.Generator,
    eligible: np.ndarray | None = None,
) -> tuple[int, tuple[int, ...]]:
    """Index of the maximum of ``values`` over ``eligible`` entries.

    Exact ties are broken by a uniform draw from the tied set; the stream is
    consumed only when more than one entry ties.  NaN entries never win.
    """
    vals = np.asarray(values, dtype=float)
    ok = ~np.isnan(vals)
    if eligible is not None:
        ok &= eligible
    candidates = np.flatnonzero(ok)
    if candidates.size == 0:
        raise ExhaustedError("no eligible entries for argmax")
    top = np.max(vals[candidates])
    tied = candidates[vals[candidates] == top]
    if tied.size == 1:
        return int(tied[0]), ()
    pick = int(tied[rng.integers(tied.size)])
    return pick, tuple(int(x) for x in tied)


class IndexPool:
    """Uniform without-replacement draws from a shrinking index set.

    One stream draw per item, so any truncation of a draw sequence is the
    exact prefix of a longer one under the same stream.
    """

    __slots__ = ("items", "size")

    def __init__(self, items: np.ndarray | Sequence[int]):
        self.items = np.array(items, dtype=np.int64)
        self.size = int(self.items.size)

    def draw(self, rng: np.random.Generator) -> int:
        if self.size == 0:
            raise ExhaustedError("index pool is empty")
        k = int(rng.integers(self.size))
        value = int(self.items[k])
        self.size -= 1
        self.items[k] = self.items[self.size]
        return value
