"""Score sources: in-memory matrices, CSV/JSON files, remote scoring
endpoints, and synthetic planted instances with exact ground truth."""

from __future__ import annotations

import csv
import json
import math
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import requests
from scipy.special import ndtr

from .core import RandomStream, ScoreRangeError, as_stream
from .metrics import GroundTruth, ground_truth_from_matrix


class MatrixFormatError(ValueError):
    """A score file failed to parse; the message carries the location."""


class RemoteScoringError(RuntimeError):
    """A remote scoring endpoint failed after the configured retries."""


class ScoreOracle(ABC):
    """A fixed source of scores for (method, example) pairs.

    Repeated queries for the same pair always return the identical value.
    """

    kind: str = "abstract"

    def __init__(self, m: int, n: int, method_names=None, example_ids=None):
        self.m = int(m)
        self.n = int(n)
        self.method_names = list(method_names) if method_names else [f"m{i}" for i in range(m)]
        self.example_ids = list(example_ids) if example_ids else [f"x{j}" for j in range(n)]
        if len(self.method_names) != self.m or len(self.example_ids) != self.n:
            raise ValueError("name lists must match the matrix dimensions")

    def _check_indices(self, i: int, j: int) -> None:
        if not (0 <= i < self.m and 0 <= j < self.n):
            raise IndexError(f"pair ({i}, {j}) outside {self.m}x{self.n} oracle")

    @abstractmethod
    def query(self, i: int, j: int) -> float:
        """Score of method i on example j, in [0, 1]."""


class MatrixOracle(ScoreOracle):
    """Oracle backed by a fully materialized score matrix."""

    kind = "matrix"

    def __init__(self, matrix: np.ndarray, method_names=None, example_ids=None):
        mat = np.array(matrix, dtype=float)
        if mat.ndim != 2 or mat.size == 0:
            raise ValueError("score matrix must be a non-empty 2-D array")
        if not np.all(np.isfinite(mat)):
            raise ScoreRangeError("score matrix contains non-finite entries")
        if mat.min() < 0.0 or mat.max() > 1.0:
            bad = np.argwhere((mat < 0.0) | (mat > 1.0))[0]
            raise ScoreRangeError(
                f"score {mat[bad[0], bad[1]]!r} at row {bad[0]}, column {bad[1]} outside [0, 1]"
            )
        mat.setflags(write=False)
        super().__init__(mat.shape[0], mat.shape[1], method_names, example_ids)
        self.matrix = mat

    def query(self, i: int, j: int) -> float:
        self._check_indices(i, j)
        return float(self.matrix[i, j])

    def ground_truth(self) -> GroundTruth:
        return ground_truth_from_matrix(self.matrix)


class RemoteOracle(ScoreOracle):
    """Oracle that POSTs to a scoring endpoint and caches each pair's score.

    Requests carry ``{"run_id", "method", "example"}``; the response must be
    ``{"score": value}`` with value in [0, 1].  Transient failures retry with
    exponential backoff before the run is failed; cached pairs never re-pay.
    """

    kind = "remote"

    def __init__(
        self,
        url: str,
        m: int,
        n: int,
        run_id: str = "run",
        method_names=None,
        example_ids=None,
        timeout: float = 10.0,
        retries: int = 3,
        backoff: float = 0.5,
        max_in_flight: int = 4,
        session: requests.Session | None = None,
    ):
        super().__init__(m, n, method_names, example_ids)
        self.url = url
        self.run_id = run_id
        self.timeout = timeout
        self.retries = int(retries)
        self.backoff = backoff
        self._session = session or requests.Session()
        self._cache: dict[tuple[int, int], float] = {}
        self._lock = threading.Lock()
        self._in_flight = threading.Semaphore(max(1, int(max_in_flight)))

    def query(self, i: int, j: int) -> float:
        self._check_indices(i, j)
        with self._lock:
            if (i, j) in self._cache:
                return self._cache[(i, j)]
        payload = {
            "run_id": self.run_id,
            "method": self.method_names[i],
            "example": self.example_ids[j],
        }
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                with self._in_flight:
                    resp = self._session.post(self.url, json=payload, timeout=self.timeout)
                resp.raise_for_status()
                score = float(resp.json()["score"])
                if not (0.0 <= score <= 1.0):
                    raise ScoreRangeError(
                        f"remote score {score!r} for pair ({i}, {j}) outside [0, 1]"
                    )
                with self._lock:
                    self._cache[(i, j)] = score
                return score
            except ScoreRangeError:
                raise
            except Exception as exc:  # transport/protocol failure: retry
                last_error = exc
                if attempt < self.retries:
                    time.sleep(self.backoff * (2**attempt))
        raise RemoteScoringError(
            f"remote scoring failed for pair ({i}, {j}) after {self.retries + 1} attempts: {last_error}"
        ) from last_error


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def _parse_cell(text: str, row: int, col: int) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise MatrixFormatError(f"row {row}, column {col}: {text!r} is not a number") from exc
    if not (0.0 <= value <= 1.0):
        raise ScoreRangeError(f"row {row}, column {col}: score {value!r} outside [0, 1]")
    return value


def _infer_format(path: Path, format: str | None) -> str:
    if format is not None:
        return format
    return "json" if path.suffix.lower() == ".json" else "csv"


def load_matrix(path, format: str | None = None) -> MatrixOracle:
    """Load a score matrix from CSV or JSON.

    CSV: first row ``method,<example ids...>`` then one row per method; a
    headerless all-numeric grid is also accepted.  JSON: an object with
    ``methods``, ``examples``, and row-major ``scores``.
    """
    path = Path(path)
    fmt = _infer_format(path, format)
    if fmt == "json":
        return _load_json(path)
    if fmt == "csv":
        return _load_csv(path)
    raise ValueError(f"unknown matrix format {fmt!r}")


def _load_csv(path: Path) -> MatrixOracle:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise MatrixFormatError(f"{path}: empty file")
    named = rows[0][0].strip().lower() == "method"
    if named:
        example_ids = [c.strip() for c in rows[0][1:]]
        data_rows = rows[1:]
        if not data_rows:
            raise MatrixFormatError(f"{path}: header but no data rows")
    else:
        example_ids = None
        data_rows = rows
    n = len(data_rows[0]) - (1 if named else 0)
    if n < 1:
        raise MatrixFormatError(f"{path}: no score columns")
    names = []
    scores = np.empty((len(data_rows), n))
    for r, row in enumerate(data_rows):
        cells = row[1:] if named else row
        if named:
            names.append(row[0].strip())
        if len(cells) != n:
            raise MatrixFormatError(
                f"{path}: row {r + 1} has {len(cells)} score cells, expected {n}"
            )
        for c, cell in enumerate(cells):
            scores[r, c] = _parse_cell(cell.strip(), r + 1, c + 1)
    return MatrixOracle(scores, names if named else None, example_ids)


def _load_json(path: Path) -> MatrixOracle:
    with open(path, encoding="utf-8") as fh:
        try:
            blob = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MatrixFormatError(f"{path}: invalid JSON ({exc})") from exc
    for key in ("methods", "examples", "scores"):
        if key not in blob:
            raise MatrixFormatError(f"{path}: missing key {key!r}")
    scores = blob["scores"]
    if not scores or any(len(row) != len(scores[0]) for row in scores):
        raise MatrixFormatError(f"{path}: scores must be a non-empty rectangular list")
    mat = np.empty((len(scores), len(scores[0])))
    for r, row in enumerate(scores):
        for c, cell in enumerate(row):
            mat[r, c] = _parse_cell(str(cell), r + 1, c + 1)
    if len(blob["methods"]) != mat.shape[0] or len(blob["examples"]) != mat.shape[1]:
        raise MatrixFormatError(f"{path}: name lists do not match the score grid")
    return MatrixOracle(mat, blob["methods"], blob["examples"])


def save_matrix(oracle: MatrixOracle, path, format: str | None = None) -> None:
    """Write a matrix oracle back to CSV or JSON; values round-trip exactly."""
    path = Path(path)
    fmt = _infer_format(path, format)
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", *oracle.example_ids])
            for name, row in zip(oracle.method_names, oracle.matrix):
                writer.writerow([name, *[repr(float(v)) for v in row]])
    elif fmt == "json":
        blob = {
            "methods": oracle.method_names,
            "examples": oracle.example_ids,
            "scores": [[float(v) for v in row] for row in oracle.matrix],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(blob, fh)
            fh.write("\n")
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")


# ---------------------------------------------------------------------------
# Synthetic instances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticInstance:
    """A generated oracle together with its exact realized ground truth."""

    oracle: MatrixOracle
    truth: GroundTruth
    planted_means: np.ndarray


def synth_planted(
    m: int,
    n: int,
    means,
    noise: str = "none",
    sigma: float = 0.0,
    stream: RandomStream | int = 0,
    column_profile=None,
    column_noise_correlation: float = 0.0,
) -> SyntheticInstance:
    """Generate a score matrix whose rows have approximately the given means.

    ``noise``: "none" stores the mean matrix itself; "bernoulli" draws 0/1
    scores with the mean matrix as success probabilities; "gaussian" adds
    N(0, sigma) noise clamped to [0, 1].  ``column_profile`` optionally scales
    example difficulty, keeping the mean matrix exactly rank one while
    preserving the target row means.  ``column_noise_correlation`` (rho in
    [0, 1), Bernoulli noise only) couples realizations within a column
    through a shared Gaussian-copula factor: each entry keeps its exact
    marginal success probability, but methods succeed and fail together on
    the same example the way correlated evaluation sets do.

    The matrix is materialized fully at construction so the returned ground
    truth (realized means, best index, hardness) is exact.
    """
    mean_vec = np.asarray(means, dtype=float)
    if mean_vec.shape != (m,):
        raise ValueError(f"means must have shape ({m},)")
    if mean_vec.min() < 0.0 or mean_vec.max() > 1.0:
        raise ValueError("means must lie in [0, 1]")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if column_profile is None:
        probs = np.tile(mean_vec[:, None], (1, n))
    else:
        profile = np.asarray(column_profile, dtype=float)
        if profile.shape != (n,):
            raise ValueError(f"column_profile must have shape ({n},)")
        if profile.min() <= 0:
            raise ValueError("column_profile entries must be positive")
        probs = np.outer(mean_vec / profile.mean(), profile)
        if probs.min() < 0.0 or probs.max() > 1.0:
            raise ValueError("means and column_profile give probabilities outside [0, 1]")

    if not (0.0 <= column_noise_correlation < 1.0):
        raise ValueError("column_noise_correlation must lie in [0, 1)")
    rng = as_stream(stream).child("synth").generator()
    if noise == "none":
        scores = probs.copy()
    elif noise == "bernoulli":
        if column_noise_correlation > 0.0:
            rho = column_noise_correlation
            shared = rng.normal(0.0, 1.0, size=n)
            private = rng.normal(0.0, 1.0, size=(m, n))
            grid = rho * shared[None, :] + math.sqrt(1.0 - rho * rho) * private
            scores = (ndtr(grid) < probs).astype(float)
        else:
            scores = (rng.random((m, n)) < probs).astype(float)
    elif noise == "gaussian":
        scores = np.clip(probs + rng.normal(0.0, sigma, size=(m, n)), 0.0, 1.0)
    else:
        raise ValueError(f"unknown noise kind {noise!r}")

    oracle = MatrixOracle(scores)
    return SyntheticInstance(
        oracle=oracle, truth=oracle.ground_truth(), planted_means=mean_vec.copy()
    )
