"""Budget-limited identification of the best method on a score matrix.

Selection algorithms (exploration-bonus bandit, factorization-guided bandit,
and passive baselines), masked low-rank completion with ensemble
uncertainty, ground-truth metrics, and a seeded experiment harness.
"""

from .core import (
    AlgorithmConfig,
    AlsSettings,
    DuplicateObservationError,
    EmptyRowError,
    ExhaustedError,
    InvalidConfigError,
    Prediction,
    RandomStream,
    RunResult,
    ScoreRangeError,
    ScoringState,
    Trajectory,
    derive_rng,
)
from .oracle import (
    MatrixOracle,
    MatrixFormatError,
    RemoteOracle,
    RemoteScoringError,
    ScoreOracle,
    SyntheticInstance,
    load_matrix,
    save_matrix,
    synth_planted,
)
from .bandit import UcbState, run_filled_subset, run_row_mean_imputation, run_ucb_e, ucb_select, ucb_update
from .lrf import (
    DegenerateSupportError,
    FactorEnsemble,
    FactorPair,
    als_fit,
    fit_ensemble,
    gated_means,
)
from .ucbelrf import run_lrf_baseline, run_ucb_e_lrf, run_ucb_e_lrf_score_only, warmup
from .metrics import (
    DegenerateTieError,
    GroundTruth,
    ground_truth_from_matrix,
    hardness_h1,
    mcnemar_p,
    ndcg_at_k,
    precision_gap,
    precision_significance,
)
from .harness import (
    ALGORITHMS,
    AlgorithmEntry,
    ExperimentReport,
    ExperimentSpec,
    MetricSettings,
    OracleSource,
    TrialResult,
    load_experiment_spec,
    run_experiment,
    write_report,
)

__version__ = "0.1.0"
