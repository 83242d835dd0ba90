"""Count-aggregation sequence losses with exact gradients, an
alignment-summing baseline, and a desk-scale training/benchmark harness.

The central idea: instead of aligning a label sequence to per-timestep
predictions, sum each class's probability over all timesteps and compare the
normalized aggregate against the annotation's per-class counts with
cross-entropy. The loss needs only classes and their multiplicities, which
makes it order-free, directly applicable to flattened 2D prediction grids,
and usable for counting problems.
"""

from .alphabet import Alphabet, make_alphabet, BLANK_SYMBOL, DEFAULT_ALPHABET
from .ace import (
    CountAnnotation,
    LossGrad,
    ace_ce_loss,
    ace_ce_loss_2d,
    ace_regression_loss,
    aggregate,
    counts_from_sequence,
    gradient_magnitude_profile,
)
from .bench import BenchResult, BenchSpec, run_bench
from .ctc import CtcTarget, collapse_path, ctc_brute_force, ctc_loss
from .errors import (
    AceSeqError,
    CapacityError,
    InvalidInputError,
    SizeGuardError,
    TrainingDivergedError,
    VocabularyError,
)
from .gradcheck import GradCheckReport, numeric_logit_gradient, run_grad_check
from .grids import LogitGrid, ProbGrid, flatten_2d, softmax, softmax_jacobian_apply
from .metrics import (
    CountingMetrics,
    cer,
    greedy_decode,
    levenshtein,
    modal_count_baseline,
    predicted_counts,
    rmse_metrics,
)
from .tasks import (
    GridSample,
    SequenceSample,
    ShuffleSpec,
    apply_shuffle,
    gen_grids,
    gen_sequences,
    load_dataset,
    save_dataset,
)
from .train import (
    ToyModel,
    TrainConfig,
    TrainResult,
    evaluate,
    forward,
    load_model,
    run_shuffle_experiment,
    save_model,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Alphabet",
    "make_alphabet",
    "BLANK_SYMBOL",
    "DEFAULT_ALPHABET",
    "CountAnnotation",
    "LossGrad",
    "ace_ce_loss",
    "ace_ce_loss_2d",
    "ace_regression_loss",
    "aggregate",
    "counts_from_sequence",
    "gradient_magnitude_profile",
    "BenchResult",
    "BenchSpec",
    "run_bench",
    "CtcTarget",
    "collapse_path",
    "ctc_brute_force",
    "ctc_loss",
    "AceSeqError",
    "CapacityError",
    "InvalidInputError",
    "SizeGuardError",
    "TrainingDivergedError",
    "VocabularyError",
    "GradCheckReport",
    "numeric_logit_gradient",
    "run_grad_check",
    "LogitGrid",
    "ProbGrid",
    "flatten_2d",
    "softmax",
    "softmax_jacobian_apply",
    "CountingMetrics",
    "cer",
    "greedy_decode",
    "levenshtein",
    "modal_count_baseline",
    "predicted_counts",
    "rmse_metrics",
    "GridSample",
    "SequenceSample",
    "ShuffleSpec",
    "apply_shuffle",
    "gen_grids",
    "gen_sequences",
    "load_dataset",
    "save_dataset",
    "ToyModel",
    "TrainConfig",
    "TrainResult",
    "evaluate",
    "forward",
    "load_model",
    "run_shuffle_experiment",
    "save_model",
    "train",
]
