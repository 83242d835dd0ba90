"""Decoding and evaluation metrics: CER, exact-match rates, count errors."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .alphabet import Alphabet
from .ctc import collapse_path
from .errors import InvalidInputError
from .grids import ProbGrid, flatten_2d


def greedy_decode(probs: ProbGrid, alphabet: Alphabet) -> str:
    """Best-path decode: per-timestep argmax, merge repeats, drop blanks.

    Grids with 2D provenance are flattened column-major first, so the scan
    order matches how 2D predictions are read. Argmax ties resolve to the
    lowest class index.
    """
    if probs.shape2d is not None:
        probs = flatten_2d(probs)
    path = np.argmax(probs.values, axis=1)
    return alphabet.decode(collapse_path(path, alphabet.blank_index))


def levenshtein(a, b) -> int:
    """Edit distance (insertions, deletions, substitutions all cost 1)."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb))
            )
        previous = current
    return previous[-1]


def cer(prediction, reference) -> float:
    """Character error rate: edit distance over reference length (min 1)."""
    return levenshtein(prediction, reference) / max(1, len(reference))


def sequence_match(prediction, reference) -> bool:
    return list(prediction) == list(reference)


def count_match(prediction, reference) -> bool:
    """True iff both sequences contain the same symbols the same number of times."""
    return Counter(prediction) == Counter(reference)


def round_half_away(values: np.ndarray) -> np.ndarray:
    """Round to nearest integer with halves away from zero (2.5 -> 3)."""
    values = np.asarray(values, dtype=np.float64)
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def predicted_counts(probs: ProbGrid, alphabet: Alphabet) -> np.ndarray:
    """Integer count prediction per non-blank class.

    Aggregates each class's probability over all timesteps, clamps below at
    zero and rounds half away from zero.
    """
    totals = probs.values.sum(axis=0)[1:]  # skip the blank column
    return round_half_away(np.maximum(totals, 0.0)).astype(np.int64)


@dataclass(frozen=True)
class CountingMetrics:
    """Per-class count errors averaged over classes (unweighted)."""

    m_rmse: float
    m_rel_rmse: float
    rmse_per_class: np.ndarray
    rel_rmse_per_class: np.ndarray


def rmse_metrics(predicted: np.ndarray, true: np.ndarray) -> CountingMetrics:
    """Root-mean-square count error per class, plain and relative.

    ``predicted`` and ``true`` are (num_samples, num_classes) count
    matrices. The relative variant divides each squared error by
    ``true + 1`` before averaging; both are finally averaged over classes
    with equal weight.
    """
    predicted = np.asarray(predicted, dtype=np.float64)
    true = np.asarray(true, dtype=np.float64)
    if predicted.shape != true.shape or predicted.ndim != 2:
        raise InvalidInputError("expected matching (samples, classes) count matrices")
    if predicted.shape[0] == 0:
        raise InvalidInputError("cannot compute counting metrics on an empty dataset")
    sq = (predicted - true) ** 2
    rmse = np.sqrt(sq.mean(axis=0))
    rel = np.sqrt((sq / (true + 1.0)).mean(axis=0))
    return CountingMetrics(
        m_rmse=float(rmse.mean()),
        m_rel_rmse=float(rel.mean()),
        rmse_per_class=rmse,
        rel_rmse_per_class=rel,
    )


def modal_count_baseline(true: np.ndarray) -> np.ndarray:
    """Constant baseline predicting each class's most frequent true count."""
    true = np.asarray(true, dtype=np.int64)
    if true.ndim != 2 or true.shape[0] == 0:
        raise InvalidInputError("need a non-empty (samples, classes) count matrix")
    modal = np.empty(true.shape[1], dtype=np.int64)
    for k in range(true.shape[1]):
        counts = np.bincount(true[:, k])
        modal[k] = int(np.argmax(counts))
    return np.tile(modal, (true.shape[0], 1))
