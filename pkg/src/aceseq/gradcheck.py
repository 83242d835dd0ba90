"""Finite-difference verification of the analytic gradients.

Central differences through the softmax are the independent oracle for every
logit gradient in the package. An analytic entry passes when

    |analytic - numeric| <= max(abs_floor, fd_noise) + rel_tol * max(|analytic|, |numeric|)

so large entries are judged relatively and entries near zero absolutely.

``fd_noise`` is the oracle's own resolution limit: a central difference
carries rounding noise of a few ulps of the loss divided by the step,
roughly ``eps * |loss| / h``. For unit-scale losses at h = 1e-6 that is
~1e-9, below the default absolute floor, so the floor governs. The
half-squared-count loss however reaches magnitudes of several hundred on
large-T instances, pushing the noise to ~1e-7; below that level the
difference quotient simply carries no information about the gradient, so
the floor is raised to the noise bound there. A genuinely wrong gradient
still fails by orders of magnitude (see the negative-control test).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ace import (
    CountAnnotation,
    ace_ce_loss,
    ace_regression_loss,
    counts_from_sequence,
)
from .alphabet import make_alphabet
from .ctc import CtcTarget, ctc_brute_force, ctc_loss
from .errors import InvalidInputError
from .grids import LogitGrid, _trusted_prob_grid, softmax

DEFAULT_STEP = 1e-6
DEFAULT_REL_TOL = 1e-6
DEFAULT_ABS_FLOOR = 1e-8
FD_NOISE_SAFETY = 8.0  # ulps of slack on the central-difference rounding bound


def fd_noise_bound(loss_magnitude: float, step: float = DEFAULT_STEP) -> float:
    """Rounding-noise level of a central difference at the given loss scale."""
    return FD_NOISE_SAFETY * np.finfo(np.float64).eps * abs(loss_magnitude) / step


def numeric_logit_gradient(
    loss_of_probs: Callable, logits: LogitGrid, step: float = DEFAULT_STEP
) -> np.ndarray:
    """Central finite differences of a probability-space loss through softmax.

    Uses its own plain softmax (independent of the production kernel, which
    is separately verified against a high-precision reference) so the only
    thing under test here is the loss's analytic gradient.
    """

    def probe(values: np.ndarray) -> float:
        shifted = values - values.max(axis=1, keepdims=True)
        np.exp(shifted, out=shifted)
        shifted /= shifted.sum(axis=1, keepdims=True)
        return loss_of_probs(_trusted_prob_grid(shifted, logits.shape2d))

    base = logits.values.copy()
    grad = np.zeros_like(base)
    for t in range(base.shape[0]):
        for k in range(base.shape[1]):
            original = base[t, k]
            base[t, k] = original + step
            loss_plus = probe(base)
            base[t, k] = original - step
            loss_minus = probe(base)
            base[t, k] = original
            grad[t, k] = (loss_plus - loss_minus) / (2.0 * step)
    return grad


@dataclass(frozen=True)
class GradCheckReport:
    """Worst-case disagreement between analytic and numeric gradients."""

    max_scaled_error: float  # error divided by its per-entry tolerance; <= 1 passes
    max_abs_error: float
    worst_entry: tuple[int, int]
    trials: int

    @property
    def passed(self) -> bool:
        return self.max_scaled_error <= 1.0


def compare_gradients(
    analytic: np.ndarray,
    numeric: np.ndarray,
    rel_tol: float = DEFAULT_REL_TOL,
    abs_floor: float = DEFAULT_ABS_FLOOR,
    noise_floor: float = 0.0,
) -> tuple[float, float, tuple[int, int]]:
    """Scaled error of analytic vs numeric entries (1.0 = at tolerance)."""
    if analytic.shape != numeric.shape:
        raise InvalidInputError("gradient shape mismatch")
    diff = np.abs(analytic - numeric)
    floor = max(abs_floor, noise_floor)
    scale = floor + rel_tol * np.maximum(np.abs(analytic), np.abs(numeric))
    scaled = diff / scale
    flat = int(np.argmax(scaled))
    worst = np.unravel_index(flat, scaled.shape)
    return float(scaled.max()), float(diff.max()), (int(worst[0]), int(worst[1]))


def _random_instance(rng: np.random.Generator, loss_name: str):
    """A random logit grid plus matching supervision for one check trial."""
    if loss_name == "ctc":
        big_t = int(rng.integers(2, 9))
        num_classes = int(rng.integers(2, 7))
        # adjacent repeats need a separating blank, so with a single
        # non-blank class a length-L target occupies 2L-1 timesteps
        max_len = min(3, big_t if num_classes > 2 else (big_t + 1) // 2)
    else:
        big_t = int(rng.integers(1, 31))
        num_classes = int(rng.integers(2, 101))
        max_len = big_t
    logits = LogitGrid(rng.normal(scale=2.0, size=(big_t, num_classes)))
    alphabet = make_alphabet(num_classes - 1)
    length = int(rng.integers(0, max_len + 1))
    symbols = []
    while len(symbols) < length:
        sym = alphabet.symbol(int(rng.integers(1, num_classes)))
        if symbols and sym == symbols[-1] and num_classes > 2:
            continue  # avoid repeats when distinct choices exist
        symbols.append(sym)
    return logits, alphabet, "".join(symbols)


def _loss_pair(loss_name: str, probs, alphabet, sequence):
    """(scalar loss fn, analytic gradient) for one instance of a loss."""
    if loss_name in ("ace_ce", "ace_regression"):
        ann = counts_from_sequence(sequence, alphabet, probs.timesteps)
        fn = ace_ce_loss if loss_name == "ace_ce" else ace_regression_loss
        return (lambda p: fn(p, ann).loss), fn(probs, ann).grad_logits
    if loss_name == "ctc":
        target = CtcTarget.from_sequence(sequence, alphabet)
        return (lambda p: ctc_loss(p, target).loss), ctc_loss(probs, target).grad_logits
    raise InvalidInputError(f"unknown loss {loss_name!r}")


def run_grad_check(
    loss_name: str,
    trials: int = 200,
    rel_tol: float = DEFAULT_REL_TOL,
    abs_floor: float = DEFAULT_ABS_FLOOR,
    seed: int = 0,
    step: float = DEFAULT_STEP,
    perturbation: float = 0.0,
) -> GradCheckReport:
    """Check one loss's analytic gradient on random instances.

    ``perturbation`` deliberately corrupts the analytic gradient before the
    comparison; it exists as a negative control so the checker itself can be
    shown to catch wrong gradients.
    """
    rng = np.random.default_rng(seed)
    worst = (0.0, 0.0, (0, 0))
    for _ in range(trials):
        logits, alphabet, sequence = _random_instance(rng, loss_name)
        probs = softmax(logits)
        loss_fn, analytic = _loss_pair(loss_name, probs, alphabet, sequence)
        if perturbation:
            analytic = analytic + perturbation
        numeric = numeric_logit_gradient(loss_fn, logits, step=step)
        noise = fd_noise_bound(loss_fn(probs), step)
        result = compare_gradients(analytic, numeric, rel_tol, abs_floor, noise)
        if result[0] > worst[0]:
            worst = result
    return GradCheckReport(
        max_scaled_error=worst[0],
        max_abs_error=worst[1],
        worst_entry=worst[2],
        trials=trials,
    )


def ctc_oracle_check(trials: int = 100, seed: int = 0, tol: float = 1e-10) -> float:
    """Max |forward-backward - enumeration| over random tiny instances.

    Raises if any instance disagrees beyond ``tol``; returns the worst gap.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    done = 0
    while done < trials:
        big_t = int(rng.integers(1, 7))
        num_classes = int(rng.integers(2, 6))
        length = int(rng.integers(0, 4))
        labels = rng.integers(1, num_classes, size=length)
        target = CtcTarget(labels)
        if target.min_timesteps > big_t:
            continue
        probs = softmax(LogitGrid(rng.normal(scale=2.0, size=(big_t, num_classes))))
        got = ctc_loss(probs, target).loss
        want = ctc_brute_force(probs, target)
        gap = abs(got - want)
        worst = max(worst, gap)
        if gap > tol:
            raise AssertionError(
                f"forward-backward {got!r} disagrees with enumeration {want!r}"
            )
        done += 1
    return worst
