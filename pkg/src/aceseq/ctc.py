"""Reference alignment-summing loss (forward-backward) and its testing oracle.

The loss marginalizes over every monotonic alignment of the label sequence
onto the timesteps, with the blank separating repeats and padding. The
recursion walks the blank-interleaved target one timestep at a time in log
space with pairwise log-sum-exp; it is kept as straightforward reference
code because its speed is something the benchmark measures, not something
to optimize away.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from .alphabet import Alphabet
from .errors import (
    CapacityError,
    InvalidInputError,
    SizeGuardError,
    ZeroProbabilityError,
)
from .grids import ProbGrid
from .ace import LossGrad

NEG_INF = float("-inf")

BRUTE_FORCE_MAX_T = 8
BRUTE_FORCE_MAX_K = 8


@dataclass(frozen=True)
class CtcTarget:
    """A blank-free label index sequence plus its blank-interleaved form."""

    label_indices: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.label_indices, dtype=np.int64)
        if arr.ndim != 1:
            raise InvalidInputError("label indices must be a 1D sequence")
        if np.any(arr <= 0):
            raise InvalidInputError("labels must be positive class indices (0 is the blank)")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "label_indices", arr)

    @classmethod
    def from_sequence(cls, sequence, alphabet: Alphabet) -> "CtcTarget":
        return cls(alphabet.encode(sequence))

    def __len__(self) -> int:
        return len(self.label_indices)

    @property
    def extended(self) -> np.ndarray:
        """Blank-interleaved sequence: blank, l1, blank, l2, ..., blank."""
        ext = np.zeros(2 * len(self.label_indices) + 1, dtype=np.int64)
        ext[1::2] = self.label_indices
        return ext

    @property
    def min_timesteps(self) -> int:
        """Shortest prediction that can emit this target: length plus one
        mandatory blank between each adjacent repeated pair."""
        labels = self.label_indices
        repeats = int(np.sum(labels[1:] == labels[:-1]))
        return len(labels) + repeats


def _log_add(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def _check_feasible(probs: ProbGrid, target: CtcTarget):
    if len(target) and int(target.label_indices.max()) >= probs.num_classes:
        raise InvalidInputError("target label index out of range for this grid")
    if target.min_timesteps > probs.timesteps:
        raise CapacityError(
            f"target needs at least {target.min_timesteps} timesteps, grid has {probs.timesteps}"
        )


def ctc_loss(probs: ProbGrid, target: CtcTarget) -> LossGrad:
    """Negative log-probability of the target summed over all alignments.

    Forward and backward tables are filled cell by cell over the
    blank-interleaved target; the gradient with respect to probabilities
    falls out of their products and is then pushed through the softmax
    Jacobian to give ``grad_logits``. Gradient rows sum to 0.
    """
    _check_feasible(probs, target)
    values = probs.values
    big_t, num_classes = values.shape
    ext = target.extended
    big_u = len(ext)

    # log emission probability of each extended position at each timestep
    with np.errstate(divide="ignore"):
        logp = np.log(values[:, ext]).tolist()
    skip_ok = [False] * big_u
    for u in range(2, big_u):
        skip_ok[u] = ext[u] != 0 and ext[u] != ext[u - 2]

    def window(t: int) -> range:
        # positions reachable from the start and able to reach the end
        return range(max(0, big_u - 2 * (big_t - t)), min(big_u, 2 * (t + 1)))

    alpha = [[NEG_INF] * big_u for _ in range(big_t)]
    alpha[0][0] = logp[0][0]
    if big_u > 1:
        alpha[0][1] = logp[0][1]
    for t in range(1, big_t):
        prev, row, lp = alpha[t - 1], alpha[t], logp[t]
        for u in window(t):
            a = prev[u]
            if u >= 1:
                a = _log_add(a, prev[u - 1])
                if skip_ok[u]:
                    a = _log_add(a, prev[u - 2])
            if a != NEG_INF:
                row[u] = a + lp[u]

    log_total = alpha[big_t - 1][big_u - 1]
    if big_u > 1:
        log_total = _log_add(log_total, alpha[big_t - 1][big_u - 2])
    if log_total == NEG_INF:
        raise ZeroProbabilityError("target has probability zero under this grid")

    beta = [[NEG_INF] * big_u for _ in range(big_t)]
    beta[big_t - 1][big_u - 1] = 0.0
    if big_u > 1:
        beta[big_t - 1][big_u - 2] = 0.0
    for t in range(big_t - 2, -1, -1):
        nxt, row, lp = beta[t + 1], beta[t], logp[t + 1]
        for u in window(t):
            b = NEG_INF if nxt[u] == NEG_INF else nxt[u] + lp[u]
            if u + 1 < big_u and nxt[u + 1] != NEG_INF:
                b = _log_add(b, nxt[u + 1] + lp[u + 1])
            if u + 2 < big_u and skip_ok[u + 2] and nxt[u + 2] != NEG_INF:
                b = _log_add(b, nxt[u + 2] + lp[u + 2])
            row[u] = b

    # alpha*beta at (t, u) is the probability mass of all paths through that
    # cell; summed per class and divided by the emission it is dP/dy.
    occupancy = np.asarray(alpha) + np.asarray(beta) - log_total
    occupancy = np.exp(occupancy, out=occupancy)
    upstream = np.zeros((big_t, num_classes))
    for u, cls in enumerate(ext):
        upstream[:, cls] += occupancy[:, u]
    touched = np.unique(ext)
    occupied = upstream[:, touched]
    cols = values[:, touched]
    # occupancy is zero wherever the emission is zero, so skipping those
    # divisions leaves the correct zero gradient in place
    np.divide(occupied, cols, out=occupied, where=cols > 0.0)
    upstream[:, touched] = -occupied

    # softmax Jacobian applied to every row at once
    row_dots = np.einsum("tk,tk->t", values, upstream)
    grad = values * (upstream - row_dots[:, None])
    return LossGrad(loss=-log_total, grad_logits=grad)


def collapse_path(path: Sequence[int], blank_index: int = 0) -> list[int]:
    """Merge consecutive duplicates, then drop blanks."""
    out: list[int] = []
    prev = None
    for p in path:
        if p != prev:
            out.append(int(p))
        prev = p
    return [p for p in out if p != blank_index]


def ctc_brute_force(probs: ProbGrid, target: CtcTarget) -> float:
    """Loss by explicit enumeration of every length-T label path.

    Exists purely as an independent oracle for the forward-backward
    implementation; guarded to tiny instances because the path count is
    K**T.
    """
    big_t, num_classes = probs.values.shape
    if big_t > BRUTE_FORCE_MAX_T or num_classes > BRUTE_FORCE_MAX_K:
        raise SizeGuardError(
            f"brute force limited to T <= {BRUTE_FORCE_MAX_T}, K <= {BRUTE_FORCE_MAX_K}"
        )
    _check_feasible(probs, target)
    wanted = list(int(i) for i in target.label_indices)
    values = probs.values
    total = 0.0
    for path in product(range(num_classes), repeat=big_t):
        if collapse_path(path) != wanted:
            continue
        prob = 1.0
        for t, cls in enumerate(path):
            prob *= values[t, cls]
        total += prob
    if total <= 0.0:
        raise ZeroProbabilityError("target has probability zero under this grid")
    return -math.log(total)
