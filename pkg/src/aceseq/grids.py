"""Prediction grids and the dense numeric kernels built on them.

A grid holds one row of per-class scores per timestep. Grids produced by a
two-dimensional predictor additionally carry their (height, width) shape;
rows are then stored in reading order, i.e. row ``h * width + w`` holds the
prediction for cell ``(h, w)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

ROW_SUM_TOL = 1e-9


def _checked_values(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be a T x K matrix, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 2:
        raise InvalidInputError(f"{name} needs T >= 1 and K >= 2, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def _checked_shape2d(shape2d, timesteps: int) -> tuple[int, int] | None:
    if shape2d is None:
        return None
    height, width = (int(shape2d[0]), int(shape2d[1]))
    if height < 1 or width < 1:
        raise InvalidInputError("2D provenance needs height >= 1 and width >= 1")
    if height * width != timesteps:
        raise InvalidInputError(
            f"2D provenance {height}x{width} does not match T={timesteps}"
        )
    return (height, width)


@dataclass(frozen=True)
class LogitGrid:
    """Pre-softmax activations, one row per timestep."""

    values: np.ndarray
    shape2d: tuple[int, int] | None = None

    def __post_init__(self):
        arr = _checked_values(self.values, "logits")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "shape2d", _checked_shape2d(self.shape2d, arr.shape[0]))

    @property
    def timesteps(self) -> int:
        return self.values.shape[0]

    @property
    def num_classes(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ProbGrid:
    """Row-stochastic per-timestep class probabilities."""

    values: np.ndarray
    shape2d: tuple[int, int] | None = None

    def __post_init__(self):
        arr = _checked_values(self.values, "probabilities")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise InvalidInputError("probabilities must lie in [0, 1]")
        if np.max(np.abs(arr.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise InvalidInputError("probability rows must sum to 1")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "shape2d", _checked_shape2d(self.shape2d, arr.shape[0]))

    @property
    def timesteps(self) -> int:
        return self.values.shape[0]

    @property
    def num_classes(self) -> int:
        return self.values.shape[1]


def _trusted_prob_grid(values: np.ndarray, shape2d=None) -> ProbGrid:
    """Wrap values known to be row-stochastic without re-validation.

    Internal-only: for kernels (and tight numeric loops) whose outputs are
    on the simplex by construction. The public constructor always validates.
    """
    grid = object.__new__(ProbGrid)
    object.__setattr__(grid, "values", values)
    object.__setattr__(grid, "shape2d", shape2d)
    return grid


def softmax(logits: LogitGrid) -> ProbGrid:
    """Row-wise softmax, stabilized by subtracting each row's maximum.

    The shift keeps the exponentials bounded so activations far outside the
    naive formula's safe range (|a| > ~700) still produce finite rows.
    2D provenance is preserved.
    """
    a = logits.values
    shifted = a - a.max(axis=1, keepdims=True)
    np.exp(shifted, out=shifted)
    shifted /= shifted.sum(axis=1, keepdims=True)
    return ProbGrid(shifted, shape2d=logits.shape2d)


def softmax_jacobian_apply(probs_row: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Multiply an upstream gradient by the softmax Jacobian of one row.

    For a row ``y`` on the simplex the Jacobian is ``diag(y) - y y^T``; the
    product collapses to ``y * (upstream - <upstream, y>)``, which is O(K)
    instead of materializing the K x K matrix. The result always sums to 0
    (softmax outputs cannot leave the simplex).
    """
    y = np.asarray(probs_row, dtype=np.float64)
    u = np.asarray(upstream, dtype=np.float64)
    if y.shape != u.shape or y.ndim != 1:
        raise InvalidInputError(
            f"row/upstream shape mismatch: {y.shape} vs {u.shape}"
        )
    return y * (u - float(np.dot(u, y)))


def column_major_order(height: int, width: int) -> np.ndarray:
    """Reading-order row indices arranged column by column.

    Entry ``w * height + h`` of the result is ``h * width + w``: columns are
    emitted left to right, each column top to bottom.
    """
    return np.arange(height * width).reshape(height, width).T.ravel()


def flatten_2d(grid: ProbGrid) -> ProbGrid:
    """Flatten a 2D prediction grid into a 1D sequence of length H*W.

    Output row ``w * H + h`` is input cell ``(h, w)``; the result carries no
    2D provenance. Decoding flattened grids therefore scans columns left to
    right, top to bottom.
    """
    if grid.shape2d is None:
        raise InvalidInputError("flatten_2d needs a grid with 2D provenance")
    height, width = grid.shape2d
    order = column_major_order(height, width)
    return ProbGrid(grid.values[order])
