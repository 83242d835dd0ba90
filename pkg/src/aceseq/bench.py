"""Timing and memory comparison of the aggregation losses against the
alignment-summing baseline.

Wall times are medians over repeated forward+backward passes on identical
fixed-seed inputs, after warmup. Only relative statements (ratios between
the losses on the same machine) are meaningful; absolute milliseconds are
hardware-specific and never asserted.

Auxiliary workspace is accounted analytically as the memory the minimal
streaming algorithm needs beyond its inputs and outputs:

- aggregation losses: one class-sized accumulator per sample (the aggregate,
  reused in place for the upstream coefficients), 8*K bytes; independent of
  the number of timesteps.
- alignment baseline: the forward and backward tables over the
  blank-interleaved target, 2 * T * (2*seq_len+1) doubles per sample.

A measured peak-allocation figure (tracemalloc, which includes numpy's
temporaries) is reported alongside as a cross-check but carries each
implementation's vectorization overhead, so assertions use the analytic
numbers only.
"""

from __future__ import annotations

import csv
import io
import time
import tracemalloc
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ace import ace_ce_loss, ace_regression_loss, counts_from_sequence
from .alphabet import make_alphabet
from .ctc import CtcTarget, ctc_loss
from .errors import CapacityError, InvalidInputError
from .grids import LogitGrid, softmax
from .tasks import _draw_symbols

BENCH_LOSSES = ("ace_ce", "ace_regression", "ctc")


@dataclass(frozen=True)
class BenchSpec:
    """One benchmark configuration (shared inputs for every loss)."""

    timesteps: int
    num_classes: int
    batch: int
    seq_len: int
    repeats: int = 9
    warmup: int = 2

    def __post_init__(self):
        if min(self.timesteps, self.num_classes - 1, self.batch, self.seq_len, self.repeats) < 1:
            raise InvalidInputError("all benchmark dimensions must be positive (K >= 2)")
        if self.seq_len > self.timesteps:
            raise CapacityError("seq_len must not exceed timesteps")


@dataclass(frozen=True)
class BenchResult:
    loss_name: str
    spec: BenchSpec
    median_seconds: float
    aux_bytes: int
    measured_peak_bytes: int
    param_count: int = 0  # both loss families are parameter-free

    @property
    def median_ms(self) -> float:
        return self.median_seconds * 1e3


def ace_workspace_bytes(spec: BenchSpec) -> int:
    """Analytic auxiliary workspace of the aggregation losses (whole batch)."""
    return 8 * spec.num_classes * spec.batch


def ctc_workspace_bytes(spec: BenchSpec) -> int:
    """Analytic auxiliary workspace of the alignment baseline (whole batch)."""
    return 8 * 2 * spec.timesteps * (2 * spec.seq_len + 1) * spec.batch


def _build_inputs(spec: BenchSpec, seed: int):
    """Shared fixed-seed batch: probability grids plus both supervision forms."""
    rng = np.random.default_rng(seed)
    alphabet = make_alphabet(spec.num_classes - 1)
    grids = []
    annotations = []
    targets = []
    for _ in range(spec.batch):
        logits = LogitGrid(rng.normal(size=(spec.timesteps, spec.num_classes)))
        grids.append(softmax(logits))
        sequence = _draw_symbols(rng, alphabet, spec.seq_len)
        annotations.append(counts_from_sequence(sequence, alphabet, spec.timesteps))
        targets.append(CtcTarget.from_sequence(sequence, alphabet))
    return grids, annotations, targets


def _batch_pass(loss_name: str, grids, annotations, targets, workers: int = 1):
    if loss_name == "ace_ce":
        call = lambda i: ace_ce_loss(grids[i], annotations[i])
    elif loss_name == "ace_regression":
        call = lambda i: ace_regression_loss(grids[i], annotations[i])
    elif loss_name == "ctc":
        call = lambda i: ctc_loss(grids[i], targets[i])
    else:
        raise InvalidInputError(f"unknown loss {loss_name!r}")
    indices = range(len(grids))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return [r.loss for r in pool.map(call, indices)]
    return [call(i).loss for i in indices]


def run_bench(
    spec: BenchSpec,
    seed: int = 0,
    losses=BENCH_LOSSES,
    parallel_workers: int = 1,
) -> list[BenchResult]:
    """Median forward+backward wall time per batch for each loss.

    ``parallel_workers > 1`` opts into batch-level threading for the
    aggregation losses (their samples are independent); the alignment
    baseline always runs sequentially, matching its per-timestep data
    dependency.
    """
    grids, annotations, targets = _build_inputs(spec, seed)
    results = []
    for loss_name in losses:
        workers = parallel_workers if loss_name.startswith("ace") else 1
        for _ in range(spec.warmup):
            _batch_pass(loss_name, grids, annotations, targets, workers)
        times = []
        for _ in range(spec.repeats):
            start = time.perf_counter()
            _batch_pass(loss_name, grids, annotations, targets, workers)
            times.append(time.perf_counter() - start)
        tracemalloc.start()
        _batch_pass(loss_name, grids, annotations, targets, workers)
        _, peak = tracemalloc.get_traced_memory()
        tracemalloc.stop()
        aux = ace_workspace_bytes(spec) if loss_name.startswith("ace") else ctc_workspace_bytes(spec)
        results.append(
            BenchResult(
                loss_name=loss_name,
                spec=spec,
                median_seconds=float(np.median(times)),
                aux_bytes=aux,
                measured_peak_bytes=int(peak),
            )
        )
    return results


_COLUMNS = ("loss", "T", "K", "batch", "seq_len", "median_ms", "aux_bytes", "measured_peak_bytes", "params")


def _rows(results) -> list[list]:
    rows = []
    for r in results:
        rows.append(
            [
                r.loss_name,
                r.spec.timesteps,
                r.spec.num_classes,
                r.spec.batch,
                r.spec.seq_len,
                f"{r.median_ms:.3f}",
                r.aux_bytes,
                r.measured_peak_bytes,
                r.param_count,
            ]
        )
    return rows


def format_table(results) -> str:
    """Aligned text table of benchmark results."""
    rows = [[str(c) for c in row] for row in _rows(results)]
    header = list(_COLUMNS)
    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) for i in range(len(header))]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines)


def results_to_csv(results) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(_COLUMNS)
    writer.writerows(_rows(results))
    return buf.getvalue()
