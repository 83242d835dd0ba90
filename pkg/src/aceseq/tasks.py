"""Synthetic datasets for the desk-scale experiments, plus their file format.

Samples carry noisy class-prototype feature vectors instead of images: the
losses under study only ever see per-timestep features, so prototypes keep
the experiments about the losses and finish in seconds. Feature dimension
equals the class count; the prototype of class ``k`` is the ``k``-th unit
vector (the blank's prototype is the 0th).

Datasets serialize as UTF-8 line-delimited JSON: one header object recording
the schema version, alphabet and generator parameters, then one object per
sample with fields ``features`` (nested arrays), ``annotation`` (string) and
``shape`` ([T] for sequences, [H, W] for grids).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .alphabet import Alphabet, make_alphabet
from .errors import CapacityError, InvalidInputError
from .ace import counts_from_sequence

DATASET_SCHEMA = "aceseq-dataset-v1"

LAYOUTS = ("lines", "curve", "random")


@dataclass
class SequenceSample:
    """Per-timestep features with an ordered symbol annotation."""

    features: np.ndarray  # (T, D)
    annotation: str

    @property
    def timesteps(self) -> int:
        return self.features.shape[0]


@dataclass
class GridSample:
    """A 2D feature grid with placed symbols; supervision is counts only.

    ``placements`` holds the ground-truth (class index, row, col) cells when
    the sample came fresh out of the generator; reloaded samples keep only
    the annotation string (whose histogram is the supervision).
    """

    features: np.ndarray  # (H, W, D)
    annotation: str
    placements: list[tuple[int, int, int]] | None = None

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.features.shape[0], self.features.shape[1]

    @property
    def timesteps(self) -> int:
        return self.features.shape[0] * self.features.shape[1]


@dataclass(frozen=True)
class ShuffleSpec:
    """Fraction of samples whose annotation order gets permuted."""

    ratio: float

    def __post_init__(self):
        if not 0.0 <= self.ratio <= 1.0:
            raise InvalidInputError("shuffle ratio must lie in [0, 1]")


def prototype_features(alphabet: Alphabet) -> np.ndarray:
    """One unit-vector prototype per class, blank included (K x K)."""
    return np.eye(alphabet.size)


def _draw_symbols(rng: np.random.Generator, alphabet: Alphabet, length: int) -> str:
    """Random symbols with no adjacent repeats.

    Keeping equal characters apart means a per-timestep argmax decode can
    recover the string exactly (adjacent duplicates would merge), and any
    permutation of the annotation still fits in the same timestep budget.
    """
    if length > 1 and alphabet.size < 3:
        raise InvalidInputError(
            "sequences longer than 1 need at least two distinct classes"
        )
    symbols: list[str] = []
    while len(symbols) < length:
        sym = alphabet.symbol(int(rng.integers(1, alphabet.size)))
        if symbols and sym == symbols[-1]:
            continue
        symbols.append(sym)
    return "".join(symbols)


def gen_sequences(
    seed: int,
    count: int,
    alphabet: Alphabet,
    timesteps: int,
    max_len: int,
    noise_sigma: float = 0.1,
) -> list[SequenceSample]:
    """Sequence samples: characters planted at ordered positions.

    Each sample draws a length in [1, max_len], plants the character
    prototypes at a sorted random subset of positions (blank prototypes
    elsewhere) and adds Gaussian noise. Deterministic in (seed, parameters).
    """
    if max_len > timesteps:
        raise CapacityError(f"max_len {max_len} exceeds timesteps {timesteps}")
    if max_len < 1 or count < 0:
        raise InvalidInputError("need max_len >= 1 and count >= 0")
    rng = np.random.default_rng(seed)
    protos = prototype_features(alphabet)
    samples = []
    for _ in range(count):
        length = int(rng.integers(1, max_len + 1))
        annotation = _draw_symbols(rng, alphabet, length)
        positions = np.sort(rng.choice(timesteps, size=length, replace=False))
        features = np.tile(protos[0], (timesteps, 1))
        for pos, sym in zip(positions, annotation):
            features[pos] = protos[alphabet.index(sym)]
        if noise_sigma > 0:
            features += rng.normal(scale=noise_sigma, size=features.shape)
        samples.append(SequenceSample(features=features, annotation=annotation))
    return samples


def _curve_cells(rng: np.random.Generator, height: int, width: int, n: int):
    """Cells along a random sine arc, one per column, left to right."""
    phase = rng.uniform(0.0, 2.0 * math.pi)
    amplitude = rng.uniform(0.2, 0.5) * (height - 1)
    mid = (height - 1) / 2.0
    cols = np.linspace(0, width - 1, num=n).round().astype(int)
    cells = []
    for w in cols:
        h = int(round(mid + amplitude * math.sin(phase + 2.0 * math.pi * w / width)))
        cells.append((min(max(h, 0), height - 1), int(w)))
    return cells


def gen_grids(
    seed: int,
    count: int,
    alphabet: Alphabet,
    height: int,
    width: int,
    max_objects: int,
    layout: str = "random",
    noise_sigma: float = 0.1,
) -> list[GridSample]:
    """Grid samples with symbols placed per layout; supervision is counts.

    Per sample the object count is uniform on {0, ..., max_objects} and each
    object's class is uniform over the non-blank classes. Layouts:

    - ``lines``: objects fill cells in reading order, so every row used is a
      contiguous run starting at its left edge.
    - ``curve``: one object per column along a random sine arc (object count
      capped at the width).
    - ``random``: distinct uniformly random cells.
    """
    if layout not in LAYOUTS:
        raise InvalidInputError(f"layout must be one of {LAYOUTS}, got {layout!r}")
    if max_objects > height * width:
        raise CapacityError(f"max_objects {max_objects} exceeds grid cells {height * width}")
    rng = np.random.default_rng(seed)
    protos = prototype_features(alphabet)
    samples = []
    for _ in range(count):
        n = int(rng.integers(0, max_objects + 1))
        if layout == "curve":
            n = min(n, width)
        if layout == "lines":
            cells = [(i // width, i % width) for i in range(n)]
        elif layout == "curve":
            cells = _curve_cells(rng, height, width, n)
        else:
            flat = rng.choice(height * width, size=n, replace=False)
            cells = [(int(i) // width, int(i) % width) for i in flat]
        classes = [int(rng.integers(1, alphabet.size)) for _ in range(n)]
        features = np.tile(protos[0], (height, width, 1))
        placements = []
        for cls, (h, w) in zip(classes, cells):
            features[h, w] = protos[cls]
            placements.append((cls, h, w))
        if noise_sigma > 0:
            features += rng.normal(scale=noise_sigma, size=features.shape)
        annotation = "".join(alphabet.symbol(cls) for cls, _, _ in placements)
        samples.append(
            GridSample(features=features, annotation=annotation, placements=placements)
        )
    return samples


def apply_shuffle(dataset, spec: ShuffleSpec, seed: int):
    """Permute the annotation order of a chosen fraction of samples.

    Features are untouched and the per-class counts of every annotation are
    unchanged by construction; only the order of symbols moves. The selected
    subset is a deterministic function of (seed, ratio, dataset size).
    """
    rng = np.random.default_rng(seed)
    n = len(dataset)
    n_selected = int(round(spec.ratio * n))
    selected = set(rng.choice(n, size=n_selected, replace=False).tolist()) if n else set()
    out = []
    for i, sample in enumerate(dataset):
        if i in selected and len(sample.annotation) > 1:
            permuted = "".join(rng.permutation(list(sample.annotation)))
            out.append(dataclasses.replace(sample, annotation=permuted))
        else:
            out.append(dataclasses.replace(sample))
    return out


def annotation_counts(sample, alphabet: Alphabet):
    """Count annotation of a sample over its own timestep budget."""
    return counts_from_sequence(sample.annotation, alphabet, sample.timesteps)


def save_dataset(path, samples, alphabet: Alphabet, task: str, params: dict) -> None:
    """Write header + one JSON line per sample (UTF-8, newline-delimited)."""
    header = {
        "schema": DATASET_SCHEMA,
        "task": task,
        "alphabet": list(alphabet.symbols),
        "params": params,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for sample in samples:
            if isinstance(sample, GridSample):
                shape = list(sample.grid_shape)
            else:
                shape = [sample.timesteps]
            record = {
                "features": sample.features.tolist(),
                "annotation": sample.annotation,
                "shape": shape,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_dataset(path) -> tuple[list, Alphabet, dict]:
    """Read a dataset file back into samples, its alphabet and the header."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line:
            raise InvalidInputError(f"{path} is empty")
        header = json.loads(header_line)
        if header.get("schema") != DATASET_SCHEMA:
            raise InvalidInputError(
                f"unsupported dataset schema {header.get('schema')!r}"
            )
        symbols = header["alphabet"]
        alphabet = Alphabet(tuple(symbols))
        samples = []
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            features = np.asarray(record["features"], dtype=np.float64)
            shape = record["shape"]
            if len(shape) == 2:
                samples.append(
                    GridSample(features=features, annotation=record["annotation"])
                )
            else:
                samples.append(
                    SequenceSample(features=features, annotation=record["annotation"])
                )
    return samples, alphabet, header
