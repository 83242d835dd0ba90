"""A minimal per-timestep classifier with hand-rolled backprop and SGD.

The model applies the same (optionally one-hidden-layer) affine map to every
timestep's feature vector. Backpropagation is written out by hand because the
losses' analytic gradients are the point of this package: the whole gradient
path stays auditable, with no autodiff dependency.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ace import (
    ace_ce_loss,
    ace_ce_loss_2d,
    ace_regression_loss,
    counts_from_sequence,
)
from .alphabet import Alphabet
from .ctc import CtcTarget, ctc_loss
from .errors import InvalidInputError, TrainingDivergedError, ZeroProbabilityError
from .grids import LogitGrid, ProbGrid, softmax
from .metrics import cer, count_match, greedy_decode, predicted_counts, sequence_match
from .tasks import GridSample, apply_shuffle, gen_sequences, ShuffleSpec

MODEL_SCHEMA = "aceseq-model-v1"

LOSS_VARIANTS = ("ace_ce", "ace_regression", "ctc")

# per-loss steps sized to each loss's gradient scale: the count
# cross-entropy gradient carries an extra 1/T factor, the squared-count
# gradient an extra count factor
DEFAULT_LEARNING_RATES = {"ace_ce": 2.0, "ace_regression": 0.01, "ctc": 0.1}

THREADS_ENV_VAR = "ACE_SEQ_THREADS"


@dataclass
class ToyModel:
    """Per-timestep classifier: affine, or affine-tanh-affine with a hidden layer."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray | None = None
    b2: np.ndarray | None = None

    @classmethod
    def initialize(
        cls, feature_dim: int, num_classes: int, hidden: int | None = None,
        seed: int = 0, scale: float = 0.01,
    ) -> "ToyModel":
        rng = np.random.default_rng(seed)
        if hidden is None:
            return cls(
                w1=rng.normal(scale=scale, size=(feature_dim, num_classes)),
                b1=np.zeros(num_classes),
            )
        return cls(
            w1=rng.normal(scale=scale, size=(feature_dim, hidden)),
            b1=np.zeros(hidden),
            w2=rng.normal(scale=scale, size=(hidden, num_classes)),
            b2=np.zeros(num_classes),
        )

    @property
    def feature_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def num_classes(self) -> int:
        return self.w1.shape[1] if self.w2 is None else self.w2.shape[1]

    def parameters(self) -> list[np.ndarray]:
        params = [self.w1, self.b1]
        if self.w2 is not None:
            params += [self.w2, self.b2]
        return params


def _timestep_features(sample) -> tuple[np.ndarray, tuple[int, int] | None]:
    """Sample features as a (T, D) matrix plus 2D provenance if any."""
    x = sample.features
    if x.ndim == 3:
        h, w, d = x.shape
        return x.reshape(h * w, d), (h, w)
    return x, None


def forward(model: ToyModel, sample) -> LogitGrid:
    """Per-timestep logits for one sample; grids keep their 2D shape."""
    x, shape2d = _timestep_features(sample)
    logits, _ = _forward_arrays(model, x)
    return LogitGrid(logits, shape2d=shape2d)


def _forward_arrays(model: ToyModel, x: np.ndarray):
    if x.shape[1] != model.feature_dim:
        raise InvalidInputError(
            f"feature dim {x.shape[1]} does not match model dim {model.feature_dim}"
        )
    if model.w2 is None:
        return x @ model.w1 + model.b1, None
    hidden = np.tanh(x @ model.w1 + model.b1)
    return hidden @ model.w2 + model.b2, hidden


def _param_grads(model: ToyModel, x: np.ndarray, hidden, grad_logits: np.ndarray):
    """Backprop a logit gradient to parameter gradients (same order as parameters())."""
    if model.w2 is None:
        return [x.T @ grad_logits, grad_logits.sum(axis=0)]
    gw2 = hidden.T @ grad_logits
    gb2 = grad_logits.sum(axis=0)
    gz = (grad_logits @ model.w2.T) * (1.0 - hidden**2)
    return [x.T @ gz, gz.sum(axis=0), gw2, gb2]


@dataclass(frozen=True)
class TrainConfig:
    loss_variant: str
    learning_rate: float | None = None  # per-variant default when None
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    eval_every: int = 1
    hidden: int | None = None

    def __post_init__(self):
        if self.loss_variant not in LOSS_VARIANTS:
            raise InvalidInputError(
                f"loss_variant must be one of {LOSS_VARIANTS}, got {self.loss_variant!r}"
            )
        if self.epochs < 1 or self.batch_size < 1 or self.eval_every < 1:
            raise InvalidInputError("epochs, batch_size and eval_every must be >= 1")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise InvalidInputError("learning_rate must be positive")

    @property
    def effective_learning_rate(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return DEFAULT_LEARNING_RATES[self.loss_variant]


@dataclass
class TrainResult:
    model: ToyModel
    log: list[dict] = field(default_factory=list)
    loss_history: list[float] = field(default_factory=list)

    @property
    def final_metrics(self) -> dict:
        return self.log[-1] if self.log else {}


def _make_supervision(config: TrainConfig, samples, alphabet: Alphabet):
    """Precompute per-sample loss targets; counts never depend on symbol order."""
    if config.loss_variant == "ctc":
        targets = []
        for sample in samples:
            if isinstance(sample, GridSample):
                raise InvalidInputError(
                    "the alignment-based loss needs an ordered 1D prediction; "
                    "grid samples only carry count supervision"
                )
            targets.append(CtcTarget.from_sequence(sample.annotation, alphabet))
        return targets
    return [
        counts_from_sequence(sample.annotation, alphabet, sample.timesteps)
        for sample in samples
    ]


def _sample_loss_and_grad(config: TrainConfig, probs: ProbGrid, supervision):
    if config.loss_variant == "ace_ce":
        if probs.shape2d is not None:
            return ace_ce_loss_2d(probs, supervision)
        return ace_ce_loss(probs, supervision)
    if config.loss_variant == "ace_regression":
        # order-free aggregate: the grid's own row layout is fine as-is
        return ace_regression_loss(probs, supervision)
    return ctc_loss(probs, supervision)


def train(
    config: TrainConfig,
    train_samples,
    alphabet: Alphabet,
    eval_samples=None,
    model: ToyModel | None = None,
) -> TrainResult:
    """Plain SGD over per-sample losses; deterministic given config.seed.

    Metrics are logged on every ``eval_every``-th epoch and on the last one,
    each entry holding {epoch, loss, cer, seq_acc, count_acc}. The loss is
    the epoch's mean per-sample training loss; the other metrics come from
    ``eval_samples`` (falling back to the training set).
    """
    if not train_samples:
        raise InvalidInputError("training dataset is empty")
    supervision = _make_supervision(config, train_samples, alphabet)
    features = [_timestep_features(s) for s in train_samples]
    if model is None:
        model = ToyModel.initialize(
            feature_dim=features[0][0].shape[1],
            num_classes=alphabet.size,
            hidden=config.hidden,
            seed=config.seed,
        )
    rng = np.random.default_rng(config.seed + 1)  # batch-order stream
    lr = config.effective_learning_rate
    where_eval = eval_samples if eval_samples is not None else train_samples
    result = TrainResult(model=model)
    n = len(train_samples)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            grads = [np.zeros_like(p) for p in model.parameters()]
            for idx in batch:
                x, shape2d = features[idx]
                logits, hidden = _forward_arrays(model, x)
                if not np.all(np.isfinite(logits)):
                    raise TrainingDivergedError(epoch, float("nan"))
                probs = softmax(LogitGrid(logits, shape2d=shape2d))
                try:
                    out = _sample_loss_and_grad(config, probs, supervision[idx])
                except ZeroProbabilityError:
                    # saturated predictions drove the target's probability to
                    # exactly zero, i.e. the loss became infinite
                    raise TrainingDivergedError(epoch, float("inf")) from None
                epoch_loss += out.loss
                for acc, g in zip(grads, _param_grads(model, x, hidden, out.grad_logits)):
                    acc += g
            scale = lr / len(batch)
            for param, grad in zip(model.parameters(), grads):
                param -= scale * grad
        epoch_loss /= n
        if not np.isfinite(epoch_loss):
            raise TrainingDivergedError(epoch, epoch_loss)
        result.loss_history.append(epoch_loss)
        if epoch % config.eval_every == 0 or epoch == config.epochs:
            metrics = evaluate(model, where_eval, alphabet)
            entry = {"epoch": epoch, "loss": epoch_loss}
            entry.update(metrics)
            result.log.append(entry)
    return result


def _eval_workers(requested: int | None) -> int:
    cap = int(os.environ.get(THREADS_ENV_VAR, "1") or "1")
    cap = max(1, cap)
    if requested is None:
        return cap
    return max(1, min(requested, cap))


def evaluate(model: ToyModel, samples, alphabet: Alphabet, workers: int | None = None) -> dict:
    """Decode every sample and report mean CER plus exact-match rates.

    ``count_acc`` is the fraction of samples whose decoded symbol multiset
    equals the annotation's. Parallelism fans out across samples (the model
    is read-only); the ACE_SEQ_THREADS environment variable caps the worker
    count.
    """
    if not samples:
        raise InvalidInputError("evaluation dataset is empty")

    def one(sample):
        decoded = greedy_decode(softmax(forward(model, sample)), alphabet)
        return (
            cer(decoded, sample.annotation),
            sequence_match(decoded, sample.annotation),
            count_match(decoded, sample.annotation),
        )

    n_workers = _eval_workers(workers)
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(one, samples))
    else:
        rows = [one(s) for s in samples]
    cers, seq_ok, count_ok = zip(*rows)
    return {
        "cer": float(np.mean(cers)),
        "seq_acc": float(np.mean(seq_ok)),
        "count_acc": float(np.mean(count_ok)),
    }


def dataset_mean_loss(loss_variant: str, samples, alphabet: Alphabet, model: ToyModel) -> float:
    """Mean per-sample loss of a fixed model over a dataset."""
    if not samples:
        raise InvalidInputError("dataset is empty")
    config = TrainConfig(loss_variant=loss_variant)
    supervision = _make_supervision(config, samples, alphabet)
    total = 0.0
    for sample, target in zip(samples, supervision):
        probs = softmax(forward(model, sample))
        total += _sample_loss_and_grad(config, probs, target).loss
    return total / len(samples)


def count_matrices(model: ToyModel, samples, alphabet: Alphabet):
    """(predicted, true) non-blank count matrices for counting metrics."""
    preds = []
    trues = []
    for sample in samples:
        probs = softmax(forward(model, sample))
        preds.append(predicted_counts(probs, alphabet))
        ann = counts_from_sequence(sample.annotation, alphabet, sample.timesteps)
        trues.append(ann.counts[1:])
    return np.array(preds), np.array(trues)


def save_model(path, model: ToyModel, alphabet: Alphabet) -> None:
    """Write a checkpoint as documented in the README (JSON arrays)."""
    payload = {
        "format": MODEL_SCHEMA,
        "alphabet": list(alphabet.symbols),
        "w1": model.w1.tolist(),
        "b1": model.b1.tolist(),
        "w2": model.w2.tolist() if model.w2 is not None else None,
        "b2": model.b2.tolist() if model.b2 is not None else None,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False)
        fh.write("\n")


def load_model(path) -> tuple[ToyModel, Alphabet]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != MODEL_SCHEMA:
        raise InvalidInputError(f"unsupported model format {payload.get('format')!r}")
    model = ToyModel(
        w1=np.asarray(payload["w1"], dtype=np.float64),
        b1=np.asarray(payload["b1"], dtype=np.float64),
        w2=None if payload["w2"] is None else np.asarray(payload["w2"], dtype=np.float64),
        b2=None if payload["b2"] is None else np.asarray(payload["b2"], dtype=np.float64),
    )
    return model, Alphabet(tuple(payload["alphabet"]))


@dataclass
class ShuffleExperimentResult:
    """Per-(loss, ratio, seed) outcome of the annotation-shuffle experiment."""

    rows: list[dict]
    logs: dict[tuple[str, float, int], list[dict]]

    def log_for(self, loss: str, ratio: float, seed: int) -> list[dict]:
        return self.logs[(loss, float(ratio), int(seed))]


def run_shuffle_experiment(
    ratios,
    losses,
    seeds,
    alphabet: Alphabet,
    *,
    train_count: int = 400,
    test_count: int = 200,
    timesteps: int = 20,
    max_len: int = 6,
    noise_sigma: float = 0.0,
    epochs: int = 20,
    batch_size: int = 32,
    learning_rate: float | None = None,
    base_seed: int = 0,
) -> ShuffleExperimentResult:
    """Train each loss on order-corrupted annotations at several ratios.

    For every seed one fixed train/test pair is generated; per ratio the
    training annotations (only their order) are shuffled. Count supervision
    is invariant to that corruption, so count-based training is expected to
    produce identical runs at every ratio, while alignment-based training
    degrades. Test annotations are never shuffled.

    Requires ``timesteps >= 2 * max_len - 1`` so any permuted annotation
    (which may create adjacent repeats) stays feasible for the
    alignment-based loss.
    """
    if timesteps < 2 * max_len - 1:
        raise InvalidInputError(
            "need timesteps >= 2 * max_len - 1 so shuffled annotations stay feasible"
        )
    rows = []
    logs: dict[tuple[str, float, int], list[dict]] = {}
    for seed_index, seed in enumerate(seeds):
        data_seed = base_seed + 1000 * (seed_index + 1)
        train_data = gen_sequences(
            data_seed, train_count, alphabet, timesteps, max_len, noise_sigma
        )
        test_data = gen_sequences(
            data_seed + 1, test_count, alphabet, timesteps, max_len, noise_sigma
        )
        for ratio in ratios:
            shuffled = apply_shuffle(train_data, ShuffleSpec(float(ratio)), seed=data_seed + 2)
            for loss_name in losses:
                config = TrainConfig(
                    loss_variant=loss_name,
                    learning_rate=learning_rate,
                    epochs=epochs,
                    batch_size=batch_size,
                    seed=int(seed),
                )
                result = train(config, shuffled, alphabet, eval_samples=test_data)
                key = (loss_name, float(ratio), int(seed))
                logs[key] = result.log
                final = result.final_metrics
                rows.append(
                    {
                        "loss": loss_name,
                        "ratio": float(ratio),
                        "seed": int(seed),
                        "final_loss": result.loss_history[-1],
                        "cer": final["cer"],
                        "seq_acc": final["seq_acc"],
                        "count_acc": final["count_acc"],
                    }
                )
    return ShuffleExperimentResult(rows=rows, logs=logs)
