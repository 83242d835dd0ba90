"""Command-line entry point wiring generation, training, evaluation,
gradient checking and benchmarking into reproducible experiments.

Every command takes --seed and is a pure function of its flags; the flags
are echoed into output headers so each artifact records how it was made.
Exit codes: 0 success, 1 check failure, 2 usage or parameter error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .alphabet import make_alphabet
from .bench import BenchSpec, format_table, results_to_csv, run_bench
from .errors import AceSeqError
from .gradcheck import ctc_oracle_check, run_grad_check
from .metrics import modal_count_baseline, rmse_metrics
from .tasks import gen_grids, gen_sequences, load_dataset, save_dataset
from .train import (
    ToyModel,
    TrainConfig,
    count_matrices,
    dataset_mean_loss,
    evaluate,
    load_model,
    run_shuffle_experiment,
    save_model,
    train,
)

CLI_LOSS_NAMES = {"ace-ce": "ace_ce", "ace-reg": "ace_regression", "ctc": "ctc"}

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aceseq",
        description="Count-aggregation sequence losses: data, training, checks, benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset file")
    p.add_argument("--task", choices=("seq1d", "grid2d", "count"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=2000, help="number of samples")
    p.add_argument("--classes", type=int, default=10, help="non-blank classes")
    p.add_argument("--timesteps", type=int, default=20)
    p.add_argument("--max-len", type=int, default=8)
    p.add_argument("--noise-sigma", type=float, default=0.1)
    p.add_argument("--height", type=int, default=6)
    p.add_argument("--width", type=int, default=6)
    p.add_argument("--max-objects", type=int, default=8)
    p.add_argument("--layout", choices=("lines", "curve", "random"), default="random")

    p = sub.add_parser("loss", help="evaluate a loss over a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--loss", choices=sorted(CLI_LOSS_NAMES), required=True)
    p.add_argument("--model", help="checkpoint; a fresh seeded model when omitted")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("grad-check", help="finite-difference gradient verification")
    p.add_argument("--loss", choices=sorted(CLI_LOSS_NAMES), required=True)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--perturb",
        type=float,
        default=0.0,
        help="corrupt the analytic gradient by this offset (negative control)",
    )

    p = sub.add_parser("train", help="train the per-timestep classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--loss", choices=sorted(CLI_LOSS_NAMES), required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eval-every", type=int, default=1)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--eval-data", help="held-out dataset for per-epoch metrics")
    p.add_argument("--out-model", help="write the trained checkpoint here")
    p.add_argument("--log", help="write the metrics log (one JSON object per line)")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--counting", action="store_true", help="also report count RMSE metrics")

    p = sub.add_parser("bench", help="relative speed/memory of the losses")
    p.add_argument("--timesteps", type=int, default=144)
    p.add_argument("--classes", type=int, default=37, help="classes including the blank")
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--seq-len", type=int, default=10)
    p.add_argument("--repeats", type=int, default=9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--parallel", type=int, default=1, help="opt-in batch threads for aggregation losses")
    p.add_argument("--csv", help="also write results as CSV to this path")

    p = sub.add_parser("shuffle-exp", help="annotation-order corruption experiment")
    p.add_argument("--ratios", default="0,0.25,0.5,0.75,1.0")
    p.add_argument("--losses", default="ace-ce,ctc")
    p.add_argument("--seeds", type=int, default=3, help="number of seeds (0..n-1)")
    p.add_argument("--seed", type=int, default=0, help="base seed for data generation")
    p.add_argument("--train-count", type=int, default=400)
    p.add_argument("--test-count", type=int, default=200)
    p.add_argument("--timesteps", type=int, default=20)
    p.add_argument("--max-len", type=int, default=6)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--csv", help="also write the table as CSV to this path")

    return parser


def _echo_flags(args: argparse.Namespace) -> dict:
    flags = {k: v for k, v in vars(args).items() if k != "command"}
    return {"command": args.command, "flags": flags}


def _cmd_gen_data(args) -> int:
    alphabet = make_alphabet(args.classes)
    # the output location is not a generation parameter: identical flags
    # must produce byte-identical files wherever they land
    params = {k: v for k, v in _echo_flags(args)["flags"].items() if k != "out"}
    if args.task == "seq1d":
        samples = gen_sequences(
            args.seed, args.count, alphabet, args.timesteps, args.max_len, args.noise_sigma
        )
    else:
        layout = args.layout if args.task == "grid2d" else "random"
        samples = gen_grids(
            args.seed, args.count, alphabet, args.height, args.width,
            args.max_objects, layout, args.noise_sigma,
        )
    save_dataset(args.out, samples, alphabet, task=args.task, params=params)
    print(f"wrote {len(samples)} samples to {args.out}")
    return EXIT_OK


def _load_or_init_model(model_path, samples, alphabet, seed):
    if model_path:
        model, ckpt_alphabet = load_model(model_path)
        return model, ckpt_alphabet
    sample = samples[0]
    feature_dim = sample.features.shape[-1]
    return ToyModel.initialize(feature_dim, alphabet.size, seed=seed), alphabet


def _cmd_loss(args) -> int:
    samples, alphabet, _ = load_dataset(args.data)
    model, alphabet = _load_or_init_model(args.model, samples, alphabet, args.seed)
    mean_loss = dataset_mean_loss(CLI_LOSS_NAMES[args.loss], samples, alphabet, model)
    print(json.dumps({**_echo_flags(args), "mean_loss": mean_loss, "samples": len(samples)}))
    return EXIT_OK


def _cmd_grad_check(args) -> int:
    variant = CLI_LOSS_NAMES[args.loss]
    report = run_grad_check(
        variant,
        trials=args.trials,
        rel_tol=args.tol,
        seed=args.seed,
        perturbation=args.perturb,
    )
    summary = {
        **_echo_flags(args),
        "max_scaled_error": report.max_scaled_error,
        "max_abs_error": report.max_abs_error,
        "worst_entry": list(report.worst_entry),
        "passed": report.passed,
    }
    if variant == "ctc":
        oracle_trials = min(100, max(10, args.trials))
        summary["enumeration_oracle_max_gap"] = ctc_oracle_check(
            trials=oracle_trials, seed=args.seed
        )
    print(json.dumps(summary))
    if not report.passed:
        print(
            f"FAIL: max scaled error {report.max_scaled_error:.3g} at entry "
            f"{report.worst_entry} (scaled tolerance 1.0)",
            file=sys.stderr,
        )
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _cmd_train(args) -> int:
    samples, alphabet, _ = load_dataset(args.data)
    eval_samples = None
    if args.eval_data:
        eval_samples, _, _ = load_dataset(args.eval_data)
    config = TrainConfig(
        loss_variant=CLI_LOSS_NAMES[args.loss],
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        eval_every=args.eval_every,
        hidden=args.hidden,
    )
    result = train(config, samples, alphabet, eval_samples=eval_samples)
    if args.out_model:
        save_model(args.out_model, result.model, alphabet)
    if args.log:
        with open(args.log, "w", encoding="utf-8") as fh:
            for entry in result.log:
                fh.write(json.dumps(entry) + "\n")
    print(json.dumps({**_echo_flags(args), "final": result.final_metrics}))
    return EXIT_OK


def _cmd_eval(args) -> int:
    samples, alphabet, _ = load_dataset(args.data)
    model, alphabet = load_model(args.model)
    out = {**_echo_flags(args), **evaluate(model, samples, alphabet)}
    if args.counting:
        predicted, true = count_matrices(model, samples, alphabet)
        ours = rmse_metrics(predicted, true)
        baseline = rmse_metrics(modal_count_baseline(true), true)
        out["m_rmse"] = ours.m_rmse
        out["m_rel_rmse"] = ours.m_rel_rmse
        out["baseline_m_rmse"] = baseline.m_rmse
        out["baseline_m_rel_rmse"] = baseline.m_rel_rmse
    print(json.dumps(out))
    return EXIT_OK


def _cmd_bench(args) -> int:
    spec = BenchSpec(
        timesteps=args.timesteps,
        num_classes=args.classes,
        batch=args.batch,
        seq_len=args.seq_len,
        repeats=args.repeats,
    )
    results = run_bench(spec, seed=args.seed, parallel_workers=args.parallel)
    print(json.dumps(_echo_flags(args)))
    print(format_table(results))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(results_to_csv(results))
    return EXIT_OK


def _cmd_shuffle_exp(args) -> int:
    ratios = [float(r) for r in args.ratios.split(",") if r != ""]
    losses = []
    for name in args.losses.split(","):
        name = name.strip()
        if name not in CLI_LOSS_NAMES:
            raise AceSeqError(f"unknown loss {name!r} in --losses")
        losses.append(CLI_LOSS_NAMES[name])
    alphabet = make_alphabet(10)
    result = run_shuffle_experiment(
        ratios,
        losses,
        seeds=list(range(args.seeds)),
        alphabet=alphabet,
        train_count=args.train_count,
        test_count=args.test_count,
        timesteps=args.timesteps,
        max_len=args.max_len,
        noise_sigma=args.noise_sigma,
        epochs=args.epochs,
        base_seed=args.seed,
    )
    print(json.dumps(_echo_flags(args)))
    header = ["loss", "ratio", "seed", "cer", "seq_acc", "count_acc", "final_loss"]
    print("  ".join(h.ljust(10) for h in header))
    lines = []
    for row in result.rows:
        cells = [
            row["loss"], f"{row['ratio']:.2f}", str(row["seed"]),
            f"{row['cer']:.4f}", f"{row['seq_acc']:.4f}",
            f"{row['count_acc']:.4f}", f"{row['final_loss']:.6f}",
        ]
        print("  ".join(c.ljust(10) for c in cells))
        lines.append(cells)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(",".join(header) + "\n")
            for cells in lines:
                fh.write(",".join(cells) + "\n")
    return EXIT_OK


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "loss": _cmd_loss,
    "grad-check": _cmd_grad_check,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "bench": _cmd_bench,
    "shuffle-exp": _cmd_shuffle_exp,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except AceSeqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
