"""Command-line entry point: generate, train, benchmark, ablate.

Flags may also be supplied through a flat ``key = value`` config file
(``--config``); explicit flags override file values. Exit codes: 0
success, 2 refusal to overwrite, 64 usage or configuration error, 66
missing input file, 70 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .data import SyntheticSpec, generate_synthetic, load_csv, write_csv
from .encoder import EncoderConfig, OptimConfig, save_checkpoint
from .errors import (
    ConfigError,
    DynLocRepError,
    InputError,
    NumericalError,
    ParseError,
)
from .evaluation import (
    RidgeConfig,
    ablate_norms,
    benchmark,
    max_workers_from_env,
)
from .geometry import DistanceNorm
from .kernels import KernelSpec
from .losses import LossVariant, NeighborSpace, Reduction
from .training import TrainConfig, train

EXIT_OK = 0
EXIT_OVERWRITE = 2
EXIT_USAGE = 64
EXIT_MISSING_INPUT = 66
EXIT_NUMERICAL = 70

PROG = "dynlocrep"

_VARIANT_NAMES = [v.value for v in LossVariant]
_NORM_NAMES = [n.value for n in DistanceNorm]


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 64."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _formatter(prog):
    return argparse.ArgumentDefaultsHelpFormatter(prog, width=96)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonnegative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


def _nonnegative_float(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {value}")
    return value


def _int_list(text: str) -> list[int]:
    if not text.strip():
        raise argparse.ArgumentTypeError("list must not be empty")
    try:
        return [int(tok) for tok in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _epoch_list(text: str) -> list[int]:
    if not text.strip():
        return []
    values = _int_list(text)
    if any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("export epochs are 1-based and must be >= 1")
    return values


def _dims(text: str) -> list[int]:
    values = _int_list(text)
    if any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("layer widths must be >= 1")
    return values


def _float_list(text: str) -> list[float]:
    if not text.strip():
        raise argparse.ArgumentTypeError("list must not be empty")
    try:
        return [float(tok) for tok in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _variant_list(text: str) -> list[str]:
    names = [tok.strip() for tok in text.split(",") if tok.strip()]
    if not names:
        raise argparse.ArgumentTypeError("need at least one loss variant")
    for name in names:
        if name not in _VARIANT_NAMES:
            raise argparse.ArgumentTypeError(
                f"unknown loss {name!r}; choose from {', '.join(_VARIANT_NAMES)}"
            )
    return names


def _norm_list(text: str) -> list[str]:
    names = [tok.strip() for tok in text.split(",") if tok.strip()]
    if not names:
        raise argparse.ArgumentTypeError("need at least one distance norm")
    for name in names:
        if name not in _NORM_NAMES:
            raise argparse.ArgumentTypeError(
                f"unknown norm {name!r}; choose from {', '.join(_NORM_NAMES)}"
            )
    return names


def _add_config_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config",
        default=None,
        metavar="FILE",
        help="flat 'key = value' config file; explicit flags override it",
    )


def _add_training_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=_positive_int, default=50, help="training epochs")
    parser.add_argument("--batch-size", type=_positive_int, default=32, help="samples per batch")
    parser.add_argument("--lr", type=_positive_float, default=1e-4, help="initial learning rate")
    parser.add_argument(
        "--lr-decay", type=_positive_float, default=0.9, help="learning-rate decay factor"
    )
    parser.add_argument(
        "--lr-decay-every", type=_positive_int, default=10, help="epochs between decays"
    )
    parser.add_argument(
        "--weight-decay", type=_nonnegative_float, default=5e-5, help="L2 weight decay"
    )
    parser.add_argument(
        "--kernel-sigma",
        type=_positive_float,
        default=6.0,
        help="gaussian kernel bandwidth in label units",
    )
    parser.add_argument(
        "--temperature", type=_positive_float, default=0.5, help="similarity temperature"
    )
    parser.add_argument(
        "--nn-final", type=_positive_int, default=14, help="final neighbor count of the schedule"
    )
    parser.add_argument(
        "--nn-step-size", type=_positive_int, default=1, help="epochs between schedule steps"
    )
    parser.add_argument(
        "--nn-space",
        choices=[s.value for s in NeighborSpace],
        default=NeighborSpace.EMBEDDING.value,
        help="space in which neighbors are selected",
    )
    parser.add_argument(
        "--reduction",
        choices=[r.value for r in Reduction],
        default=Reduction.SUM.value,
        help="loss reduction over anchors",
    )
    parser.add_argument(
        "--hidden-dims", type=_dims, default=[64, 64], help="encoder hidden widths"
    )
    parser.add_argument(
        "--embed-dim", type=_positive_int, default=32, help="encoder output dimension"
    )


def _add_dataset_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--data", default=None, metavar="CSV", help="input dataset; omit to use synthetic data"
    )
    parser.add_argument(
        "--synthetic-n",
        type=_positive_int,
        default=500,
        help="synthetic dataset size when --data is omitted",
    )
    parser.add_argument(
        "--data-seed", type=_nonnegative_int, default=0, help="synthetic dataset seed"
    )


def _add_protocol_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--seeds", type=_int_list, default=[0, 1, 2, 3, 4], help="comma-separated run seeds"
    )
    parser.add_argument(
        "--test-fraction", type=_fraction, default=0.2, help="held-out fraction per split"
    )
    parser.add_argument(
        "--ridge-lambda", type=_nonnegative_float, default=1.0, help="ridge regularization"
    )


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(
        prog=PROG,
        description=(
            "Contrastive regression with dynamic localized repulsion: data generation, "
            "encoder training, benchmarking, and the distance-norm ablation."
        ),
        formatter_class=_formatter,
    )
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands: dict[str, argparse.ArgumentParser] = {}

    gen = subparsers.add_parser(
        "generate",
        help="write a synthetic dataset CSV",
        description="Generate a bimodal synthetic regression dataset and write it as CSV.",
        formatter_class=_formatter,
    )
    _add_config_flag(gen)
    gen.add_argument("--n", type=_positive_int, default=500, help="number of samples")
    gen.add_argument("--seed", type=_nonnegative_int, default=0, help="generator seed")
    gen.add_argument("--out", default=None, metavar="CSV", help="output path (required)")
    gen.add_argument(
        "--force", action="store_true", help="overwrite an existing output file"
    )
    gen.add_argument("--feature-dim", type=_positive_int, default=16, help="feature count")
    gen.add_argument(
        "--informative-dims",
        type=_nonnegative_int,
        default=8,
        help="label-dependent feature count",
    )
    gen.add_argument(
        "--noise-std",
        type=_nonnegative_float,
        default=0.1,
        help="observation noise on informative features",
    )
    gen.add_argument(
        "--mix-means", type=_float_list, default=[25.0, 68.0], help="label component means"
    )
    gen.add_argument(
        "--mix-stds", type=_float_list, default=[5.0, 6.0], help="label component stds"
    )
    gen.add_argument(
        "--mix-weights",
        type=_float_list,
        default=[0.5, 0.5],
        help="label component weights (sum to 1)",
    )
    gen.set_defaults(handler=_cmd_generate)
    commands["generate"] = gen

    tr = subparsers.add_parser(
        "train",
        help="train an encoder on a dataset CSV",
        description=(
            "Train the encoder with a contrastive regression loss; writes a checkpoint, "
            "a JSONL trace, and optional embedding exports under --out-dir."
        ),
        formatter_class=_formatter,
    )
    _add_config_flag(tr)
    tr.add_argument("--data", default=None, metavar="CSV", help="input dataset (required)")
    tr.add_argument("--out-dir", default=None, metavar="DIR", help="artifact directory (required)")
    tr.add_argument(
        "--loss", choices=_VARIANT_NAMES, default=LossVariant.DYN_LOC_REP.value, help="loss variant"
    )
    tr.add_argument("--seed", type=_nonnegative_int, default=0, help="run seed")
    tr.add_argument(
        "--distance-norm",
        choices=_NORM_NAMES,
        default=DistanceNorm.MANHATTAN.value,
        help="neighbor-selection distance norm",
    )
    tr.add_argument(
        "--export-epochs",
        type=_epoch_list,
        default=[],
        help="1-based epochs after which to export train-set embeddings (e.g. 1,6,21,30,40,50)",
    )
    _add_training_flags(tr)
    tr.set_defaults(handler=_cmd_train)
    commands["train"] = tr

    bm = subparsers.add_parser(
        "benchmark",
        help="compare loss variants across seeds",
        description=(
            "Train every requested variant across seeds, score ridge-readout MAE on held-out "
            "splits, and write a JSON report including raw-feature and untrained-encoder "
            "baselines."
        ),
        formatter_class=_formatter,
    )
    _add_config_flag(bm)
    _add_dataset_flags(bm)
    _add_protocol_flags(bm)
    bm.add_argument(
        "--variants",
        type=_variant_list,
        default=_VARIANT_NAMES,
        help="comma-separated loss variants",
    )
    bm.add_argument(
        "--distance-norm",
        choices=_NORM_NAMES,
        default=DistanceNorm.MANHATTAN.value,
        help="neighbor-selection distance norm for the localized loss",
    )
    bm.add_argument(
        "--out", default="benchmark_report.json", metavar="JSON", help="report path"
    )
    _add_training_flags(bm)
    bm.set_defaults(handler=_cmd_benchmark)
    commands["benchmark"] = bm

    ab = subparsers.add_parser(
        "ablate",
        help="sweep neighbor-selection distance norms",
        description=(
            "Fix the localized loss and sweep the neighbor-selection distance norm, "
            "reporting per-norm MAE next to published reference values."
        ),
        formatter_class=_formatter,
    )
    _add_config_flag(ab)
    _add_dataset_flags(ab)
    _add_protocol_flags(ab)
    ab.add_argument(
        "--norms", type=_norm_list, default=_NORM_NAMES, help="comma-separated distance norms"
    )
    ab.add_argument(
        "--out", default="ablation_report.json", metavar="JSON", help="report path"
    )
    _add_training_flags(ab)
    ab.set_defaults(handler=_cmd_ablate)
    commands["ablate"] = ab

    return parser, commands


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse a flat ``key = value`` file with ``#`` comments."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file {path} does not exist")
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{path}: line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ParseError(f"{path}: line {lineno}: empty key")
        if key in entries:
            raise ParseError(f"{path}: line {lineno}: duplicate key {key!r}")
        entries[key] = value
    return entries


_BOOL_TEXT = {
    "1": True,
    "true": True,
    "yes": True,
    "on": True,
    "0": False,
    "false": False,
    "no": False,
    "off": False,
}


def _apply_config_file(argv: list[str], commands: dict[str, argparse.ArgumentParser]) -> None:
    """Inject config-file values as parser defaults for the invoked command.

    Keys use the long flag spelling without dashes. Unknown keys are
    rejected; explicit command-line flags still win because they override
    defaults.
    """
    if not argv or argv[0] not in commands:
        return
    config_path = None
    for idx, token in enumerate(argv):
        if token == "--config":
            if idx + 1 >= len(argv):
                return  # parser will report the missing value
            config_path = argv[idx + 1]
        elif token.startswith("--config="):
            config_path = token.split("=", 1)[1]
    if config_path is None:
        return
    subparser = commands[argv[0]]
    entries = read_config_file(config_path)
    actions = {
        option[2:]: action
        for action in subparser._actions
        for option in action.option_strings
        if option.startswith("--")
    }
    defaults = {}
    for key, text in entries.items():
        if key in ("config", "help") or key not in actions:
            raise ConfigError(f"unknown config key {key!r} for command {argv[0]!r}")
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            flag = _BOOL_TEXT.get(text.lower())
            if flag is None:
                raise ConfigError(f"config key {key!r} expects a boolean, got {text!r}")
            defaults[action.dest] = flag
            continue
        convert = action.type if action.type is not None else str
        try:
            value = convert(text)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from None
        if action.choices is not None and value not in action.choices:
            raise ConfigError(
                f"config key {key!r}: {value!r} is not one of {sorted(action.choices)}"
            )
        defaults[action.dest] = value
    subparser.set_defaults(**defaults)


def _require(parser_name: str, args: argparse.Namespace, attr: str, flag: str):
    value = getattr(args, attr)
    if value is None:
        raise ConfigError(f"{parser_name}: {flag} is required")
    return value


def _load_dataset(args: argparse.Namespace) -> tuple:
    if args.data is not None:
        path = Path(args.data)
        if not path.exists():
            raise FileNotFoundError(f"dataset {path} does not exist")
        return load_csv(path), str(path)
    spec = SyntheticSpec(n=args.synthetic_n)
    return generate_synthetic(spec, args.data_seed), f"synthetic(n={spec.n}, seed={args.data_seed})"


def _train_config(args: argparse.Namespace, variant: LossVariant, seed: int) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=seed,
        variant=variant,
        kernel=KernelSpec(bandwidth=args.kernel_sigma),
        nn_final=args.nn_final,
        nn_step_size=args.nn_step_size,
        distance_norm=DistanceNorm(args.distance_norm) if hasattr(args, "distance_norm") else DistanceNorm.MANHATTAN,
        temperature=args.temperature,
        nn_space=NeighborSpace(args.nn_space),
        reduction=Reduction(args.reduction),
        export_epochs=tuple(getattr(args, "export_epochs", ())),
    )


def _optim_config(args: argparse.Namespace) -> OptimConfig:
    return OptimConfig(
        learning_rate=args.lr,
        decay_factor=args.lr_decay,
        decay_every=args.lr_decay_every,
        weight_decay=args.weight_decay,
    )


def _encoder_config(args: argparse.Namespace, input_dim: int) -> EncoderConfig:
    return EncoderConfig(
        input_dim=input_dim,
        hidden_dims=tuple(args.hidden_dims),
        output_dim=args.embed_dim,
    )


def _cmd_generate(args: argparse.Namespace) -> int:
    out = Path(_require("generate", args, "out", "--out"))
    if out.exists() and not args.force:
        print(f"refusing to overwrite {out}; pass --force to replace it", file=sys.stderr)
        return EXIT_OVERWRITE
    spec = SyntheticSpec(
        n=args.n,
        feature_dim=args.feature_dim,
        mixture_means=tuple(args.mix_means),
        mixture_stds=tuple(args.mix_stds),
        mixture_weights=tuple(args.mix_weights),
        informative_dims=args.informative_dims,
        noise_std=args.noise_std,
    )
    dataset = generate_synthetic(spec, args.seed)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(dataset, out)
    print(f"wrote {dataset.n} samples x {dataset.feature_dim} features to {out}")
    return EXIT_OK


def _write_embedding_export(path: Path, epoch: int, ids, labels, embeddings) -> None:
    dim = embeddings.shape[1]
    lines = ["epoch,id,y," + ",".join(f"z{j}" for j in range(dim))]
    for i in range(embeddings.shape[0]):
        cells = [str(epoch), ids[i], repr(float(labels[i]))]
        cells.extend(repr(float(v)) for v in embeddings[i])
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def _cmd_train(args: argparse.Namespace) -> int:
    data_path = Path(_require("train", args, "data", "--data"))
    if not data_path.exists():
        raise FileNotFoundError(f"dataset {data_path} does not exist")
    out_dir = Path(_require("train", args, "out_dir", "--out-dir"))
    dataset = load_csv(data_path)
    config = _train_config(args, LossVariant(args.loss), args.seed)
    result = train(
        dataset, config, _optim_config(args), _encoder_config(args, dataset.feature_dim)
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / "trace.jsonl"
    trace_path.write_text("".join(json.dumps(entry) + "\n" for entry in result.trace))
    checkpoint_path = out_dir / "encoder.txt"
    save_checkpoint(result.encoder, checkpoint_path)
    for epoch, embeddings in sorted(result.exports.items()):
        _write_embedding_export(
            out_dir / f"embeddings_epoch{epoch}.csv", epoch, dataset.ids, dataset.labels, embeddings
        )
    final_loss = result.trace[-1]["mean_loss"] if result.trace else float("nan")
    print(f"trained {config.variant.value} for {config.epochs} epochs on {dataset.n} samples")
    print(f"final mean batch loss {final_loss:.6f}")
    print(f"artifacts: {checkpoint_path}, {trace_path}" + (
        f", {len(result.exports)} embedding export(s)" if result.exports else ""
    ))
    return EXIT_OK


def _summarize(entries: dict, label: str) -> None:
    for name, entry in entries.items():
        print(f"  {label} {name}: MAE {entry['mean_mae']:.4f} +- {entry['std_mae']:.4f}")


def _cmd_benchmark(args: argparse.Namespace) -> int:
    dataset, source = _load_dataset(args)
    variants = [LossVariant(name) for name in args.variants]
    report = benchmark(
        dataset,
        variants,
        args.seeds,
        _train_config(args, variants[0], args.seeds[0]),
        _optim_config(args),
        _encoder_config(args, dataset.feature_dim),
        RidgeConfig(regularization=args.ridge_lambda),
        test_fraction=args.test_fraction,
        dataset_source=source,
        max_workers=max_workers_from_env(),
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2) + "\n")
    print(f"benchmark over seeds {args.seeds} on {source}")
    _summarize(report["variants"], "variant")
    _summarize(report["baselines"], "baseline")
    print(f"report written to {out}")
    return EXIT_OK


def _cmd_ablate(args: argparse.Namespace) -> int:
    dataset, source = _load_dataset(args)
    norms = [DistanceNorm(name) for name in args.norms]
    report = ablate_norms(
        dataset,
        norms,
        args.seeds,
        _train_config(args, LossVariant.DYN_LOC_REP, args.seeds[0]),
        _optim_config(args),
        _encoder_config(args, dataset.feature_dim),
        RidgeConfig(regularization=args.ridge_lambda),
        test_fraction=args.test_fraction,
        dataset_source=source,
        max_workers=max_workers_from_env(),
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2) + "\n")
    print(f"distance-norm ablation over seeds {args.seeds} on {source}")
    _summarize(report["norms"], "norm")
    _summarize(report["baselines"], "baseline")
    print(f"report written to {out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        parser, commands = build_parser()
        _apply_config_file(argv, commands)
        args = parser.parse_args(argv)
        if getattr(args, "handler", None) is None:
            parser.print_help()
            return EXIT_USAGE
        return args.handler(args)
    except SystemExit as exc:
        code = exc.code
        if code is None:
            return EXIT_OK
        return code if isinstance(code, int) else EXIT_USAGE
    except (ConfigError, InputError, ParseError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except NumericalError as exc:
        print(f"{PROG}: error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DynLocRepError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
