"""Command-line entry point.

Subcommands: train, eval, predict, augment-preview, synth, and lr-sweep
(an alias for ``train --lr-sweep``). Every run is reproducible: all
randomness flows from ``--seed`` (subsystem seeds are hashed from it), and
train runs echo their fully resolved configuration into the output
directory so ``--config`` can replay them.

Exit codes: 0 success, 2 input error, 3 model/weights error, 1 internal.

Heavy imports happen inside the handlers so ``--threads`` can pin BLAS
thread counts before numpy loads.
"""

from __future__ import annotations

import argparse
import os
import sys

from .errors import InputDataError, LcnnError, WeightsError

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_WEIGHTS = 3

# Defaults for every train flag; flags override config-file entries, which
# override these.
TRAIN_DEFAULTS = {
    "data": None,
    "out": None,
    "epochs": 50,
    "lr": 0.005,
    "optimizer": "adam",
    "batch_size": 32,
    "seed": 42,
    "augment": "off",
    "augment_mult": 1,
    "train_ratio": 0.7,
    "precision": 32,
    "s2": 64,
    "lr_sweep": False,
    "threads": 0,
}


def parse_config_file(path: str) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment; keys use flag names."""
    values: dict = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise InputDataError(f"{path}:{lineno}: expected 'key = value'")
                key, value = (part.strip() for part in line.split("=", 1))
                values[key.replace("-", "_")] = value
    except OSError as exc:
        raise InputDataError(f"cannot read config file {path}: {exc}") from exc
    return values


def _coerce(key: str, value, target_type):
    if value is None or not isinstance(value, str):
        return value
    try:
        if target_type is bool:
            return value.lower() in ("1", "true", "on", "yes")
        return target_type(value)
    except ValueError as exc:
        raise InputDataError(f"bad value for {key}: {value!r}") from exc


def resolve_train_config(args) -> dict:
    """Merge defaults, config file and explicit flags (flags win)."""
    resolved = dict(TRAIN_DEFAULTS)
    if args.config:
        file_values = parse_config_file(args.config)
        for key, value in file_values.items():
            if key not in resolved:
                raise InputDataError(f"unknown config key {key!r}")
            resolved[key] = _coerce(key, value, type(TRAIN_DEFAULTS[key]) if TRAIN_DEFAULTS[key] is not None else str)
    for key in resolved:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            resolved[key] = flag_value
    if resolved["data"] is None:
        raise InputDataError("--data is required (flag or config file)")
    if resolved["out"] is None:
        raise InputDataError("--out is required (flag or config file)")
    resolved["lr_sweep"] = bool(resolved["lr_sweep"]) if not isinstance(resolved["lr_sweep"], str) else resolved["lr_sweep"].lower() in ("1", "true", "on", "yes")
    return resolved


def write_config_snapshot(resolved: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(resolved):
            value = resolved[key]
            if isinstance(value, bool):
                value = "on" if value else "off"
            fh.write(f"{key} = {value}\n")


def _apply_threads(threads: int) -> None:
    """Pin BLAS pools before numpy is imported; 0 leaves the default."""
    if threads and threads > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)


def cmd_train(args) -> int:
    resolved = resolve_train_config(args)
    _apply_threads(int(resolved["threads"]))

    from dataclasses import replace as dc_replace

    from .augment import AugmentConfig
    from .data import balance_train_set, export_manifest, ingest_directory, stratified_split, SplitSpec
    from .model import ModelSpec, build_model, save_weights
    from .tensor import derive_seed
    from .train import TrainConfig, emit_curves, format_float, lr_sweep, train
    from .metrics import format_metric

    if not os.path.isdir(resolved["data"]):
        raise InputDataError(f"data directory not found: {resolved['data']}")
    os.makedirs(resolved["out"], exist_ok=True)
    write_config_snapshot(resolved, os.path.join(resolved["out"], "config.txt"))

    seed = int(resolved["seed"])
    manifest = ingest_directory(resolved["data"])
    stratified_split(manifest, SplitSpec(train_ratio=float(resolved["train_ratio"]),
                                         seed=derive_seed(seed, "split")))
    augment_on = str(resolved["augment"]).lower() in ("1", "true", "on", "yes")
    if augment_on:
        balance_train_set(manifest, AugmentConfig(seed=seed), seed=derive_seed(seed, "augment"),
                          multiplier=int(resolved["augment_mult"]))
    export_manifest(manifest, os.path.join(resolved["out"], "manifest.csv"))

    spec = ModelSpec(conv_channels=(32, int(resolved["s2"])))
    cfg = TrainConfig(
        epochs=int(resolved["epochs"]),
        eta=float(resolved["lr"]),
        optimizer=str(resolved["optimizer"]),
        batch_size=int(resolved["batch_size"]),
        seed=derive_seed(seed, "train"),
        augment=augment_on,
        precision=int(resolved["precision"]),
    )

    if resolved["lr_sweep"]:
        result = lr_sweep(spec, manifest, cfg)
        sweep_path = os.path.join(resolved["out"], "sweep.csv")
        with open(sweep_path, "w", encoding="utf-8") as fh:
            fh.write("eta,test_acc,best\n")
            for row in result.rows:
                marker = "*" if row.eta == result.best_eta else ""
                fh.write(f"{format_float(row.eta)},{format_float(row.test_acc)},{marker}\n")
        print(f"sweep complete: best eta = {result.best_eta}")
        for row in result.rows:
            marker = " <- best" if row.eta == result.best_eta else ""
            print(f"eta={row.eta:g} test_acc={row.test_acc:.4f}{marker}")
        return EXIT_OK

    model = build_model(spec, seed=derive_seed(seed, "init"), dtype=cfg.dtype)
    log = train(model, manifest, cfg)
    save_weights(model, os.path.join(resolved["out"], "final_weights.lcnn"))
    if log.best_state:
        final_state = model.state_snapshot()
        model.load_state(log.best_state)
        save_weights(model, os.path.join(resolved["out"], "best_weights.lcnn"))
        model.load_state(final_state)
    emit_curves(log, resolved["out"])
    m = log.final_metrics
    print(
        "final: accuracy={} specificity={} recall={} f1={}".format(
            format_metric(m["accuracy"]), format_metric(m["specificity"]),
            format_metric(m["recall"]), format_metric(m["f1"]),
        )
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    _apply_threads(args.threads or 0)

    from .data import ingest_directory, stratified_split, SplitSpec
    from .model import ModelSpec, load_weights
    from .metrics import confusion_table, format_metric
    from .tensor import derive_seed
    from .train import evaluate

    if not os.path.isdir(args.data):
        raise InputDataError(f"data directory not found: {args.data}")
    spec = ModelSpec(conv_channels=(32, args.s2))
    model = load_weights(args.weights, spec)
    manifest = ingest_directory(args.data)
    stratified_split(manifest, SplitSpec(train_ratio=args.train_ratio,
                                         seed=derive_seed(args.seed, "split")))
    cm, metrics = evaluate(model, manifest, args.split, batch_size=args.batch_size)
    print(confusion_table(cm))
    line = " ".join(f"{k}={format_metric(metrics[k])}" for k in ("accuracy", "specificity", "recall", "f1"))
    print(line)
    out_dir = args.out or os.path.dirname(os.path.abspath(args.weights))
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "eval_summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(confusion_table(cm) + "\n" + line + "\n")
    return EXIT_OK


def cmd_predict(args) -> int:
    _apply_threads(args.threads or 0)

    import numpy as np

    from .data import decode_image
    from .augment import resize_bilinear
    from .model import ModelSpec, load_weights

    spec = ModelSpec(conv_channels=(32, args.s2))
    model = load_weights(args.weights, spec)
    img = decode_image(args.image)
    img = resize_bilinear(img, spec.input_h, spec.input_w).astype(np.float32)
    prob = float(model.forward(img[None, :, :, None], training=False)[0])
    label = "tumor" if prob >= 0.5 else "normal"
    print(f"{label} {prob:.6f}")
    return EXIT_OK


def cmd_augment_preview(args) -> int:
    _apply_threads(args.threads or 0)

    from .augment import AugmentConfig, apply_params, draw_params
    from .data import decode_image, ingest_directory
    from .synthetic import save_png
    from .tensor import derive_rng

    manifest = ingest_directory(args.data)
    os.makedirs(args.out, exist_ok=True)
    cfg = AugmentConfig(seed=args.seed)
    picker = derive_rng(args.seed, "preview/pick")
    lines = ["file,source,sigma,brightness,contrast,degrees,dx,dy,scale"]
    for i in range(args.count):
        record = manifest.records[int(picker.integers(0, len(manifest.records)))]
        img = decode_image(record.path)
        params = draw_params(cfg, derive_rng(args.seed, f"preview/{i}"), img.shape)
        out = apply_params(img, params, cfg.autocrop_threshold)
        name = f"aug_{i:03d}.png"
        save_png(out, os.path.join(args.out, name))
        lines.append(
            f"{name},{record.path},{params.sigma!r},{params.brightness!r},"
            f"{params.contrast!r},{params.degrees!r},{params.dx},{params.dy},{params.scale!r}"
        )
    with open(os.path.join(args.out, "params.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {args.count} augmented samples to {args.out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    _apply_threads(args.threads or 0)

    from .synthetic import generate_dataset

    written = generate_dataset(args.out, args.count, args.seed)
    print(f"wrote {len(written['normal'])} normal + {len(written['tumor'])} tumor images to {args.out}")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=42, help="master seed (default 42)")
    p.add_argument("--threads", type=int, default=_env_threads(),
                   help="BLAS thread cap; 1 guarantees bit-reproducibility "
                        "(default: LCNN_THREADS env or library default)")


def _env_threads() -> int | None:
    raw = os.environ.get("LCNN_THREADS")
    return int(raw) if raw else None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lcnn",
        description="Train and evaluate a low-complexity CNN for binary tumor image classification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="ingest, split, optionally augment, train, emit artifacts")
    p_train.add_argument("--data", help="dataset root with normal/ and tumor/ subdirectories")
    p_train.add_argument("--out", help="output directory for weights, curves and metrics")
    p_train.add_argument("--config", help="key = value config file; flags override it")
    p_train.add_argument("--epochs", type=int, default=None)
    p_train.add_argument("--lr", type=float, default=None)
    p_train.add_argument("--optimizer", choices=("adam", "sgd"), default=None)
    p_train.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p_train.add_argument("--augment", choices=("on", "off"), default=None)
    p_train.add_argument("--augment-mult", dest="augment_mult", type=int, default=None,
                         help="extra per-class train multiplier applied when augmenting")
    p_train.add_argument("--train-ratio", dest="train_ratio", type=float, default=None)
    p_train.add_argument("--precision", type=int, choices=(32, 64), default=None)
    p_train.add_argument("--s2", type=int, default=None, help="second conv kernel count (default 64)")
    p_train.add_argument("--lr-sweep", dest="lr_sweep", action="store_const", const=True, default=None,
                         help="run one training per learning rate and emit sweep.csv")
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--threads", type=int, default=_env_threads())
    p_train.set_defaults(func=cmd_train)

    p_sweep = sub.add_parser("lr-sweep", help="alias for train --lr-sweep")
    p_sweep.add_argument("--data")
    p_sweep.add_argument("--out")
    p_sweep.add_argument("--config")
    p_sweep.add_argument("--epochs", type=int, default=None)
    p_sweep.add_argument("--lr", type=float, default=None)
    p_sweep.add_argument("--optimizer", choices=("adam", "sgd"), default=None)
    p_sweep.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p_sweep.add_argument("--augment", choices=("on", "off"), default=None)
    p_sweep.add_argument("--augment-mult", dest="augment_mult", type=int, default=None)
    p_sweep.add_argument("--train-ratio", dest="train_ratio", type=float, default=None)
    p_sweep.add_argument("--precision", type=int, choices=(32, 64), default=None)
    p_sweep.add_argument("--s2", type=int, default=None)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--threads", type=int, default=_env_threads())
    p_sweep.set_defaults(func=cmd_train, lr_sweep=True)

    p_eval = sub.add_parser("eval", help="score saved weights on a dataset split")
    p_eval.add_argument("--weights", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--out", default=None, help="directory for eval_summary.txt (default: weights dir)")
    p_eval.add_argument("--split", choices=("train", "test"), default="test")
    p_eval.add_argument("--train-ratio", dest="train_ratio", type=float, default=0.7)
    p_eval.add_argument("--batch-size", dest="batch_size", type=int, default=32)
    p_eval.add_argument("--s2", type=int, default=64)
    _add_common(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_pred = sub.add_parser("predict", help="classify a single image")
    p_pred.add_argument("--weights", required=True)
    p_pred.add_argument("image", help="path to one PNG/JPEG image")
    p_pred.add_argument("--s2", type=int, default=64)
    _add_common(p_pred)
    p_pred.set_defaults(func=cmd_predict)

    p_aug = sub.add_parser("augment-preview", help="write augmented samples for inspection")
    p_aug.add_argument("--data", required=True)
    p_aug.add_argument("--out", required=True)
    p_aug.add_argument("--count", type=int, default=8)
    _add_common(p_aug)
    p_aug.set_defaults(func=cmd_augment_preview)

    p_synth = sub.add_parser("synth", help="generate a balanced synthetic dataset")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--count", type=int, default=800, help="total images, half per class")
    _add_common(p_synth)
    p_synth.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except WeightsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_WEIGHTS
    except (InputDataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except LcnnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
