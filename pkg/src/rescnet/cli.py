"""Command-line front end: ``fit``, ``resume``, ``eval`` and ``export-metrics``.

Exit codes: 0 success, 2 configuration error, 3 data or I/O error,
4 unreadable or incompatible checkpoint.
"""
import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from .config import load_config
from .datasets import augment_hflip, load_cifar, load_folder_dataset, load_mnist
from .engine import ResidualTrainer, iter_posteriors
from .errors import CheckpointError, ConfigError, LayerFailedError, RescnetError

log = logging.getLogger("rescnet")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CHECKPOINT = 0, 2, 3, 4
METRICS_HEADER = ["layer", "alpha", "n_p", "n_n", "train_acc", "val_acc"]


class DataError(RescnetError):
    pass


def _resolve(root, name):
    path = Path(name)
    return path if path.is_absolute() or not root else Path(root) / path


def _load_split(data_cfg, split):
    files = data_cfg.train if split == "train" else data_cfg.test
    root = data_cfg.root
    kind = data_cfg.dataset
    if kind == "folder":
        manifest = data_cfg.train_manifest if split == "train" else data_cfg.test_manifest
        if not files or not manifest:
            raise DataError(f"folder dataset needs a {split} directory and manifest")
        return load_folder_dataset(_resolve(root, files[0]), _resolve(root, manifest))
    if not files:
        raise DataError(f"no {split} files configured")
    if kind == "mnist":
        if len(files) != 2:
            raise DataError("mnist expects 'images, labels' file names")
        return load_mnist(_resolve(root, files[0]), _resolve(root, files[1]))
    return load_cifar([_resolve(root, f) for f in files], kind)


def _subset(image_set, n, seed, stream):
    if not n or n >= len(image_set):
        return image_set
    rng = np.random.default_rng([seed, stream])
    return image_set.subset(np.sort(rng.permutation(len(image_set))[:n]))


def load_training_data(data_cfg):
    """``(train, val)`` sets after subsetting, hold-out and augmentation."""
    train = _load_split(data_cfg, "train")
    train = _subset(train, data_cfg.n_train + data_cfg.n_val, data_cfg.subset_seed, 0)
    val = None
    if data_cfg.n_val:
        order = np.random.default_rng([data_cfg.subset_seed, 2]).permutation(len(train))
        val = train.subset(np.sort(order[:data_cfg.n_val]))
        train = train.subset(np.sort(order[data_cfg.n_val:]))
    if data_cfg.hflip:
        train = augment_hflip(train)
    return train, val


def load_eval_data(data_cfg, split):
    if split == "train":
        return load_training_data(data_cfg)[0]
    return _subset(_load_split(data_cfg, "test"), data_cfg.n_test, data_cfg.subset_seed, 1)


def write_metrics(path, metrics):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for m in metrics:
            writer.writerow([m.layer, "" if m.alpha is None else repr(m.alpha), m.n_p, m.n_n,
                             repr(m.train_accuracy),
                             "" if m.val_accuracy is None else repr(m.val_accuracy)])


def read_metrics(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{"layer": int(r["layer"]), "alpha": float(r["alpha"]) if r["alpha"] else None,
             "n_p": int(r["n_p"]), "n_n": int(r["n_n"]), "train_acc": float(r["train_acc"]),
             "val_acc": float(r["val_acc"]) if r["val_acc"] else None} for r in rows]


def _progress(metrics):
    val = "" if metrics.val_accuracy is None else f" val_acc={metrics.val_accuracy:.4f}"
    alpha = "-" if metrics.alpha is None else f"{metrics.alpha:.6g}"
    log.info("layer %d  alpha=%s  n_p=%d  n_n=%d  train_acc=%.4f%s", metrics.layer, alpha,
             metrics.n_p, metrics.n_n, metrics.train_accuracy, val)


def _metrics_path(args, out):
    return Path(args.metrics) if getattr(args, "metrics", None) else out.with_suffix(".csv")


def _run(trainer, data_cfg, out, metrics_path, max_layers):
    def save(t):
        ckpt.save_checkpoint(out, t.model, data_cfg, t.metrics)

    try:
        trainer.run(max_layers=max_layers, progress_sink=_progress, on_layer=save)
    except LayerFailedError as exc:
        log.error("%s: %s (completed prefix of %d layers is in %s)", exc, exc.__cause__,
                  exc.model.depth if exc.model else 0, out)
        raise
    save(trainer)
    write_metrics(metrics_path, trainer.metrics)
    log.info("wrote %s and %s", out, metrics_path)


def cmd_fit(args):
    overrides = {} if args.seed is None else {"seed": args.seed}
    train_cfg, data_cfg = load_config(args.config, overrides)
    if args.data_dir:
        data_cfg = dataclasses.replace(data_cfg, root=str(Path(args.data_dir).resolve()))
    train, val = load_training_data(data_cfg)
    out = Path(args.out)
    trainer = ResidualTrainer(train, train_cfg, val)
    _run(trainer, data_cfg, out, _metrics_path(args, out), train_cfg.max_layers)
    return EXIT_OK


def cmd_resume(args):
    state = ckpt.load_checkpoint(args.checkpoint)
    data_cfg = state.data_config
    if args.data_dir:
        data_cfg = dataclasses.replace(data_cfg, root=str(Path(args.data_dir).resolve()))
    out = Path(args.out or args.checkpoint)
    if args.layers < 0:
        raise ConfigError("layers", "must be >= 0")
    if args.layers == 0:
        if out != Path(args.checkpoint):
            ckpt.save_checkpoint(out, state.model, data_cfg, state.metrics)
        return EXIT_OK
    target = state.model.depth + args.layers
    config = state.config.replace(max_layers=target)
    train, val = load_training_data(data_cfg)
    trainer = ResidualTrainer.resume(state.model, train, config, state.metrics, val)
    _run(trainer, data_cfg, out, _metrics_path(args, out), target)
    return EXIT_OK


def cmd_eval(args):
    state = ckpt.load_checkpoint(args.checkpoint)
    data_cfg = state.data_config
    if args.data_dir:
        data_cfg = dataclasses.replace(data_cfg, root=str(Path(args.data_dir).resolve()))
    data = load_eval_data(data_cfg, args.split)
    accs = [float(np.mean(np.argmax(p, axis=1) == data.labels))
            for p in iter_posteriors(state.model, data.images)]
    if args.per_layer:
        print("layer,accuracy")
        for depth, acc in enumerate(accs, 1):
            print(f"{depth},{acc!r}")
    else:
        print(f"accuracy {accs[-1]!r} ({args.split}, {len(data)} images, "
              f"{state.model.depth} layers)")
    return EXIT_OK


def cmd_export_metrics(args):
    state = ckpt.load_checkpoint(args.checkpoint)
    write_metrics(args.csv, state.metrics)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="rescnet", description=__doc__.splitlines()[0])
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="train a network from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--data-dir", help="directory holding the dataset files")
    p.add_argument("--out", required=True, help="checkpoint path (rewritten after every layer)")
    p.add_argument("--metrics", help="metrics CSV path (default: checkpoint path with .csv)")
    p.add_argument("--seed", type=int, help="overrides [run] seed")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("resume", help="add layers to an existing checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--layers", type=int, required=True, help="number of layers to add")
    p.add_argument("--data-dir")
    p.add_argument("--out", help="output checkpoint (default: overwrite the input)")
    p.add_argument("--metrics")
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("eval", help="report accuracy of a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--data-dir")
    p.add_argument("--split", choices=("test", "train"), default="test")
    p.add_argument("--per-layer", action="store_true", help="accuracy at every depth")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-metrics", help="write the per-layer progress log as CSV")
    p.add_argument("checkpoint")
    p.add_argument("csv")
    p.set_defaults(func=cmd_export_metrics)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except (RescnetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
