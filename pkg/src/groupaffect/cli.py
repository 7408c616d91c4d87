"""Command line interface.

Subcommands: prepare, train, fit-bn, calibrate, predict, eval, search.
Exit status is 0 on success, 2 for bad input, 1 for internal failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from . import CLASSES
from . import rng as rngmod
from .bottom_up import Classifier
from .errors import EmptyDatasetError, InputError, ManifestError
from .evaluation import SearchSpace, default_space, dumps, random_search
from .fusion import FusionMode
from .nn import AugmentConfig, TrainConfig, fit, init_params, save_model
from .nn.model import compact_model, reference_model, vgg_style
from .pipeline import (calibrate, evaluate_results, load_archive, run_record, save_archive,
                       split_by_source)
from .preprocess import build_isolated_dataset, parse_record, read_manifest
from .top_down import count_from_manifest, fit as fit_bn, load_bn, save_bn

log = logging.getLogger("groupaffect")

ARCHITECTURES = {"reference": reference_model, "compact": compact_model}
HISTORY_HEADER = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc")


class CommandError(InputError):
    pass


# -- helpers ---------------------------------------------------------------

def _require_path(path, what):
    if path is None:
        raise CommandError(f"missing required --{what}")
    p = Path(path)
    if not p.exists():
        raise CommandError(f"{what} path does not exist: {p}")
    return p


def _out_dir(path):
    if path is None:
        raise CommandError("missing required --out")
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write(path, text):
    Path(path).write_text(text, encoding="utf-8")


def _load_models(paths):
    if not paths:
        raise CommandError("at least one --model is required")
    return [Classifier.load(_require_path(p, "model")) for p in paths]


def _labeled(records, where):
    for i, r in enumerate(records):
        if r.label is None:
            raise ManifestError(f"{where}: record {i} ({r.image_path}) has no label")
    return records


def _csv(rows, header):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _train_config(args, seed=None, **overrides):
    aug = None if args.no_augment else AugmentConfig()
    kw = dict(batch_size=args.batch_size, max_epochs=args.epochs, early_stop_patience=args.patience,
              seed=args.seed if seed is None else seed, learning_rate=args.lr, augmentation=aug)
    kw.update(overrides)
    return TrainConfig(**kw)


def _train_val(args):
    ds = load_archive(_require_path(args.archive, "archive"))
    if args.val_archive:
        val = load_archive(_require_path(args.val_archive, "val-archive"))
        return ds.images, ds.labels, val.images, val.labels
    tr, va = split_by_source(ds, args.val_fraction, args.seed)
    return ds.images[tr], ds.labels[tr], ds.images[va], ds.labels[va]


# -- commands --------------------------------------------------------------

def cmd_prepare(args):
    manifest = _require_path(args.manifest, "manifest")
    records = _labeled(read_manifest(manifest), str(manifest))
    try:
        ds = build_isolated_dataset(records)
    except EmptyDatasetError as exc:
        raise EmptyDatasetError(f"{manifest}: {exc}") from None
    out = _out_dir(args.out)
    save_archive(ds, out, records)
    counts = ds.class_counts()
    for c, n in zip(CLASSES, counts):
        print(f"{c}\t{int(n)}")
    print(f"total\t{int(counts.sum())}")
    for r, why in ds.skipped:
        print(f"skipped record {r}: {why}", file=sys.stderr)
    return 0


def cmd_train(args):
    xtr, ytr, xva, yva = _train_val(args)
    spec = ARCHITECTURES[args.arch](dropout_rate=0.5 if args.dropout is None else args.dropout)
    params = init_params(spec, rngmod.stream(args.seed, rngmod.INIT))
    cfg = _train_config(args)
    best, history = fit(spec, params, xtr, ytr, xva, yva, cfg)
    out = _out_dir(args.out)
    save_model(spec, best, out)
    rows = history.to_rows()
    _write(out / "history.csv", _csv(rows, HISTORY_HEADER))
    if not args.no_figures:
        from .plotting import plot_history
        plot_history(rows, out / "loss.png", out / "accuracy.png")
    print(f"best epoch {history.best_epoch} of {len(rows)}; model written to {out}")
    return 0


def cmd_fit_bn(args):
    manifest = _require_path(args.manifest, "manifest")
    records = _labeled(read_manifest(manifest), str(manifest))
    if not records:
        raise EmptyDatasetError(f"{manifest} has no records")
    model = fit_bn(count_from_manifest(records), args.alpha)
    if args.out is None:
        raise CommandError("missing required --out")
    save_bn(model, args.out)
    print(f"{len(model.vocabulary)} descriptors, prior {[round(float(p), 4) for p in model.prior]}")
    return 0


def cmd_calibrate(args):
    manifest = _require_path(args.manifest, "manifest")
    records = _labeled(read_manifest(manifest), str(manifest))
    if not records:
        raise EmptyDatasetError(f"{manifest} has no records")
    bn = load_bn(_require_path(args.bn, "bn"))
    models = _load_models(args.model)
    bn, counts = calibrate(models, records, bn, args.alpha)
    save_bn(bn, args.out or args.bn)
    print("confusion (true x predicted):")
    for c, row in zip(CLASSES, counts):
        print(f"{c}\t" + "\t".join(str(int(v)) for v in row))
    return 0


def _predict_records(args):
    if args.record is not None:
        try:
            obj = json.loads(args.record)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"--record is not valid JSON: {exc.msg}") from None
        return [parse_record(obj)]
    manifest = _require_path(args.manifest, "manifest")
    records = read_manifest(manifest)
    if not records:
        raise EmptyDatasetError(f"{manifest} has no records")
    return records


def cmd_predict(args):
    records = _predict_records(args)
    models = _load_models(args.model)
    bn = load_bn(_require_path(args.bn, "bn"))
    mode = FusionMode.parse(args.mode)
    lines = []
    for rec in records:
        res = run_record(rec, models, bn, mode, weight_by_area=args.weight_by_area)
        for w in res.warnings:
            log.warning("%s: %s", rec.image_path, w)
        lines.append(json.dumps(res.to_json(image=rec.image_path), sort_keys=True))
    text = "\n".join(lines) + "\n"
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_eval(args):
    manifest = _require_path(args.manifest, "manifest")
    records = _labeled(read_manifest(manifest), str(manifest))
    if not records:
        raise EmptyDatasetError(f"{manifest} has no records")
    models = _load_models(args.model)
    bn = load_bn(_require_path(args.bn, "bn"))
    mode = FusionMode.parse(args.mode)
    results = [run_record(r, models, bn, mode, weight_by_area=args.weight_by_area) for r in records]
    reports = evaluate_results(results, records)
    out = _out_dir(args.out)
    summary = {"mode": str(mode), "manifest": manifest.name,
               **{k: v.to_json() for k, v in reports.items()}}
    _write(out / "eval.json", dumps(summary))
    _write(out / "predictions.jsonl",
           "".join(json.dumps(r.to_json(image=Path(rec.image_path).name), sort_keys=True) + "\n"
                   for r, rec in zip(results, records)))
    titles = {"bottom_up": "Bottom-up (CNN ensemble)", "top_down": "Top-down (Bayesian network)",
              "fused": f"Fused ({mode})"}
    for name, rep in reports.items():
        _write(out / f"confusion_{name}.csv", rep.confusion_csv())
        if not args.no_figures:
            from .plotting import plot_confusion
            plot_confusion(rep.confusion, out / f"confusion_{name}.png", titles[name])
        print(f"{name}\taccuracy {rep.accuracy:.4f}\t(n={rep.n_samples})")
    return 0


def cmd_search(args):
    space_path = _require_path(args.space, "space") if args.space else None
    if space_path is not None:
        try:
            space = SearchSpace.from_json(json.loads(space_path.read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise CommandError(f"{space_path} is not valid JSON: {exc.msg}") from None
    else:
        space = default_space(trials=args.trials, seed=args.seed)
    xtr, ytr, xva, yva = _train_val(args)
    base = ARCHITECTURES[args.arch]()
    channels = tuple(l.out_channels for l in base.layers if l.kind == "conv")

    def objective(config, seed):
        spec = vgg_style(channels=channels,
                         fc=(int(config.get("fc1", 1024)), int(config.get("fc2", 512))),
                         dropout_rate=float(config.get("dropout", 0.5)))
        params = init_params(spec, rngmod.stream(seed, rngmod.INIT))
        cfg = _train_config(args, seed=seed,
                            learning_rate=float(config.get("learning_rate", args.lr)),
                            batch_size=int(config.get("batch_size", args.batch_size)))
        _, hist = fit(spec, params, xtr, ytr, xva, yva, cfg)
        score = hist.epochs[hist.best_epoch - 1].val_acc
        log.info("trial %s -> %.4f", config, score)
        return score

    result = random_search(space, objective)
    out = _out_dir(args.out)
    _write(out / "best_config.json", dumps({"trial": result.best.index, "seed": result.best.seed,
                                            "score": result.best.score, "config": result.best.config}))
    _write(out / "trials.csv", result.trials_csv())
    print(f"best trial {result.best.index}: {result.best.config} (val acc {result.best.score:.4f})")
    return 0


# -- argument parsing --------------------------------------------------------

def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="master random seed")
    p.add_argument("--out", help="output file or directory")
    p.add_argument("--config", help="JSON file whose keys override command-line flags")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_training(p):
    p.add_argument("--archive", help="isolated-faces archive from `prepare`")
    p.add_argument("--val-archive", help="validation archive (default: split --archive by source image)")
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--arch", choices=sorted(ARCHITECTURES), default="reference")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--no-figures", action="store_true")


def _add_inference(p):
    p.add_argument("--model", action="append", help="model directory (repeat for an ensemble)")
    p.add_argument("--bn", help="Bayesian network parameter file")
    p.add_argument("--mode", default="redirection", help="redirection | mean | weighted:W")
    p.add_argument("--weight-by-area", action="store_true",
                   help="weight faces by box area when averaging")


def build_parser():
    parser = argparse.ArgumentParser(prog="groupaffect", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="crop, scale and normalize faces into an archive")
    p.add_argument("--manifest")
    _add_common(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a face classifier on an archive")
    _add_training(p)
    p.add_argument("--dropout", type=float, help="override the dense-layer dropout rate")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("fit-bn", help="fit the scene-descriptor network from a labeled manifest")
    p.add_argument("--manifest")
    p.add_argument("--alpha", type=float, default=1.0, help="Laplace smoothing")
    _add_common(p)
    p.set_defaults(func=cmd_fit_bn)

    p = sub.add_parser("calibrate", help="attach the classifier confusion CPT to a BN file")
    p.add_argument("--manifest", help="labeled validation manifest")
    p.add_argument("--alpha", type=float, default=1.0, help="smoothing of the confusion counts")
    _add_inference(p)
    _add_common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("predict", help="full-pipeline predictions as JSON lines")
    p.add_argument("--manifest")
    p.add_argument("--record", help="a single manifest record as inline JSON")
    _add_inference(p)
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="accuracy and confusion matrices on a labeled manifest")
    p.add_argument("--manifest")
    _add_inference(p)
    p.add_argument("--no-figures", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("search", help="random hyperparameter search")
    p.add_argument("--space", help="JSON search space (default: built-in ranges)")
    p.add_argument("--trials", type=int, default=10)
    _add_training(p)
    _add_common(p)
    p.set_defaults(func=cmd_search)
    return parser


def apply_config(args):
    if not args.config:
        return args
    path = Path(args.config)
    try:
        overrides = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise CommandError(f"cannot read config {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise CommandError(f"{path} is not valid JSON: {exc.msg}") from None
    if not isinstance(overrides, dict):
        raise CommandError(f"{path} must hold a JSON object")
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest) or dest in ("func", "command", "config"):
            raise CommandError(f"{path}: unknown option {key!r} for `{args.command}`")
        if dest == "model" and isinstance(value, str):
            value = [value]
        setattr(args, dest, value)
    return args


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        apply_config(args)
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
