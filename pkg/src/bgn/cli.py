"""Command-line entry point: ``bgn {train,eval,bounds,explain,equation,tree}``.

Exit codes: 0 success, 2 bad flags, 3 data or model/data mismatch, 4 degenerate
training. Human-readable results go to stdout with 6 significant digits;
machine-readable outputs are always files. ``BGN_LOG`` (quiet, info, debug)
sets the log level on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

from bgn.bann import load_model, layered_dump, mse, predict_dataset, render_equation, save_model
from bgn.bounds import bound_chain, pooled_bound
from bgn.dataset import SplitSpec, load_csv, split, standardize
from bgn.errors import BGNError, DataError, DimensionError, SchemaError
from bgn.explain import importance_report, report_table, report_to_dot, sample_background
from bgn.lasso import SparsityTarget
from bgn.trainer import TrainConfig, train
from bgn.tree import TreeConfig, fit_tree, predict_tree, render_tree

log = logging.getLogger("bgn")

EXIT_OK, EXIT_FLAGS, EXIT_DATA, EXIT_DEGENERATE = 0, 2, 3, 4
MANIFEST_FORMAT_VERSION = 1
_DEFAULTS = TrainConfig()


class DegenerateTraining(BGNError):
    pass


def g6(x):
    return f"{x:.6g}"


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(path, doc):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _configure_logging():
    level = os.environ.get("BGN_LOG", "info").lower()
    levels = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.INFO), format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    if level not in levels:
        log.warning("unknown BGN_LOG value %r, using info", level)


def _fraction(text):
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in (0, 1)")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text} must be a positive integer")
    return value


def _seed(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not a 64-bit unsigned integer")
    return value


def _data_flags(p, target_required=True):
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--target", required=target_required, help="label column name")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--train-frac", type=_fraction, default=0.70)
    p.add_argument("--valid-frac", type=_fraction, default=0.15)


def _split_flag(p, default):
    p.add_argument("--split", choices=["all", "train", "valid", "test"], default=default,
                   help="rows of --data to use (split with --seed and the fractions)")


def build_parser():
    parser = argparse.ArgumentParser(prog="bgn", description="Greedy binary-activated networks for tabular regression.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="grow a network and write model, trace and manifest files")
    _data_flags(p)
    p.add_argument("--max-width", type=_positive, default=_DEFAULTS.max_width)
    p.add_argument("--max-depth", type=_positive, default=_DEFAULTS.max_hidden_layers, help="maximum number of hidden layers")
    p.add_argument("--d0star", type=_positive, default=_DEFAULTS.sparsity.max_nnz, help="non-zero input weights per neuron")
    p.add_argument("--patience", type=_positive, default=_DEFAULTS.patience)
    p.add_argument("--no-improvement1", action="store_true", help="disable random neuron replacement")
    p.add_argument("--out", default="bgn_run", help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="MSE of a model file on a data file")
    p.add_argument("--model", required=True)
    _data_flags(p)
    _split_flag(p, "all")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bounds", help="print the region-variance bound chain")
    p.add_argument("--model", required=True)
    _data_flags(p)
    _split_flag(p, "train")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("explain", help="predictor- and neuron-level SHAP importances")
    p.add_argument("--model", required=True)
    _data_flags(p)
    _split_flag(p, "test")
    p.add_argument("--background-size", type=_positive, default=64, help="background rows drawn from the training split")
    p.add_argument("--format", choices=["table", "dot", "json"], default="table")
    p.add_argument("--out", default=None, help="write the report here instead of stdout")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("equation", help="print the closed-form equation of a one-hidden-layer model")
    p.add_argument("--model", required=True)
    p.add_argument("--precision", type=_positive, default=6)
    p.set_defaults(func=cmd_equation)

    p = sub.add_parser("tree", help="fit the depth-limited regression tree baseline")
    _data_flags(p)
    p.add_argument("--max-depth", type=_positive, default=3, help="tree depth cap")
    p.add_argument("--min-samples-leaf", type=_positive, default=1)
    p.add_argument("--out", default="bgn_tree", help="output directory")
    p.set_defaults(func=cmd_tree)
    return parser


def _load_splits(args):
    data = load_csv(args.data, args.target)
    spec = SplitSpec(train_fraction=args.train_frac, valid_fraction=args.valid_frac, seed=args.seed)
    return data, split(data, spec)


def _select(args, data, parts):
    if args.split == "all":
        return data
    return dict(zip(("train", "valid", "test"), parts))[args.split]


def _check_compatible(model, data):
    if model.d != data.d:
        raise DimensionError(f"model expects {model.d} features {list(model.feature_names)}, data has {data.d} {list(data.feature_names)}")
    if tuple(model.feature_names) != tuple(data.feature_names):
        raise DimensionError(f"feature names differ: model {list(model.feature_names)}, data {list(data.feature_names)}")


def _manifest(args, started, outputs, extra=None):
    flags = {k: v for k, v in vars(args).items() if k != "func"}
    doc = {
        "format_version": MANIFEST_FORMAT_VERSION,
        "command": args.command,
        "flags": flags,
        "seed": args.seed,
        "dataset_sha256": sha256_file(args.data),
        "outputs": {k: str(v) for k, v in outputs.items()},
        "duration_seconds": time.perf_counter() - started,
    }
    doc.update(extra or {})
    return doc


def cmd_train(args):
    started = time.perf_counter()
    _, (tr, va, te) = _load_splits(args)
    tr, (va, te) = standardize(tr, [va, te])
    config = TrainConfig(
        max_width=args.max_width,
        max_hidden_layers=args.max_depth,
        sparsity=SparsityTarget(args.d0star),
        patience=args.patience,
        seed=args.seed,
        improvement1_enabled=not args.no_improvement1,
    )
    model, trace = train(tr, va, config)
    out = Path(args.out)
    paths = {"model": out / "model.json", "trace": out / "trace.json", "manifest": out / "manifest.json"}
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, paths["model"])
    write_json(paths["trace"], trace.to_dict())
    metrics = {
        "train_mse": mse(predict_dataset(model, tr), tr.labels),
        "valid_mse": mse(predict_dataset(model, va), va.labels),
        "test_mse": mse(predict_dataset(model, te), te.labels),
    }
    write_json(paths["manifest"], _manifest(args, started, paths, {"metrics": metrics, "widths": list(model.widths)}))
    print(f"train MSE: {g6(metrics['train_mse'])}")
    print(f"valid MSE: {g6(metrics['valid_mse'])}")
    print(f"test MSE:  {g6(metrics['test_mse'])}")
    print(f"hidden layers: {model.depth}  widths: {list(model.widths)}")
    print(f"retained features: {len(model.retained_features())} of {model.d}")
    print(f"model written to {paths['model']}")
    if trace.best.get("degenerate"):
        raise DegenerateTraining("no neuron reduced the training MSE; wrote a constant model")
    return EXIT_OK


def cmd_eval(args):
    model = load_model(args.model)
    data, parts = _load_splits(args)
    target = _select(args, data, parts)
    _check_compatible(model, target)
    print(f"{args.split} MSE: {g6(mse(predict_dataset(model, target), target.labels))}  (m={target.m})")
    return EXIT_OK


def cmd_bounds(args):
    model = load_model(args.model)
    data, parts = _load_splits(args)
    target = _select(args, data, parts)
    _check_compatible(model, target)
    chain = bound_chain(model, target)
    print(chain.table())
    pooled = [pooled_bound(model, target, k) for k in range(1, model.depth + 1)]
    agree = all(abs(p - b) <= 1e-9 * max(1.0, abs(b)) for p, b in zip(pooled, chain.bounds[1:]))
    print(f"total-variance cross-check: {'ok' if agree else 'MISMATCH'}")
    return EXIT_OK


def cmd_explain(args):
    model = load_model(args.model)
    data, (tr, va, te) = _load_splits(args)
    target = _select(args, data, (tr, va, te))
    _check_compatible(model, target)
    background = sample_background(model.to_model_space(tr.raw_features()), size=args.background_size, seed=args.seed)
    report = importance_report(model, target, background)
    if args.format == "json":
        text = json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n"
    elif args.format == "dot":
        if model.depth != 1:
            log.warning("DOT output needs one hidden layer; printing the table instead")
        text = report_to_dot(report, model)
    else:
        text = report_table(report) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"report written to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_equation(args):
    model = load_model(args.model)
    if model.depth != 1:
        log.warning("model has %d hidden layers; printing the layered form instead of a single equation", model.depth)
        print(layered_dump(model, precision=args.precision))
    else:
        print(render_equation(model, precision=args.precision))
    return EXIT_OK


def cmd_tree(args):
    started = time.perf_counter()
    data, (tr, va, te) = _load_splits(args)
    tree = fit_tree(tr, TreeConfig(max_depth=args.max_depth, min_samples_leaf=args.min_samples_leaf, seed=args.seed))
    text = render_tree(tree, data.feature_names)
    metrics = {name: mse(predict_tree(tree, part.raw_features()), part.labels) for name, part in (("train_mse", tr), ("valid_mse", va), ("test_mse", te))}
    out = Path(args.out)
    paths = {"tree": out / "tree.txt", "manifest": out / "manifest.json"}
    out.mkdir(parents=True, exist_ok=True)
    paths["tree"].write_text(text + "\n", encoding="utf-8")
    write_json(paths["manifest"], _manifest(args, started, paths, {"metrics": metrics, "leaves": len(tree.leaves())}))
    print(text)
    print(f"train MSE: {g6(metrics['train_mse'])}")
    print(f"valid MSE: {g6(metrics['valid_mse'])}")
    print(f"test MSE:  {g6(metrics['test_mse'])}")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging()
    try:
        return args.func(args)
    except DegenerateTraining as exc:
        log.error("%s", exc)
        return EXIT_DEGENERATE
    except (DataError, DimensionError, SchemaError, OSError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except ValueError as exc:
        # invalid flag combinations caught by config validation
        log.error("%s", exc)
        return EXIT_FLAGS


if __name__ == "__main__":
    sys.exit(main())
