"""Command-line entry points.

Exit codes: 0 success, 1 a check failed, 2 usage or input error, 3 training
diverged. Every command writes only under the ``--out-dir`` it is given.
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import Checkpoint
from .config import ABLATIONS, ModelConfig
from .data import SyntheticSpec, fingerprint, generate_synthetic, load_series, prepare_splits, save_series
from .errors import ConfigError, DivergenceError, SpecError, TrafficformerError
from .plotting import plot_horizon_metrics, plot_loss_curve, plot_mask, plot_node_pairs, plot_series
from .training import evaluate, predict, resolve_config, train

log = logging.getLogger("trafficformer")

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_DIVERGED = 0, 1, 2, 3
CHECKPOINT_NAME = "checkpoint.tfm"


class InputError(Exception):
    """A user-supplied path or argument is unusable (exit 2)."""


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_csv(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(v):
    return "n/a" if v is None else repr(float(v))


def _require_file(path, what):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{what} not found: {path}")
    return path


def _read_json_object(path, what, error):
    try:
        raw = json.loads(_require_file(path, what).read_text())
    except json.JSONDecodeError as exc:
        raise error(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise error(f"{path}: expected a JSON object")
    return raw


def _out_dir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_checkpoint_and_split(args):
    ckpt = Checkpoint.load(_require_file(args.checkpoint, "checkpoint"))
    series = load_series(_require_file(args.data, "data file"))
    cfg = ckpt.config
    if series.num_nodes != cfg.N:
        raise InputError(f"data has {series.num_nodes} nodes but the checkpoint expects {cfg.N}")
    splits = prepare_splits(series, cfg.T, cfg.H, normalizer=ckpt.normalizer)
    return ckpt, splits, splits.get(args.split)


# -- commands ---------------------------------------------------------------------


def cmd_synth(args):
    raw = _read_json_object(args.spec, "spec file", SpecError)
    spec = SyntheticSpec.from_dict(raw)
    series = generate_synthetic(spec)
    out = _out_dir(args.out_dir)
    csv_path = out / f"{args.name}.csv"
    save_series(series, csv_path, extra_meta={"synthetic_spec": spec.to_dict()})
    plot_series(series.values, series.node_ids, series.steps_per_day, out / f"{args.name}.png",
                clusters=spec.cluster_assignment)
    print(f"wrote {csv_path}: N={spec.N} steps={spec.steps} clusters={spec.num_clusters}")
    return EXIT_OK


def _train_config(args):
    overrides = _read_json_object(args.config, "config file", ConfigError)
    cfg = ModelConfig.from_dict(overrides)
    changes = {}
    if args.epochs is not None:
        changes["max_epochs"] = args.epochs
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.lr is not None:
        changes["lr"] = args.lr
    if args.batch_size is not None:
        changes["batch_size"] = args.batch_size
    for name in args.ablation or ():
        changes[name] = True
    return cfg.replace(**changes) if changes else cfg


def cmd_train(args):
    cfg = _train_config(args)
    data_path = _require_file(args.data, "data file")
    series = load_series(data_path)
    splits = prepare_splits(series, cfg.T, cfg.H)
    cfg = resolve_config(cfg, splits)

    out = _out_dir(args.out_dir)
    paths = {"checkpoint": CHECKPOINT_NAME, "log": "train_log.jsonl", "loss_figure": "loss.png"}
    manifest = {
        "tool": "trafficformer",
        "version": __version__,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "ablations": cfg.ablations,
        "data": {"path": str(data_path), "sha256": fingerprint(data_path),
                 "steps": series.steps, "nodes": series.num_nodes,
                 "interval_seconds": series.interval_seconds, "start_timestamp": series.start_timestamp},
        "splits": {name: len(splits.get(name)) for name in ("train", "val", "test")},
        "normalizer": {"mean": splits.normalizer.mean, "std": splits.normalizer.std},
        "max_steps": args.max_steps,
        "artifacts": paths,
    }
    _write_json(out / "manifest.json", manifest)

    log_path = out / paths["log"]
    log_path.write_text("")

    def on_epoch(record):
        with log_path.open("a") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    try:
        result = train(cfg, splits, max_steps=args.max_steps, on_epoch=on_epoch)
    except DivergenceError as exc:
        print(f"error: training diverged at epoch {exc.epoch}, step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    result.checkpoint.save(out / paths["checkpoint"])
    plot_loss_curve(result.log, out / paths["loss_figure"])
    best = result.log[result.checkpoint.epoch]
    print(f"trained {len(result.log)} epochs; best epoch {result.checkpoint.epoch} "
          f"val_loss={best['val_loss']:.6f} val_mae={best['val_mae']:.4f}")
    print(f"checkpoint: {out / paths['checkpoint']}")
    return EXIT_OK


def _print_metrics(split, report):
    print(f"{split}: MAE={report.mae:.4f} RMSE={report.rmse:.4f} MAPE={report.format_mape()}")
    print("horizon        MAE       RMSE       MAPE")
    for r in report.per_horizon:
        mape = "n/a" if r["mape"] is None else f"{r['mape']:.3f}%"
        print(f"{r['horizon']:>7} {r['mae']:>10.4f} {r['rmse']:>10.4f} {mape:>10}")


def cmd_eval(args):
    ckpt, splits, windows = _load_checkpoint_and_split(args)
    report = evaluate(ckpt, windows)
    out = _out_dir(args.out_dir)
    _write_json(out / "metrics.json", {"split": args.split, "windows": len(windows), **report.to_dict()})
    _write_csv(out / "horizon_metrics.csv", ["horizon", "mae", "rmse", "mape"],
               [[r["horizon"], _fmt(r["mae"]), _fmt(r["rmse"]), _fmt(r["mape"])] for r in report.per_horizon])
    plot_horizon_metrics(report.per_horizon, out / "horizon_metrics.png")
    _print_metrics(args.split, report)
    return EXIT_OK


def cmd_predict(args):
    ckpt, splits, windows = _load_checkpoint_and_split(args)
    model = ckpt.build_model()
    pred = predict(model, windows, ckpt.normalizer)
    out = _out_dir(args.out_dir)
    node_ids = splits.node_ids
    rows = []
    for w in range(pred.shape[0]):
        for h in range(pred.shape[1]):
            rows.append([int(windows.start[w]), h + 1] + [repr(float(v)) for v in pred[w, h]])
    _write_csv(out / "predictions.csv", ["window_start", "horizon"] + node_ids, rows)
    print(f"wrote {pred.shape[0]} windows x {pred.shape[1]} horizons x {pred.shape[2]} nodes "
          f"to {out / 'predictions.csv'}")
    return EXIT_OK


def top_pairs(probs, k):
    """The ``k`` highest- and lowest-probability off-diagonal pairs ``(i, j, p)`` with ``i < j``."""
    N = probs.shape[0]
    iu, ju = np.triu_indices(N, k=1)
    p = probs[iu, ju]
    order = np.lexsort((ju, iu, -p))
    high = [(int(iu[o]), int(ju[o]), float(p[o])) for o in order[:k]]
    order = np.lexsort((ju, iu, p))
    low = [(int(iu[o]), int(ju[o]), float(p[o])) for o in order[:k]]
    return high, low


def cmd_export_mask(args):
    ckpt, splits, windows = _load_checkpoint_and_split(args)
    if not 0 <= args.window < len(windows):
        raise InputError(f"window index {args.window} out of range for the {args.split} split "
                         f"({len(windows)} windows)")
    model = ckpt.build_model()
    if model.mask is None:
        raise InputError("this checkpoint was trained without a spatial mask")
    batch = windows.batch(np.array([args.window]))
    spatial = model.compute_mask(batch, "eval")
    probs, mask = spatial.probs.data[0], spatial.binary[0]
    node_ids = splits.node_ids
    out = _out_dir(args.out_dir)
    _write_csv(out / "P.csv", ["node"] + node_ids,
               [[node_ids[i]] + [repr(float(v)) for v in row] for i, row in enumerate(probs)])
    _write_csv(out / "M.csv", ["node"] + node_ids,
               [[node_ids[i]] + [int(v) for v in row] for i, row in enumerate(mask)])
    high, low = top_pairs(probs, args.top_k)
    rows = [["high", r + 1, node_ids[i], node_ids[j], repr(p)] for r, (i, j, p) in enumerate(high)]
    rows += [["low", r + 1, node_ids[i], node_ids[j], repr(p)] for r, (i, j, p) in enumerate(low)]
    _write_csv(out / "pairs.csv", ["kind", "rank", "node_i", "node_j", "probability"], rows)
    plot_mask(probs, mask, node_ids, out / "mask.png")
    flow = ckpt.normalizer.denormalize(batch.flow[0])
    plot_node_pairs(flow, node_ids, high, low, out / "node_pairs.png")
    print(f"window {args.window} of {args.split}: {int(mask.sum())} of {mask.size} mask entries open")
    for kind, pairs in (("highest", high), ("lowest", low)):
        print(f"{kind} P: " + ", ".join(f"{node_ids[i]}-{node_ids[j]} {p:.4f}" for i, j, p in pairs))
    return EXIT_OK


def cmd_gradcheck(args):
    from .checks import run_gradchecks

    cfg = None
    if args.config is not None:
        cfg = ModelConfig.from_dict(_read_json_object(args.config, "config file",
                                                      ConfigError))
    results = run_gradchecks(cfg, eps=args.eps, tol=args.tol)
    for r in results:
        print(r.line())
    failed = [r.module for r in results if not r.passed]
    if args.out_dir is not None:
        out = _out_dir(args.out_dir)
        _write_json(out / "gradcheck.json", {
            "eps": args.eps, "tol": args.tol, "passed": not failed,
            "modules": [{"module": r.module, "max_rel_error": r.max_rel_error, "passed": r.passed,
                         "coords": r.n_checked} for r in results],
        })
    if failed:
        print(f"gradient check failed in: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK
    print("all gradient checks passed")
    return EXIT_OK


# -- argument parsing -------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="trafficformer", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic clustered dataset")
    p.add_argument("spec", help="JSON file with synthetic-data settings")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--name", default="synthetic", help="file stem of the CSV (default: synthetic)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model and write checkpoint, log and manifest")
    p.add_argument("config", help="JSON model/training config")
    p.add_argument("--data", required=True, help="CSV of flows (steps x nodes)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--max-steps", type=int, help="stop after this many optimizer steps")
    p.add_argument("--ablation", action="append", choices=ABLATIONS, help="switch off a component (repeatable)")
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (("eval", cmd_eval, "report MAE/RMSE/MAPE of a checkpoint"),
                                 ("predict", cmd_predict, "write raw-unit forecasts of a checkpoint"),
                                 ("export-mask", cmd_export_mask, "export the spatial mask of one window")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("checkpoint")
        p.add_argument("--data", required=True)
        p.add_argument("--split", choices=("train", "val", "test"), default="test")
        p.add_argument("--out-dir", required=True)
        if name == "export-mask":
            p.add_argument("--window", type=int, required=True, help="window index within the split")
            p.add_argument("--top-k", type=int, default=5)
        p.set_defaults(func=func)

    p = sub.add_parser("gradcheck", help="finite-difference check of every module's gradients")
    p.add_argument("config", nargs="?", help="JSON config (shapes are replaced by small canonical ones)")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, TrafficformerError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
