"""Command-line pipeline: prepare, train, eval, sweep-beta, ablate, plot.

Exit codes: 0 success, 1 validation/configuration error, 2 runtime or
numeric error.  Commands never mutate their inputs; outputs land under the
given --out-dir.  When --cache is omitted, the cache root is taken from
$SRLGAN_CACHE_ROOT.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import data as D
from . import evaluate as E
from . import model as M
from . import nn as NN
from . import pipeline as P
from . import svgplot
from . import train as T


def _cache_path(args) -> Path:
    if getattr(args, "cache", None):
        return Path(args.cache)
    root = os.environ.get("SRLGAN_CACHE_ROOT")
    if not root:
        raise ValueError("no --cache given and SRLGAN_CACHE_ROOT is unset")
    dataset = getattr(args, "dataset", None)
    if dataset:
        return Path(root) / f"{dataset}.npz"
    return Path(root)


def _load_config(args) -> T.TrainConfig:
    """Config precedence: dataclass defaults < config file < CLI flags."""
    values = {}
    if getattr(args, "config", None):
        values.update(_parse_config_file(args.config))
    flag_map = {
        "seed": "seed", "beta": "beta", "batch_size": "batch_size",
        "gan_loss": "gan_loss", "learning_rate": "learning_rate",
        "max_rounds": "max_rounds", "eval_every": "eval_every",
        "pretrain_epochs": "pretrain_epochs", "n_e": "n_e",
        "n_d": "n_d", "n_g": "n_g", "patience": "patience",
    }
    for flag, field in flag_map.items():
        val = getattr(args, flag, None)
        if val is not None:
            values[field] = val
    if getattr(args, "sparsity", None) is not None:
        values["sparsity"] = args.sparsity == "on"
    if getattr(args, "generator_hidden", None):
        values["generator_hidden"] = [int(s) for s in args.generator_hidden.split(",")]
    if getattr(args, "discriminator_hidden", None):
        values["discriminator_hidden"] = [int(s) for s in args.discriminator_hidden.split(",")]
    known = {f.name: f for f in dataclasses.fields(T.TrainConfig)}
    unknown = set(values) - set(known)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return T.TrainConfig(**values).validate()


def _parse_config_file(path) -> dict:
    """Parse a `key = value` config document into TrainConfig field values."""
    fields = {f.name: f for f in dataclasses.fields(T.TrainConfig)}
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in fields:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        out[key] = _coerce(key, raw)
    return out


def _coerce(key: str, raw: str):
    if key in ("gan_loss",):
        return raw
    if key in ("sparsity", "nonsaturating", "d_phase_updates_g"):
        return raw.lower() in ("1", "true", "yes", "on")
    if key in ("generator_hidden", "discriminator_hidden"):
        return [int(s) for s in raw.split(",")] if raw.lower() != "none" else None
    if key == "n_e":
        return None if raw.lower() == "none" else int(raw)
    if key in ("beta", "learning_rate", "validation_fraction", "dropout"):
        return float(raw)
    return int(raw)


def _args_dict(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _write_manifest(out_dir: Path, command: str, args_dict: dict,
                    inputs: dict, outputs: dict) -> Path:
    manifest = {
        "command": command,
        "args": args_dict,
        "inputs": inputs,
        "outputs": outputs,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


# -- subcommands -------------------------------------------------------------


def cmd_prepare(args) -> int:
    raw_dir = Path(args.raw_dir)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cache, stats = P.prepare_dataset(raw_dir, args.dataset)
    cache_path = out_dir / f"{args.dataset}.npz"
    D.save_cache(cache, cache_path)
    (out_dir / f"{args.dataset}.schema.json").write_text(cache.schema_json + "\n")
    stats_path = out_dir / f"{args.dataset}.stats.json"
    stats_path.write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")
    inputs = {name: D.file_sha256(raw_dir / fname)
              for name, fname in P.RAW_FILES[args.dataset].items()
              if (raw_dir / fname).exists()}
    _write_manifest(out_dir, "prepare", _args_dict(args) | {"raw_dir": str(raw_dir)},
                    inputs, {"cache_content": D.cache_content_hash(cache)})
    print(f"dataset={stats['dataset']} users={stats['users']} "
          f"items={stats['items']} ratings={stats['ratings']} d={stats['d']} "
          f"sparsity={stats['sparsity_percent']:.2f}%")
    print(f"cache written to {cache_path}")
    return 0


def _save_trainer_checkpoint(path, trainer: T.Trainer, cache, args, rnd):
    meta = {
        "dataset": cache.dataset,
        "schema_hash": cache.schema_hash(),
        "cold_fraction": args.cold_fraction,
        "split_seed": args.split_seed if args.split_seed is not None else trainer.config.seed,
        "leakage_free_cold": bool(getattr(args, "leakage_free_cold", False)),
        "config": T.config_to_dict(trainer.config),
        "round": rnd,
    }
    NN.save_checkpoint(
        path,
        nets={"generator": trainer.generator,
              "discriminator": trainer.discriminator},
        opts={"generator": trainer.opt_g, "discriminator": trainer.opt_d},
        rng=trainer.rng,
        meta=meta,
        extra_arrays={"rho": trainer.rho},
    )


def cmd_train(args) -> int:
    config = _load_config(args)
    cache = D.load_cache(_cache_path(args))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    split_seed = args.split_seed if args.split_seed is not None else config.seed
    args.split_seed = split_seed
    split, x_warm, y_warm, _, _ = P.split_matrices(
        cache, args.cold_fraction, split_seed,
        leakage_free_cold=args.leakage_free_cold)
    train_idx, val_idx = T.holdout_split(
        x_warm.shape[0], config.validation_fraction, config.seed)

    trainer = T.Trainer(x_warm[train_idx], y_warm[train_idx], config,
                        x_val=x_warm[val_idx], y_val=y_warm[val_idx])
    trainer.pretrain_generator()

    best_path = out_dir / "checkpoint.best.npz"
    best = {"p5": -1.0}

    def on_checkpoint(tr, point):
        if np.isfinite(point.p5) and point.p5 > best["p5"]:
            best["p5"] = point.p5
            _save_trainer_checkpoint(best_path, tr, cache, args, point.round)

    trainer.train(on_checkpoint=on_checkpoint)

    final_path = out_dir / "checkpoint.npz"
    _save_trainer_checkpoint(final_path, trainer, cache, args,
                             trainer.rounds_done)
    if not best_path.exists():
        _save_trainer_checkpoint(best_path, trainer, cache, args,
                                 trainer.rounds_done)
    curve_path = out_dir / "curve.csv"
    trainer.curve.write_csv(curve_path)
    _write_manifest(
        out_dir, "train",
        _args_dict(args),
        {"cache_content": D.cache_content_hash(cache)},
        {"checkpoint": str(final_path), "checkpoint_best": str(best_path),
         "curve": str(curve_path)},
    )
    flagged = sum(p.collapse_flag for p in trainer.curve.points)
    print(f"trained {trainer.rounds_done} rounds "
          f"({len(trainer.curve.points)} checkpoints, "
          f"{flagged} collapse flags); outputs in {out_dir}")
    return 0


def cmd_eval(args) -> int:
    cache = D.load_cache(_cache_path(args))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ns = tuple(int(s) for s in args.n.split(","))

    if args.baseline == "itempop":
        split, _, y_warm, _, y_cold = P.split_matrices(
            cache, args.cold_fraction, args.split_seed)
        report = E.evaluate_itempop(y_warm, y_cold, ns=ns,
                                    user_keys=split.cold_ids)
        label = "itempop"
    else:
        nets, _, _, meta, extra = NN.load_checkpoint(args.checkpoint)
        if meta["schema_hash"] != cache.schema_hash():
            raise ValueError(
                "checkpoint/cache schema mismatch: "
                f"{meta['schema_hash']} vs {cache.schema_hash()}")
        split_seed = args.split_seed if args.split_seed is not None else meta["split_seed"]
        cold_fraction = args.cold_fraction if args.cold_fraction is not None else meta["cold_fraction"]
        leakage_free = args.leakage_free_cold or meta.get("leakage_free_cold", False)
        split, _, _, x_cold, y_cold = P.split_matrices(
            cache, cold_fraction, split_seed, leakage_free_cold=leakage_free)
        preds = M.generator_forward(nets["generator"], x_cold)
        report = E.evaluate_report(preds, y_cold, ns=ns,
                                   user_keys=split.cold_ids,
                                   graded=args.graded)
        label = "model"

    csv_path = out_dir / f"metrics.{label}.csv"
    report.write_csv(csv_path)
    table = report.format_table()
    (out_dir / f"metrics.{label}.txt").write_text(table + "\n")
    print(table)
    _write_manifest(out_dir, "eval",
                    _args_dict(args),
                    {"cache_content": D.cache_content_hash(cache)},
                    {"metrics_csv": str(csv_path)})
    return 0


def cmd_sweep_beta(args) -> int:
    config = _load_config(args)
    cache = D.load_cache(_cache_path(args))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = [float(s) for s in args.grid.split(",")]
    if not grid:
        raise ValueError("empty beta grid")

    split, x_warm, y_warm, _, _ = P.split_matrices(
        cache, args.cold_fraction, args.split_seed if args.split_seed is not None else config.seed)
    train_idx, held_idx = T.holdout_split(x_warm.shape[0], 0.1, config.seed)

    scores = {}
    curves = {}
    for beta in sorted(grid):
        cfg = dataclasses.replace(config, beta=beta).validate()
        trainer = T.fit(x_warm[train_idx], y_warm[train_idx], cfg,
                        x_val=x_warm[held_idx], y_val=y_warm[held_idx])
        preds = M.generator_forward(trainer.generator, x_warm[held_idx])
        scores[beta] = E.evaluate_predictions(preds, y_warm[held_idx], ns=(5,))["P@5"]
        curves[beta] = trainer.curve
        trainer.curve.write_csv(out_dir / f"curve.beta{beta:g}.csv")
    best = max(sorted(scores), key=lambda b: scores[b])

    sweep_path = out_dir / "sweep.csv"
    with open(sweep_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["beta", "held_out_p5", "recommended"])
        for beta in sorted(scores):
            w.writerow([f"{beta:g}", f"{scores[beta]:.10g}", int(beta == best)])

    for metric, attr in (("P@5", "p5"), ("N@5", "n5")):
        series = {
            f"beta={beta:g}": ([p.round for p in c.points],
                               [getattr(p, attr) for p in c.points])
            for beta, c in curves.items()
        }
        svg = svgplot.line_chart(series, f"validation {metric} vs round",
                                 "round", metric)
        (out_dir / f"sweep.{attr}.svg").write_text(svg)

    _write_manifest(out_dir, "sweep-beta",
                    _args_dict(args),
                    {"cache_content": D.cache_content_hash(cache)},
                    {"sweep": str(sweep_path)})
    print(f"recommended beta: {best:g} "
          f"(held-out P@5 {scores[best]:.4f}); outputs in {out_dir}")
    return 0


def cmd_ablate(args) -> int:
    config = _load_config(args)
    cache = D.load_cache(_cache_path(args))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ns = tuple(int(s) for s in args.n.split(","))

    split, x_warm, y_warm, x_cold, y_cold = P.split_matrices(
        cache, args.cold_fraction,
        args.split_seed if args.split_seed is not None else config.seed,
        leakage_free_cold=args.leakage_free_cold)
    reports = E.run_ablation(x_warm, y_warm, x_cold, y_cold, config, ns=ns)
    summary = {}
    for mode, report in reports.items():
        report.write_csv(out_dir / f"ablation.{mode}.csv")
        summary[mode] = report.aggregate()
        print(f"--- {mode} ---")
        print(report.format_table())
    (out_dir / "ablation.summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _write_manifest(out_dir, "ablate",
                    _args_dict(args),
                    {"cache_content": D.cache_content_hash(cache)},
                    {"summary": str(out_dir / "ablation.summary.json")})
    return 0


def cmd_plot(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    curves = {}
    for path in args.curves:
        path = Path(path)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        curves[path.stem] = rows
    for metric, column in (("P@5", "p5"), ("N@5", "n5"), ("loss_sr", "loss_sr")):
        series = {
            name: ([float(r["round"]) for r in rows],
                   [float(r[column]) for r in rows])
            for name, rows in curves.items()
        }
        svg = svgplot.line_chart(series, f"{metric} vs round", "round", metric)
        (out_dir / f"plot.{column}.svg").write_text(svg)
    print(f"plots written to {out_dir}")
    return 0


# -- argument parsing --------------------------------------------------------


def _add_train_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--gan-loss", dest="gan_loss", choices=["bce", "lsq"])
    p.add_argument("--sparsity", choices=["on", "off"])
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--max-rounds", dest="max_rounds", type=int)
    p.add_argument("--eval-every", dest="eval_every", type=int)
    p.add_argument("--pretrain-epochs", dest="pretrain_epochs", type=int)
    p.add_argument("--n-e", dest="n_e", type=int)
    p.add_argument("--n-d", dest="n_d", type=int)
    p.add_argument("--n-g", dest="n_g", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--generator-hidden", dest="generator_hidden",
                   help="comma-separated hidden sizes (default 512,1024,1024)")
    p.add_argument("--discriminator-hidden", dest="discriminator_hidden",
                   help="comma-separated hidden sizes (default 2048,512,128)")


def _add_split_flags(p: argparse.ArgumentParser, fraction_default=0.2):
    p.add_argument("--cold-fraction", dest="cold_fraction", type=float,
                   default=fraction_default)
    p.add_argument("--split-seed", dest="split_seed", type=int)
    p.add_argument("--leakage-free-cold", dest="leakage_free_cold",
                   action="store_true",
                   help="zero cold users' genre counts before TF-IDF")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srlgan",
        description="Sparse-regularized GAN cold-start recommender pipeline")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("prepare", help="parse raw MovieLens files into a cache")
    p.add_argument("--dataset", choices=["ml100k", "ml1m"], required=True)
    p.add_argument("--raw-dir", dest="raw_dir", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train on a prepared cache")
    p.add_argument("--cache", help="cache .npz (default from SRLGAN_CACHE_ROOT)")
    p.add_argument("--dataset", choices=["ml100k", "ml1m"])
    p.add_argument("--out-dir", dest="out_dir", required=True)
    _add_split_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint (or ItemPop) on cold users")
    p.add_argument("--checkpoint")
    p.add_argument("--cache")
    p.add_argument("--dataset", choices=["ml100k", "ml1m"])
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--n", default="5,20", help="comma-separated cutoffs")
    p.add_argument("--baseline", choices=["itempop"])
    p.add_argument("--graded", action="store_true",
                   help="graded NDCG gains (2^rating - 1)")
    p.add_argument("--cold-fraction", dest="cold_fraction", type=float)
    p.add_argument("--split-seed", dest="split_seed", type=int)
    p.add_argument("--leakage-free-cold", dest="leakage_free_cold",
                   action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-beta", help="beta grid sweep on the 90/10 warm split")
    p.add_argument("--cache")
    p.add_argument("--dataset", choices=["ml100k", "ml1m"])
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--grid", default="0.01,0.1,1")
    _add_split_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_sweep_beta)

    p = sub.add_parser("ablate", help="run the S1/S2/S3 ablation")
    p.add_argument("--cache")
    p.add_argument("--dataset", choices=["ml100k", "ml1m"])
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--n", default="5,20")
    _add_split_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("plot", help="render curve CSVs as SVG charts")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("curves", nargs="+", help="curve CSV files")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
