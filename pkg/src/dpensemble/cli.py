"""Command line entry point: ``dpensemble <command> [options]``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 partial failure
(some series diverged).
"""

import argparse
import csv
import logging
import os
import sys

import numpy as np

from . import ensemble, experiment, metrics, reporting
from .checkpoint import save_checkpoint
from .errors import CheckpointError, ConfigInvalid, DataLoadFailure, DivergenceDetected, EmptyDataset
from .sampler import DPConfig, sort_descending, stick_breaking, write_draw_csv
from .seeding import derive_seed, rng_for
from .series import embed_lags, invert_scale, minmax_scale, split_holdout
from .training import TrainingConfig, train_with_schedule

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3

log = logging.getLogger("dpensemble")


def _csv_list(cast):
    def parse(text):
        return tuple(cast(s) for s in text.split(",") if s.strip())
    return parse


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file; flags override its values")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--series-limit", type=int, help="number of series in the seeded subsample")
    common.add_argument("--models", type=_csv_list(int), help="model counts, e.g. 10,20,50")
    common.add_argument("--distribution", type=_csv_list(str), help="base distributions (exp,beta,normal)")
    common.add_argument("--strategy", type=_csv_list(str), help="strategies (single,simple,weighted,mixed,trimmed)")
    common.add_argument("--original-units", action="store_true", default=None,
                        help="evaluate in original units instead of [0, 1]")
    common.add_argument("--out-dir", help="output directory")
    common.add_argument("--workers", type=int, help="parallel per-series jobs")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="dpensemble", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("sample", parents=[common], help="truncated DP draw to CSV")
    p = sub.add_parser("train", parents=[common], help="train one series and save its checkpoints")
    p.add_argument("--series-id", required=True)
    p = sub.add_parser("predict", parents=[common], help="forecast one series from a saved pool")
    p.add_argument("--pool", required=True, help="pool manifest written by 'train'")
    p.add_argument("--series-id", required=True)
    p = sub.add_parser("evaluate", parents=[common], help="score a forecasts CSV")
    p.add_argument("--forecasts", required=True)
    sub.add_parser("experiment", parents=[common], help="run the full grid")
    sub.add_parser("report", parents=[common], help="tables and plot data from a run directory")
    return parser


def _config(args):
    overrides = dict(seed=args.seed, series_limit=args.series_limit, models=args.models,
                     distributions=args.distribution, strategies=args.strategy,
                     original_units=args.original_units, out_dir=args.out_dir, workers=args.workers)
    if args.distribution and args.strategy is None and set(args.distribution) != set(experiment.DISTRIBUTIONS):
        # mixed pools need every distribution, so narrowing them drops the default mixed strategy
        base = (experiment.load_config(args.config) if args.config else experiment.ExperimentConfig())
        overrides["strategies"] = tuple(s for s in base.strategies if s != "mixed")
    if args.config:
        return experiment.load_config(args.config, **overrides)
    return experiment.ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def _find_series(cfg, series_id):
    for s in experiment.load_series(cfg):
        if s.id == series_id:
            return s
    raise DataLoadFailure(f"series {series_id!r} not found")


def cmd_sample(args, cfg):
    os.makedirs(cfg.out_dir, exist_ok=True)
    bases = cfg.bases()
    for d in cfg.distributions:
        for p in cfg.models:
            dp = DPConfig(bases[d], p, cfg.alpha, derive_seed(cfg.seed, "dp", d, p))
            draw = stick_breaking(dp, rng_for(cfg.seed, "dp", d, p, "learning_rates"))
            path = os.path.join(cfg.out_dir, f"{d}_p{p}_draw.csv")
            write_draw_csv(draw, path)
            print(path)
    return EXIT_OK


def cmd_train(args, cfg):
    raw = _find_series(cfg, args.series_id)
    scaled = minmax_scale(raw)
    prefix, _ = split_holdout(scaled, cfg.horizon)
    frame = embed_lags(prefix, cfg.lag)
    bases = cfg.bases()
    p = cfg.models[0]
    for d in cfg.distributions:
        dp = DPConfig(bases[d], p, cfg.alpha, derive_seed(cfg.seed, "dp", d, p))
        lr_draw = stick_breaking(dp, rng_for(cfg.seed, "dp", d, p, "learning_rates"))
        w_draw = stick_breaking(dp, rng_for(cfg.seed, "dp", d, p, "weights"))
        seed = experiment.series_seed(cfg, raw.id)
        tc = TrainingConfig(tuple(sort_descending(lr_draw.atoms)), cfg.iterations, cfg.lag, cfg.hidden,
                            cfg.dropout, cfg.output_activation, cfg.init_scale, seed)
        ckpts = train_with_schedule(frame, tc)
        directory = os.path.join(cfg.out_dir, raw.id, f"{d}_p{p}")
        os.makedirs(directory, exist_ok=True)
        names = []
        for c in ckpts:
            name = f"seg_{c.segment_index:03d}.ckpt"
            save_checkpoint(c, os.path.join(directory, name))
            names.append(name)
        pool = ensemble.ModelPool.from_checkpoints(ckpts, d)
        ensemble.write_pool_manifest(pool, os.path.join(directory, "manifest.csv"), names)
        write_draw_csv(w_draw, os.path.join(directory, "weights.csv"))
        print(os.path.join(directory, "manifest.csv"))
    return EXIT_OK


def cmd_predict(args, cfg):
    raw = _find_series(cfg, args.series_id)
    scaled = minmax_scale(raw)
    prefix, _ = split_holdout(scaled, cfg.horizon)
    base = os.path.dirname(os.path.abspath(args.pool))
    pool = ensemble.read_pool_manifest(args.pool)
    pool = ensemble.ModelPool(tuple(m.__class__(None, m.provenance, m.learning_rate, m.segment_index,
                                                os.path.join(base, m.path)) for m in pool.members))
    tensor = ensemble.predict_pool(pool, prefix[-cfg.lag:], cfg.horizon)
    out = {"simple": ensemble.combine_simple(tensor)}
    wpath = os.path.join(base, "weights.csv")
    if os.path.exists(wpath):
        with open(wpath, newline="") as fh:
            weights = [float(r["weight"]) for r in csv.DictReader(fh)]
        out["weighted"] = ensemble.combine_weighted(tensor, weights)
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, f"forecasts_{raw.id}.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series_id", "strategy", "h", "forecast"])
        for strategy, values in out.items():
            if cfg.original_units:
                values = invert_scale(values, scaled.scale_min, scaled.scale_max)
            for h, v in enumerate(values, start=1):
                w.writerow([raw.id, strategy, h, repr(float(v))])
    print(path)
    return EXIT_OK


def cmd_evaluate(args, cfg):
    """Forecasts must be in the same units as selected by ``--original-units``."""
    series = {s.id: s for s in experiment.load_series(cfg)}
    table = {}
    with open(args.forecasts, newline="") as fh:
        for r in csv.DictReader(fh):
            table.setdefault(r["strategy"], {}).setdefault(r["series_id"], []).append(
                (int(r["h"]), float(r["forecast"])))
    os.makedirs(cfg.out_dir, exist_ok=True)
    for strategy, per_series in sorted(table.items()):
        forecasts, actuals = {}, {}
        for sid, pairs in per_series.items():
            if sid not in series:
                raise DataLoadFailure(f"series {sid!r} not in the data files")
            scaled = minmax_scale(series[sid])
            actual = split_holdout(scaled, cfg.horizon)[1]
            if cfg.original_units:
                actual = invert_scale(actual, scaled.scale_min, scaled.scale_max)
            actuals[sid] = actual
            forecasts[sid] = np.array([v for _, v in sorted(pairs)])
        rep = metrics.dataset_metrics(forecasts, actuals, strategy, seed=cfg.seed)
        path = os.path.join(cfg.out_dir, f"evaluation_{strategy}.csv")
        metrics.write_report_csv(rep, path)
        print(f"{strategy}: mae={rep.mean_mae:.6f} rmse={rep.mean_rmse:.6f} (N={rep.n})")
    return EXIT_OK


def cmd_experiment(args, cfg):
    result = experiment.run_experiment(cfg)
    for r in result.reports:
        print(f"{r.strategy:9s} {r.distribution:7s} p={r.p:<4d} mae={r.mean_mae:.6f} rmse={r.mean_rmse:.6f}")
    if result.partial:
        log.warning("%d series diverged and were excluded", len(result.diverged))
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_report(args, cfg):
    reports = reporting.read_reports(os.path.join(cfg.out_dir, "reports"))
    div = {}
    div_dir = os.path.join(cfg.out_dir, "diversity")
    if os.path.isdir(div_dir):
        for name in sorted(os.listdir(div_dir)):
            stem = name[:-4]
            d, p = stem.rsplit("_p", 1)
            div[d, int(p)] = ensemble.read_matrix_csv(os.path.join(div_dir, name))
    reporting.emit_plot_data(reports, div, os.path.join(cfg.out_dir, "plots"))
    for path in reporting.emit_tables(reports, os.path.join(cfg.out_dir, "tables"), cfg.mixed_combination):
        print(path)
    return EXIT_OK


COMMANDS = {"sample": cmd_sample, "train": cmd_train, "predict": cmd_predict,
            "evaluate": cmd_evaluate, "experiment": cmd_experiment, "report": cmd_report}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataLoadFailure, CheckpointError, EmptyDataset, reporting.IncompleteGrid) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceDetected as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
