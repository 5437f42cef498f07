"""Experiment grid: model-count sweep x base distributions x combination strategies.

For every (distribution, p) one learning-rate list and one weight vector are
drawn from the truncated DP and shared by all series; every series then gets
its own network trained along that schedule with a seed derived from the
series id. All randomness is derived from ``ExperimentConfig.seed`` through
named paths (see ``dpensemble.seeding``), and per-series results are merged in
id order, so outputs do not depend on the worker count.
"""

import configparser
import dataclasses
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import ensemble, metrics, reporting
from .checkpoint import save_checkpoint
from .errors import ConfigInvalid, DataLoadFailure, DivergenceDetected
from .sampler import BaseDistributionSpec, DPConfig, sort_descending, stick_breaking, write_draw_csv
from .seeding import derive_seed, rng_for
from .series import (embed_lags, invert_scale, length_histogram, load_m4_weekly, minmax_scale,
                     split_holdout)
from .synthetic import write_corpus
from .training import TrainingConfig, train_with_schedule

log = logging.getLogger(__name__)

DISTRIBUTIONS = ("exp", "beta", "normal")
ENSEMBLE_STRATEGIES = ("simple", "weighted", "mixed", "trimmed")


@dataclass
class ExperimentConfig:
    # data; empty paths select the synthetic corpus
    train_path: str = ""
    test_path: str = ""
    synthetic_count: int = 100
    synthetic_seed: int = 0
    lag: int = 7
    horizon: int = 13
    series_limit: int = 20
    full_corpus: bool = False
    # networks
    hidden: tuple = (32, 16)
    dropout: float = 0.2
    output_activation: str = "tanh"
    init_scale: float = 0.5
    iterations: int = 200
    single_lr: float = 0.001
    single_iterations: int = 2000
    # DP
    models: tuple = (10, 20, 30, 40, 50, 60, 70, 80, 90, 100)
    distributions: tuple = DISTRIBUTIONS
    alpha: float = 1000.0
    exp_mean: float = 0.001
    normal_mean: float = 0.001
    normal_std: float = 0.01
    beta_a: float = 1.0
    beta_b: float = 1000.0
    lr_lo: float = 1e-8
    lr_hi: float = 1.0
    # combination
    strategies: tuple = ("single", "simple", "weighted", "mixed")
    mixed_combination: str = "weighted"
    trim_fraction: float = 0.5
    horizon_squared_prefactor: bool = False
    original_units: bool = False
    # run
    seed: int = 0
    workers: int = 1
    save_checkpoints: bool = False
    out_dir: str = "runs/default"

    def __post_init__(self):
        self.models = tuple(int(p) for p in self.models)
        self.hidden = tuple(int(h) for h in self.hidden)
        self.distributions = tuple(self.distributions)
        self.strategies = tuple(self.strategies)
        self.validate()

    def validate(self):
        if not self.models or min(self.models) < 1:
            raise ConfigInvalid("every swept model count must be >= 1")
        if self.series_limit < 1:
            raise ConfigInvalid("series_limit must be >= 1")
        unknown = set(self.strategies) - set(metrics.STRATEGIES)
        if unknown:
            raise ConfigInvalid(f"unknown strategies {sorted(unknown)}")
        unknown = set(self.distributions) - set(DISTRIBUTIONS)
        if unknown:
            raise ConfigInvalid(f"unknown distributions {sorted(unknown)}")
        if "mixed" in self.strategies and set(self.distributions) != set(DISTRIBUTIONS):
            raise ConfigInvalid("the mixed strategy needs all three base distributions")
        if self.mixed_combination not in ("simple", "weighted"):
            raise ConfigInvalid("mixed_combination must be 'simple' or 'weighted'")
        if not 0 < self.trim_fraction <= 1:
            raise ConfigInvalid("trim_fraction must lie in (0, 1]")
        if min(self.lag, self.horizon, self.iterations, self.single_iterations, self.workers) < 1:
            raise ConfigInvalid("lag, horizon, iterations and workers must be positive")
        self.bases()
        DPConfig(BaseDistributionSpec.exponential(self.exp_mean), 1, self.alpha, self.seed)

    def bases(self):
        lo, hi = self.lr_lo, self.lr_hi
        return {
            "exp": BaseDistributionSpec.exponential(self.exp_mean, lo, hi),
            "normal": BaseDistributionSpec.truncated_gaussian(self.normal_mean, self.normal_std, lo, hi),
            "beta": BaseDistributionSpec.beta(self.beta_a, self.beta_b, lo, hi),
        }

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def as_dict(self):
        return {f.name: (list(v) if isinstance(v, tuple) else v)
                for f in dataclasses.fields(self) for v in [getattr(self, f.name)]}


def _convert(default, raw):
    raw = raw.strip()
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigInvalid(f"not a boolean: {raw!r}")
    if isinstance(default, tuple):
        items = [s.strip() for s in raw.split(",") if s.strip()]
        if default and isinstance(default[0], int):
            return tuple(int(s) for s in items)
        return tuple(items)
    return type(default)(raw)


def load_config(path, **overrides):
    """Read an INI-style config (any section layout) and apply overrides."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    defaults = ExperimentConfig.__dataclass_fields__
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if key not in defaults:
                raise ConfigInvalid(f"unknown config key {key!r} in [{section}]")
            default = defaults[key].default
            try:
                values[key] = _convert(default, raw)
            except ValueError as exc:
                raise ConfigInvalid(f"bad value for {key}: {raw!r}") from exc
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


# --- data --------------------------------------------------------------------

def load_series(config):
    train, test = config.train_path, config.test_path
    if not train:
        train, test = write_corpus(os.path.join(config.out_dir, "data"), config.synthetic_count,
                                   config.horizon, config.synthetic_seed)
    try:
        series = load_m4_weekly(train, test, config.horizon, config.lag)
    except DataLoadFailure:
        raise
    except OSError as exc:
        raise DataLoadFailure(str(exc)) from exc
    # need b + 1 training values plus the holdout
    series = [s for s in series if len(s) >= config.lag + 1 + config.horizon]
    if not series:
        raise DataLoadFailure("no usable series")
    return series


def subsample(series, limit, seed):
    """Sort ids, shuffle with the derived ``subsample`` stream, keep ``limit``, sort again."""
    ids = sorted(s.id for s in series)
    order = rng_for(seed, "subsample").permutation(len(ids))
    keep = set(ids[i] for i in order[:limit])
    return sorted((s for s in series if s.id in keep), key=lambda s: s.id)


# --- plan --------------------------------------------------------------------

@dataclass
class Plan:
    run_sizes: tuple  # truncation levels that need a training run
    schedules: dict = field(default_factory=dict)  # (dist, q) -> StickBreakingDraw (lr)
    weights: dict = field(default_factory=dict)  # (dist, q) -> StickBreakingDraw (weights)


def mixed_source_size(p):
    return math.ceil(p / 3)


def make_plan(config):
    sizes = set()
    if set(config.strategies) & {"simple", "weighted", "trimmed"}:
        sizes.update(config.models)
    if "mixed" in config.strategies:
        sizes.update(mixed_source_size(p) for p in config.models)
    plan = Plan(tuple(sorted(sizes)))
    bases = config.bases()
    for d in config.distributions:
        for q in plan.run_sizes:
            dp = DPConfig(bases[d], q, config.alpha, derive_seed(config.seed, "dp", d, q))
            plan.schedules[d, q] = stick_breaking(dp, rng_for(config.seed, "dp", d, q, "learning_rates"))
            plan.weights[d, q] = stick_breaking(dp, rng_for(config.seed, "dp", d, q, "weights"))
    if "mixed" in config.strategies:
        for p in config.models:
            dp = DPConfig(bases["exp"], p, config.alpha, derive_seed(config.seed, "dp", "mixed", p))
            plan.weights["mixed", p] = stick_breaking(dp, rng_for(config.seed, "dp", "mixed", p, "weights"))
    return plan


# --- per-series job ----------------------------------------------------------

@dataclass
class SeriesResult:
    id: str
    actual: np.ndarray
    forecasts: dict  # (strategy, dist, p) -> vector
    tensors: dict  # (dist, q) -> (q, H) array; ("mixed", p) for mixed pools
    scale: tuple
    diverged: str = ""


def series_seed(config, series_id):
    return derive_seed(config.seed, "series", series_id, "train")


def _training_config(config, schedule, iterations, seed):
    return TrainingConfig(tuple(schedule), iterations, config.lag, config.hidden, config.dropout,
                          config.output_activation, config.init_scale, seed)


def _checkpoint_dir(config, sid, name):
    path = os.path.join(config.out_dir, "checkpoints", sid, name)
    os.makedirs(path, exist_ok=True)
    return path


def _save_pool(config, sid, name, pool):
    directory = _checkpoint_dir(config, sid, name)
    paths = []
    for m in pool.members:
        path = os.path.join(directory, f"seg_{m.segment_index:03d}.ckpt")
        save_checkpoint(m.checkpoint, path)
        paths.append(os.path.relpath(path, config.out_dir))
    ensemble.write_pool_manifest(pool, os.path.join(directory, "manifest.csv"), paths)


def run_series(raw, config, plan):
    """Train every run for one series and return its forecasts.

    All runs of a series (the single model and every (distribution, q) run)
    share one trainer seed, so they start from the same initial weights and
    see the same row and dropout sequence; the comparisons across p,
    distributions and the single model are therefore paired.
    """
    seed = series_seed(config, raw.id)
    scaled = minmax_scale(raw)
    prefix, actual = split_holdout(scaled, config.horizon)
    frame = embed_lags(prefix, config.lag)
    window = prefix[-config.lag:]
    H = config.horizon
    forecasts, tensors = {}, {}
    result = SeriesResult(raw.id, actual, forecasts, tensors, (scaled.scale_min, scaled.scale_max))
    try:
        if "single" in config.strategies:
            cfg = _training_config(config, (config.single_lr,), config.single_iterations, seed)
            ckpt = train_with_schedule(frame, cfg)[0]
            pool = ensemble.ModelPool.from_checkpoints([ckpt], "single")
            forecasts["single", "fixed", 1] = ensemble.predict_pool(pool, window, H)[0]
            if config.save_checkpoints:
                _save_pool(config, raw.id, "single", pool)
        pools = {}
        for d in config.distributions:
            for q in plan.run_sizes:
                schedule = sort_descending(plan.schedules[d, q].atoms)
                ckpts = train_with_schedule(frame, _training_config(config, schedule, config.iterations, seed))
                pools[d, q] = ensemble.ModelPool.from_checkpoints(ckpts, d)
                tensors[d, q] = ensemble.predict_pool(pools[d, q], window, H)
                if config.save_checkpoints:
                    _save_pool(config, raw.id, f"{d}_p{q}", pools[d, q])
    except DivergenceDetected as exc:
        log.warning("series %s diverged (%s); excluded from all aggregates", raw.id, exc)
        result.diverged = str(exc)
        return result
    for d in config.distributions:
        for p in config.models:
            if "simple" in config.strategies:
                forecasts["simple", d, p] = ensemble.combine_simple(tensors[d, p])
            if "weighted" in config.strategies:
                forecasts["weighted", d, p] = ensemble.combine_weighted(
                    tensors[d, p], plan.weights[d, p].weights)
    if "mixed" in config.strategies:
        for p in config.models:
            q = mixed_source_size(p)
            counts = ensemble.mixed_counts(p)
            rows = [tensors[d, q][:n] for d, n in zip(("exp", "beta", "normal"), counts)]
            mixed = np.vstack(rows)
            tensors["mixed", p] = mixed
            if config.mixed_combination == "weighted":
                forecasts["mixed", "mixed", p] = ensemble.combine_weighted(
                    mixed, plan.weights["mixed", p].weights)
            else:
                forecasts["mixed", "mixed", p] = ensemble.combine_simple(mixed)
    return result


def _run_series_star(args):
    return run_series(*args)


# --- orchestration -----------------------------------------------------------

@dataclass
class ExperimentResult:
    reports: list
    diversity: dict  # (dist, p) -> matrix
    diverged: list
    series: list

    @property
    def partial(self):
        return bool(self.diverged)


def _evaluate(config, results, diversity):
    ok = [r for r in results if not r.diverged]
    if not ok:
        raise DataLoadFailure("every series diverged; nothing to evaluate")

    def units(r, v):
        return invert_scale(v, *r.scale) if config.original_units else v

    actuals = {r.id: units(r, r.actual) for r in ok}
    keys = sorted(ok[0].forecasts, key=lambda k: (metrics.STRATEGIES.index(k[0]), k[1], k[2]))
    reports = []
    for strategy, d, p in keys:
        fc = {r.id: units(r, r.forecasts[strategy, d, p]) for r in ok}
        reports.append(metrics.dataset_metrics(fc, actuals, strategy, d, p, config.seed))
    if "trimmed" in config.strategies:
        for d in config.distributions:
            for p in config.models:
                keep = max(1, int(round(config.trim_fraction * p)))
                idx = ensemble.trim_indices(diversity[d, p], keep)
                fc = {r.id: units(r, ensemble.combine_simple(r.tensors[d, p][idx])) for r in ok}
                reports.append(metrics.dataset_metrics(fc, actuals, "trimmed", d, p, config.seed))
    return reports


def run_experiment(config, write=True):
    series = load_series(config)
    total = len(series)
    if not config.full_corpus:
        series = subsample(series, config.series_limit, config.seed)
    log.info("running %d of %d series", len(series), total)
    plan = make_plan(config)
    jobs = [(s, config, plan) for s in series]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            results = list(pool.map(_run_series_star, jobs))
    else:
        results = [run_series(*job) for job in jobs]
    results.sort(key=lambda r: r.id)
    ok = [r for r in results if not r.diverged]
    diversity = {}
    if ok:
        for key in ok[0].tensors:
            d, q = key
            if d == "mixed" or q in config.models:
                diversity[key] = ensemble.diversity_matrix([r.tensors[key] for r in ok],
                                                           config.horizon_squared_prefactor)
    reports = _evaluate(config, results, diversity)
    result = ExperimentResult(reports, diversity, [(r.id, r.diverged) for r in results if r.diverged],
                              series)
    if write:
        write_outputs(config, plan, result)
    return result


def write_outputs(config, plan, result):
    out = config.out_dir
    for sub in ("reports", "draws", "diversity", "pools", "tables", "plots"):
        os.makedirs(os.path.join(out, sub), exist_ok=True)
    for rep in result.reports:
        metrics.write_report_csv(rep, os.path.join(out, "reports", reporting.report_filename(rep)))
    for (d, q), draw in sorted(plan.schedules.items()):
        write_draw_csv(draw, os.path.join(out, "draws", f"{d}_p{q}_learning_rates.csv"))
    for (d, q), draw in sorted(plan.weights.items()):
        write_draw_csv(draw, os.path.join(out, "draws", f"{d}_p{q}_weights.csv"))
    for (d, q), div in sorted(result.diversity.items()):
        ensemble.write_matrix_csv(div, os.path.join(out, "diversity", f"{d}_p{q}.csv"))
    for (d, q), draw in sorted(plan.schedules.items()):
        rates = sort_descending(draw.atoms)
        pool = ensemble.ModelPool(tuple(ensemble.PoolMember(None, d, r, j + 1) for j, r in enumerate(rates)))
        ensemble.write_pool_manifest(pool, os.path.join(out, "pools", f"{d}_p{q}.csv"))
    hist = length_histogram(result.series)
    reporting.emit_plot_data(result.reports, result.diversity, os.path.join(out, "plots"), hist)
    try:
        reporting.emit_tables(result.reports, os.path.join(out, "tables"), config.mixed_combination)
    except reporting.IncompleteGrid as exc:
        log.warning("tables skipped: %s", exc)
    manifest = {
        # execution settings are left out so that equal configs give equal manifests
        "config": {k: v for k, v in config.as_dict().items() if k not in ("workers", "out_dir")},
        "series": [s.id for s in result.series],
        "diverged": [list(x) for x in result.diverged],
        "run_sizes": list(plan.run_sizes),
        "seeds": {
            "subsample": derive_seed(config.seed, "subsample"),
            "train": {s.id: series_seed(config, s.id) for s in result.series},
        },
        "learning_rates": {f"{d}_p{q}": [float(x) for x in sort_descending(v.atoms)]
                           for (d, q), v in sorted(plan.schedules.items())},
        "weights": {f"{d}_p{q}": [float(x) for x in v.weights]
                    for (d, q), v in sorted(plan.weights.items())},
    }
    with open(os.path.join(out, "run_manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
