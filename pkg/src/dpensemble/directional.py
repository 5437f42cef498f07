"""Multi-seed desk-scale sweep and the trend checks computed from it.

Per seed the grid is p in {10, 20, 50} x {exp, beta, normal} x {simple,
weighted} plus the fixed-rate single model, on a seeded 20-series subsample.
Ensemble errors are averaged over the three base distributions, and pool
diversity is the mean off-diagonal entry averaged over the distributions.
"""

import os

from .ensemble import mean_off_diagonal
from .experiment import DISTRIBUTIONS, ExperimentConfig, run_experiment

MODELS = (10, 20, 50)
MIN_SEEDS = 4


def seed_summary(result, models=MODELS):
    reps = {r.key: r for r in result.reports}
    out = {"single_mae": reps["single", "fixed", 1].mean_mae}
    for strategy in ("simple", "weighted"):
        out[strategy] = {p: sum(reps[strategy, d, p].mean_mae for d in DISTRIBUTIONS) / 3 for p in models}
    out["diversity"] = {p: sum(mean_off_diagonal(result.diversity[d, p]) for d in DISTRIBUTIONS) / 3
                        for p in models}
    return out


def trend_checks(per_seed, improvement=0.10):
    """Seed counts for each trend; a check passes with at least ``MIN_SEEDS`` seeds."""
    seeds = list(per_seed.values())
    lo, hi = min(MODELS), max(MODELS)
    counts = {
        "a_weighted_p50_below_p10": sum(s["weighted"][hi] < s["weighted"][lo] for s in seeds),
        **{f"b_weighted_le_simple_p{p}": sum(s["weighted"][p] <= s["simple"][p] for s in seeds)
           for p in MODELS},
        **{f"c_weighted_beats_single_10pct_p{p}":
           sum(s["weighted"][p] <= (1 - improvement) * s["single_mae"] for s in seeds)
           for p in MODELS if p >= 20},
        "div_p20_above_p10": sum(s["diversity"][20] > s["diversity"][10] for s in seeds),
    }
    return {k: {"seeds": v, "of": len(seeds), "pass": v >= MIN_SEEDS} for k, v in counts.items()}


def directional_config(seed, out_dir, series_limit=20, iterations=200, **kw):
    return ExperimentConfig(models=MODELS, strategies=("single", "simple", "weighted"),
                            series_limit=series_limit, iterations=iterations, seed=seed,
                            out_dir=out_dir, **kw)


def run_directional(seeds, out_dir, progress=None, **kw):
    per_seed = {}
    for seed in seeds:
        cfg = directional_config(seed, os.path.join(out_dir, f"seed_{seed}"), **kw)
        per_seed[seed] = seed_summary(run_experiment(cfg))
        if progress:
            s = per_seed[seed]
            progress(f"seed {seed}: single {s['single_mae']:.4f} "
                     + " ".join(f"p{p}: w {s['weighted'][p]:.4f} s {s['simple'][p]:.4f}" for p in MODELS)
                     + f" div10 {s['diversity'][10]:.3g} div20 {s['diversity'][20]:.3g}")
    return {"per_seed": per_seed, "checks": trend_checks(per_seed)}
