"""Table- and plot-shaped CSV output from metric reports."""

import csv
import glob
import os
from collections import defaultdict

from .ensemble import write_matrix_csv
from .errors import EmptyDataset, IncompleteGrid
from .metrics import read_report_csv
from .series import write_histogram_csv

TABLE_STRATEGIES = ("simple", "weighted")


def report_filename(report):
    return f"{report.strategy}__{report.distribution}__p{report.p}.csv"


def read_reports(directory):
    paths = sorted(glob.glob(os.path.join(directory, "*.csv")))
    if not paths:
        raise EmptyDataset(f"no report CSVs in {directory}")
    return [read_report_csv(p) for p in paths]


def _fmt(x):
    return repr(float(x))


def _grid(reports):
    """``{(strategy, p): {distribution: report}}`` for ensemble reports."""
    grid = defaultdict(dict)
    for r in reports:
        grid[r.strategy, r.p][r.distribution] = r
    return grid


def _single(reports):
    single = [r for r in reports if r.strategy == "single"]
    if not single:
        raise IncompleteGrid([("single", 1)])
    return single[0]


def emit_tables(reports, out_dir, mixed_combination="weighted"):
    """Write table analogues; raises ``IncompleteGrid`` naming missing (strategy, p) cells.

    ``table3_mae.csv`` / ``table4_rmse.csv``: rows simple and weighted, columns
    the model counts plus the single model; each cell is the mean over the base
    distributions of the dataset-level error. ``table1_mixed_mae.csv`` /
    ``table2_mixed_rmse.csv`` (only when mixed reports exist) compare the mixed
    pool against the distribution average under the same combination rule.
    """
    grid = _grid(reports)
    ens = [r for r in reports if r.strategy in TABLE_STRATEGIES]
    if not ens:
        raise IncompleteGrid([(s, "*") for s in TABLE_STRATEGIES])
    models = sorted({r.p for r in ens})
    dists = sorted({r.distribution for r in ens})
    missing = [(s, p) for s in TABLE_STRATEGIES for p in models
               if any(d not in grid[s, p] for d in dists)]
    mixed = {r.p: r for r in reports if r.strategy == "mixed"}
    if mixed:
        missing += [("mixed", p) for p in models if p not in mixed]
    single = _single(reports)
    if missing:
        raise IncompleteGrid(missing)
    os.makedirs(out_dir, exist_ok=True)

    def avg(strategy, p, attr):
        cells = [getattr(grid[strategy, p][d], attr) for d in dists]
        return sum(cells) / len(cells)

    written = []
    for name, attr in (("table3_mae.csv", "mean_mae"), ("table4_rmse.csv", "mean_rmse")):
        path = os.path.join(out_dir, name)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["strategy"] + [str(p) for p in models] + ["single"])
            for s in TABLE_STRATEGIES:
                w.writerow([s] + [_fmt(avg(s, p, attr)) for p in models] + [_fmt(getattr(single, attr))])
        written.append(path)
    if mixed:
        for name, attr in (("table1_mixed_mae.csv", "mean_mae"), ("table2_mixed_rmse.csv", "mean_rmse")):
            path = os.path.join(out_dir, name)
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["row"] + [str(p) for p in models])
                w.writerow(["mixed"] + [_fmt(getattr(mixed[p], attr)) for p in models])
                w.writerow([f"average_{mixed_combination}"] +
                           [_fmt(avg(mixed_combination, p, attr)) for p in models])
            written.append(path)
    return written


def emit_plot_data(reports, diversity, out_dir, histogram=None):
    """Error-vs-p curves per strategy, diversity heatmaps and the length histogram."""
    if not reports:
        raise EmptyDataset("no reports to plot")
    os.makedirs(out_dir, exist_ok=True)
    by_strategy = defaultdict(list)
    for r in reports:
        if r.strategy != "single":
            by_strategy[r.strategy].append(r)
    for strategy, reps in sorted(by_strategy.items()):
        with open(os.path.join(out_dir, f"curve_{strategy}.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["distribution", "p", "mae", "rmse"])
            for r in sorted(reps, key=lambda r: (r.distribution, r.p)):
                w.writerow([r.distribution, r.p, _fmt(r.mean_mae), _fmt(r.mean_rmse)])
    for (d, p), div in sorted((diversity or {}).items()):
        write_matrix_csv(div, os.path.join(out_dir, f"heatmap_{d}_p{p}.csv"))
    if histogram is not None:
        write_histogram_csv(histogram, os.path.join(out_dir, "series_length_histogram.csv"))
