"""Forecast error metrics and dataset-level reports."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDataset, LengthMismatch

STRATEGIES = ("single", "simple", "weighted", "mixed", "trimmed")
AGGREGATE_ID = "__mean__"


def _errors(actual, forecast):
    a = np.asarray(actual, dtype=float)
    f = np.asarray(forecast, dtype=float)
    if a.shape != f.shape or a.ndim != 1:
        raise LengthMismatch(f"actual has shape {a.shape}, forecast {f.shape}")
    if a.size == 0:
        raise LengthMismatch("empty horizon")
    return a - f


def mae(actual, forecast):
    e = _errors(actual, forecast)
    return math.fsum(np.abs(e)) / e.size


def rmse(actual, forecast):
    e = _errors(actual, forecast)
    return math.sqrt(math.fsum(e * e) / e.size)


@dataclass(frozen=True)
class SeriesScore:
    id: str
    mae: float
    rmse: float


@dataclass(frozen=True)
class MetricReport:
    strategy: str
    distribution: str
    p: int
    seed: int
    records: tuple

    @property
    def n(self):
        return len(self.records)

    @property
    def mean_mae(self):
        return math.fsum(r.mae for r in self.records) / self.n

    @property
    def mean_rmse(self):
        return math.fsum(r.rmse for r in self.records) / self.n

    @property
    def key(self):
        return (self.strategy, self.distribution, self.p)


def dataset_metrics(forecasts, actuals, strategy, distribution="", p=1, seed=0):
    """Per-series MAE/RMSE and their unweighted means.

    ``forecasts`` and ``actuals`` map series id to a horizon vector; records are
    ordered by id so the report does not depend on input order.
    """
    if not forecasts:
        raise EmptyDataset("no series to evaluate")
    records = tuple(SeriesScore(sid, mae(actuals[sid], forecasts[sid]), rmse(actuals[sid], forecasts[sid]))
                    for sid in sorted(forecasts))
    return MetricReport(strategy, distribution, int(p), int(seed), records)


REPORT_COLUMNS = ["strategy", "distribution", "p", "seed", "series_id", "mae", "rmse"]


def write_report_csv(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        head = [report.strategy, report.distribution, report.p, report.seed]
        for r in report.records:
            w.writerow(head + [r.id, repr(r.mae), repr(r.rmse)])
        w.writerow(head + [AGGREGATE_ID, repr(report.mean_mae), repr(report.mean_rmse)])


def read_report_csv(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.DictReader(fh)]
    if not rows:
        raise EmptyDataset(f"{path} has no rows")
    first = rows[0]
    records = tuple(SeriesScore(r["series_id"], float(r["mae"]), float(r["rmse"]))
                    for r in rows if r["series_id"] != AGGREGATE_ID)
    return MetricReport(first["strategy"], first["distribution"], int(first["p"]),
                        int(first["seed"]), records)
