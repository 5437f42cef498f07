"""Loading, scaling and lag embedding of weekly series.

Scaling statistics are taken over the merged train+test series, so the test
range leaks into the scaler. This mirrors the reference preprocessing and is
kept on purpose; do not use these scaled values for anything that must be
blind to the holdout.
"""

import csv
import logging
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import IoFailure, MalformedRow, MissingTestSeries, SeriesTooShort

log = logging.getLogger(__name__)

DEFAULT_LAG = 7
DEFAULT_HORIZON = 13


@dataclass(frozen=True)
class RawSeries:
    id: str
    observations: np.ndarray
    horizon: int

    def __len__(self):
        return len(self.observations)


@dataclass(frozen=True)
class ScaledSeries:
    id: str
    values: np.ndarray
    scale_min: float
    scale_max: float
    degenerate: bool = False


@dataclass(frozen=True)
class SupervisedFrame:
    inputs: np.ndarray
    targets: np.ndarray
    lag: int

    def __len__(self):
        return len(self.targets)


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _read_rows(path):
    """Rows of ``id -> [cells]`` with trailing empty cells removed."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    values = [c.strip() for c in rows[0][1:] if c.strip()] if rows else []
    if values and not any(_is_number(c) for c in values):
        rows = rows[1:]  # header
    out = {}
    for row in rows:
        cells = [c.strip() for c in row[1:]]
        while cells and cells[-1] == "":
            cells.pop()
        out[row[0].strip()] = cells
    return out


def _parse(series_id, cells, offset=1):
    values = np.empty(len(cells))
    for j, cell in enumerate(cells):
        try:
            values[j] = float(cell)
        except ValueError:
            raise MalformedRow(series_id, j + offset, cell) from None
        if not np.isfinite(values[j]):
            raise MalformedRow(series_id, j + offset, cell)
    return values


def load_m4_weekly(train_path, test_path, horizon=DEFAULT_HORIZON, lag=DEFAULT_LAG):
    """Merge train and test rows per id into ``RawSeries`` (file order kept).

    Series shorter than ``lag + 1`` are skipped with a warning; ids missing from
    the test file are loaded with an empty suffix and a ``MissingTestSeries``
    warning.
    """
    train = _read_rows(train_path)
    test = _read_rows(test_path)
    series = []
    for sid, cells in train.items():
        values = _parse(sid, cells)
        if sid in test:
            tail = _parse(sid, test[sid], offset=len(cells) + 1)
        else:
            warnings.warn(f"series {sid!r} has no test row", MissingTestSeries, stacklevel=2)
            tail = np.empty(0)
        obs = np.concatenate([values, tail])
        if len(obs) < lag + 1:
            log.warning("skipping %s: length %d < lag + 1 = %d", sid, len(obs), lag + 1)
            continue
        series.append(RawSeries(sid, obs, int(horizon)))
    for sid in test.keys() - train.keys():
        log.warning("test row %s has no train row; ignored", sid)
    return series


def minmax_scale(series):
    y = np.asarray(series.observations, dtype=float)
    lo, hi = float(y.min()), float(y.max())
    if hi == lo:
        return ScaledSeries(series.id, np.zeros_like(y), lo, hi, degenerate=True)
    return ScaledSeries(series.id, (y - lo) / (hi - lo), lo, hi)


def invert_scale(preds, scale_min, scale_max):
    # not clamped: forecasts may leave [0, 1]
    return scale_min + np.asarray(preds, dtype=float) * (scale_max - scale_min)


def embed_lags(values, b=DEFAULT_LAG):
    """``(T - b, b)`` lag matrix and the ``T - b`` next-step targets.

    Accepts a ``ScaledSeries`` or a plain vector.
    """
    values = np.asarray(getattr(values, "values", values), dtype=float)
    if len(values) < b + 1:
        raise SeriesTooShort(f"need at least {b + 1} values, got {len(values)}")
    inputs = sliding_window_view(values[:-1], b).copy()
    return SupervisedFrame(inputs, values[b:].copy(), b)


def recursive_forecast(predict_one, last_window, h):
    """Roll a one-step predictor forward ``h`` steps, feeding predictions back."""
    window = np.array(last_window, dtype=float)
    out = np.empty(h)
    for step in range(h):
        out[step] = predict_one(window)
        window = np.append(window[1:], out[step])
    return out


def split_holdout(scaled, horizon):
    """Training prefix and the final ``horizon`` values of a scaled series."""
    values = scaled.values
    return values[:-horizon], values[-horizon:]


def write_scaled_csv(scaled_series, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "scale_min", "scale_max", "degenerate", "values"])
        for s in scaled_series:
            w.writerow([s.id, repr(s.scale_min), repr(s.scale_max), int(s.degenerate),
                        " ".join(repr(float(v)) for v in s.values)])


def length_histogram(series, bin_width=100):
    """``(length_bin, count)`` rows; bins start at the shortest series length."""
    lengths = np.array([len(s) for s in series])
    if len(lengths) == 0:
        return []
    start = int(lengths.min())
    idx = (lengths - start) // bin_width
    counts = np.bincount(idx)
    return [(start + i * bin_width, int(c)) for i, c in enumerate(counts)]


def write_histogram_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["length_bin", "count"])
        w.writerows(rows)
