"""Synthetic stand-in for the M4 weekly files.

Each series is ``level + trend + yearly seasonality + AR(1) noise`` with
per-series random parameters, written as M4-style ``train``/``test`` CSVs
(header ``V1,V2,...``, id in the first column, ragged rows).
"""

import csv
import os

import numpy as np

from .seeding import rng_for

MIN_LENGTH = 276  # shortest M4 weekly series
PERIOD = 52


def weekly_series(rng, length):
    t = np.arange(length)
    level = rng.uniform(1000.0, 10000.0)
    trend = rng.normal(0.0, 0.0015) * level
    season = rng.uniform(0.02, 0.15) * level
    phase = rng.uniform(0.0, 2 * np.pi)
    phi = rng.uniform(0.6, 0.95)
    sigma = rng.uniform(0.01, 0.04) * level
    shocks = rng.normal(0.0, sigma, size=length)
    noise = np.empty(length)
    noise[0] = shocks[0] / np.sqrt(1 - phi * phi)
    for i in range(1, length):
        noise[i] = phi * noise[i - 1] + shocks[i]
    y = level + trend * t + season * np.sin(2 * np.pi * t / PERIOD + phase) + noise
    return np.round(y - min(0.0, y.min()) + 1.0, 2)


def generate_corpus(n_series, seed=0, min_length=MIN_LENGTH, max_length=1200):
    """``{id: values}`` for ``n_series`` series with ids ``W1..Wn``."""
    out = {}
    for k in range(1, n_series + 1):
        rng = rng_for(seed, "synthetic", k)
        length = min_length if k == 1 else int(rng.integers(min_length, max_length + 1))
        out[f"W{k}"] = weekly_series(rng, length)
    return out


def _write(rows, path):
    width = max(len(v) for v in rows.values())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["V1"] + [f"V{i + 2}" for i in range(width)])
        for sid, values in rows.items():
            w.writerow([sid] + [repr(float(v)) for v in values])


def write_corpus(directory, n_series, horizon=13, seed=0, **kw):
    """Write ``Weekly-train.csv`` and ``Weekly-test.csv``; returns both paths."""
    os.makedirs(directory, exist_ok=True)
    corpus = generate_corpus(n_series, seed, **kw)
    train_path = os.path.join(directory, "Weekly-train.csv")
    test_path = os.path.join(directory, "Weekly-test.csv")
    _write({k: v[:-horizon] for k, v in corpus.items()}, train_path)
    _write({k: v[-horizon:] for k, v in corpus.items()}, test_path)
    return train_path, test_path
