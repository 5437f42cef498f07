"""Model pools, forecast tensors, combination and diversity.

Members of a pool are ordered, and combination weights align with that order
by index. Combination runs on scaled forecasts; because inversion to original
units is affine it commutes with any convex combination, so the order of
combining and inverting does not matter.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import load_checkpoint
from .errors import (CheckpointError, InconsistentShapes, InsufficientMembers,
                     LengthMismatch)
from .series import recursive_forecast

PROVENANCES = ("exp", "beta", "normal", "mixed", "single")


@dataclass(frozen=True)
class PoolMember:
    checkpoint: object = None  # Checkpoint, or None to load from ``path``
    provenance: str = "exp"
    learning_rate: float = 0.0
    segment_index: int = 0
    path: str = ""

    def load(self):
        return self.checkpoint if self.checkpoint is not None else load_checkpoint(self.path)


@dataclass(frozen=True)
class ModelPool:
    members: tuple

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if len(self.members) < 1:
            raise InsufficientMembers("a pool needs at least one member")

    def __len__(self):
        return len(self.members)

    def __getitem__(self, i):
        return self.members[i]

    def subset(self, indices):
        return ModelPool(tuple(self.members[i] for i in indices))

    @classmethod
    def from_checkpoints(cls, checkpoints, provenance):
        return cls(tuple(PoolMember(c, provenance, c.learning_rate, c.segment_index)
                         for c in checkpoints))


@dataclass(frozen=True)
class ForecastTensor:
    series_id: str
    values: np.ndarray  # (p, H)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1:
            raise InconsistentShapes("forecast tensor must be a non-empty (p, H) matrix")
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class CombinationWeights:
    raw: np.ndarray
    normalized: np.ndarray = field(init=False)

    def __post_init__(self):
        raw = np.asarray(self.raw, dtype=float)
        if raw.ndim != 1 or (raw < 0).any() or not np.isfinite(raw).all():
            raise ValueError("weights must be a finite nonnegative vector")
        total = raw.sum()
        if total <= 0:
            raise ValueError("weights must not all be zero")
        object.__setattr__(self, "raw", raw)
        object.__setattr__(self, "normalized", raw / total)

    def __len__(self):
        return len(self.raw)


def predict_pool(pool, window, h):
    rows = []
    for i, member in enumerate(pool.members):
        try:
            ckpt = member.load()
        except CheckpointError as exc:
            raise type(exc)(f"pool member {i}: {exc}") from exc
        rows.append(recursive_forecast(ckpt.predict, window, h))
    return np.vstack(rows)


def forecast_tensor(series_id, pool, window, h):
    return ForecastTensor(series_id, predict_pool(pool, window, h))


def _values(tensor):
    return tensor.values if isinstance(tensor, ForecastTensor) else np.asarray(tensor, dtype=float)


def combine_simple(tensor):
    return _values(tensor).mean(axis=0)


def combine_weighted(tensor, weights):
    f = _values(tensor)
    if not isinstance(weights, CombinationWeights):
        weights = CombinationWeights(weights)
    if len(weights) != f.shape[0]:
        raise LengthMismatch(f"{len(weights)} weights for a pool of {f.shape[0]}")
    return weights.normalized @ f


def diversity_matrix(tensors, horizon_squared_prefactor=False):
    """Mean squared disagreement between every pair of pool members.

    ``DIV[i, j] = 1/(N*H) * sum_k sum_h (f_ikh - f_jkh)**2`` over the ``N``
    series. With ``horizon_squared_prefactor`` the alternative ``1/H**2``
    prefactor is used instead.
    """
    arrays = [_values(t) for t in tensors]
    if not arrays:
        raise InconsistentShapes("no forecast tensors given")
    shape = arrays[0].shape
    for a in arrays:
        if a.shape != shape:
            raise InconsistentShapes(f"tensor shape {a.shape} differs from {shape}")
    p, H = shape
    total = np.zeros((p, p))
    for f in arrays:
        diff = f[:, None, :] - f[None, :, :]
        total += (diff * diff).sum(axis=2)
    scale = 1.0 / (H * H) if horizon_squared_prefactor else 1.0 / (len(arrays) * H)
    div = total * scale
    # exact symmetry regardless of summation order
    return np.triu(div, 1) + np.triu(div, 1).T


def mean_off_diagonal(div):
    p = div.shape[0]
    if p < 2:
        return 0.0
    return float(div.sum() / (p * (p - 1)))


def mixed_counts(p):
    """Members taken from the (exp, beta, normal) sources for a mixed pool of size ``p``."""
    base, extra = divmod(p, 3)
    return base + (extra > 0), base + (extra > 1), base


def mixed_pool(pool_exp, pool_beta, pool_normal, p):
    """Equal thirds from each source in index order; ``p mod 3`` extras go to exp then beta."""
    counts = mixed_counts(p)
    members = []
    for src, n, label in zip((pool_exp, pool_beta, pool_normal), counts, ("exp", "beta", "normal")):
        if len(src) < n:
            raise InsufficientMembers(f"{label} pool has {len(src)} members, need {n}")
        members.extend(src.members[:n])
    return ModelPool(tuple(members))


def trim_indices(div, k):
    """Greedy max-diversity selection of ``k`` member indices (sorted)."""
    div = np.asarray(div, dtype=float)
    p = div.shape[0]
    if not 1 <= k <= p:
        raise ValueError(f"K must lie in [1, {p}]")
    if k == p:
        return list(range(p))
    if k == 1:
        return [0]
    best, pair = -np.inf, (0, 1)
    for i in range(p):
        for j in range(i + 1, p):
            if div[i, j] > best:
                best, pair = div[i, j], (i, j)
    chosen = list(pair)
    while len(chosen) < k:
        rest = [i for i in range(p) if i not in chosen]
        gains = [div[i, chosen].sum() for i in rest]
        chosen.append(rest[int(np.argmax(gains))])  # argmax keeps the lowest index on ties
    return sorted(chosen)


def trim_by_diversity(pool, div, k):
    return pool.subset(trim_indices(div, k))


def write_matrix_csv(matrix, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(matrix):
            w.writerow([repr(float(v)) for v in row])


def read_matrix_csv(path):
    with open(path, newline="") as fh:
        return np.array([[float(v) for v in row] for row in csv.reader(fh) if row])


def write_pool_manifest(pool, path, paths=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["member_index", "provenance", "learning_rate", "segment_index", "checkpoint_path"])
        for i, m in enumerate(pool.members):
            ckpt_path = paths[i] if paths is not None else m.path
            w.writerow([i, m.provenance, repr(float(m.learning_rate)), m.segment_index, ckpt_path])


def read_pool_manifest(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return ModelPool(tuple(PoolMember(None, r["provenance"], float(r["learning_rate"]),
                                      int(r["segment_index"]), r["checkpoint_path"]) for r in rows))
