"""Truncated Dirichlet-process draws for learning rates and combination weights.

A draw keeps the first ``p`` sticks of the stick-breaking construction,
discards the residual stick and renormalizes, so every draw is a proper
``p``-component mixture. Atoms come from one of three base distributions
restricted to a positive window ``[lo, hi]``:

* ``Exponential(mean)``: parameterised by its mean (rate ``1/mean``).
* ``TruncatedGaussian(mean, stddev)``: the second parameter is a standard
  deviation, out-of-window values are rejected.
* ``Beta(a, b)``.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import ConfigInvalid, NonConvergence
from .seeding import MASK64, rng_for

EXPONENTIAL = "exponential"
TRUNCATED_GAUSSIAN = "truncated_gaussian"
BETA = "beta"
KINDS = (EXPONENTIAL, TRUNCATED_GAUSSIAN, BETA)

MAX_REJECTIONS = 10**6


@dataclass(frozen=True)
class BaseDistributionSpec:
    kind: str
    mean: float = 0.0
    stddev: float = 0.0
    shape_a: float = 0.0
    shape_b: float = 0.0
    lo: float = 1e-8
    hi: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigInvalid(f"unknown base distribution {self.kind!r}")
        if not (0 < self.lo < self.hi):
            raise ConfigInvalid(f"support bounds must satisfy 0 < lo < hi, got [{self.lo}, {self.hi}]")
        if self.kind == EXPONENTIAL and not self.mean > 0:
            raise ConfigInvalid("exponential mean must be positive")
        if self.kind == TRUNCATED_GAUSSIAN:
            if not self.stddev > 0:
                raise ConfigInvalid("gaussian stddev must be positive")
            if not (self.lo < self.mean < self.hi):
                raise ConfigInvalid("gaussian mean must lie inside (lo, hi)")
        if self.kind == BETA and not (self.shape_a > 0 and self.shape_b > 0):
            raise ConfigInvalid("beta shapes must be positive")

    @classmethod
    def exponential(cls, mean, lo=1e-8, hi=1.0):
        return cls(EXPONENTIAL, mean=mean, lo=lo, hi=hi)

    @classmethod
    def truncated_gaussian(cls, mean, stddev, lo=1e-8, hi=1.0):
        return cls(TRUNCATED_GAUSSIAN, mean=mean, stddev=stddev, lo=lo, hi=hi)

    @classmethod
    def beta(cls, a, b, lo=1e-8, hi=1.0):
        return cls(BETA, shape_a=a, shape_b=b, lo=lo, hi=hi)

    @property
    def label(self):
        return {EXPONENTIAL: "exp", TRUNCATED_GAUSSIAN: "normal", BETA: "beta"}[self.kind]


# The three base distributions used in the experiments: EXP(0.001),
# N(0.001, 0.01) and Beta(1, 1000).
DEFAULT_BASES = {
    "exp": BaseDistributionSpec.exponential(0.001),
    "normal": BaseDistributionSpec.truncated_gaussian(0.001, 0.01),
    "beta": BaseDistributionSpec.beta(1.0, 1000.0),
}


@dataclass(frozen=True)
class DPConfig:
    base: BaseDistributionSpec
    truncation: int
    alpha: float = 1000.0
    seed: int = 0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigInvalid("alpha must be positive")
        if int(self.truncation) != self.truncation or self.truncation < 1:
            raise ConfigInvalid("truncation level must be a positive integer")
        if not (0 <= int(self.seed) <= MASK64):
            raise ConfigInvalid("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class StickBreakingDraw:
    betas: np.ndarray
    weights: np.ndarray
    atoms: np.ndarray
    residual: float = field(default=0.0)

    def __len__(self):
        return len(self.weights)


def inverse_cdf(spec, u):
    """Untruncated inverse CDF for the inverse-transform kinds."""
    if spec.kind == EXPONENTIAL:
        return -spec.mean * math.log1p(-u)
    if spec.kind == BETA:
        return float(special.betaincinv(spec.shape_a, spec.shape_b, u))
    raise ValueError("the gaussian base is sampled by rejection, not inversion")


def sample_base(spec, rng):
    """One variate from ``spec`` restricted to ``[lo, hi]``.

    Exponential and Beta invert one uniform variate; values outside the window
    are redrawn, which yields the exact truncated law.
    """
    for _ in range(MAX_REJECTIONS):
        if spec.kind == TRUNCATED_GAUSSIAN:
            x = spec.mean + spec.stddev * rng.standard_normal()
        else:
            x = inverse_cdf(spec, rng.random())
        if spec.lo <= x <= spec.hi:
            return x
    raise NonConvergence(f"no sample inside [{spec.lo}, {spec.hi}] after {MAX_REJECTIONS} attempts")


def stick_weights(betas):
    """Pre-normalization stick lengths and the residual mass ``prod(1 - beta)``."""
    betas = np.asarray(betas, dtype=float)
    remaining = np.cumprod(1.0 - betas)
    pre = betas * np.concatenate(([1.0], remaining[:-1]))
    return pre, float(remaining[-1])


def _draw_betas(alpha, p, rng):
    betas = rng.beta(1.0, alpha, size=p)
    # keep fractions strictly inside (0, 1)
    bad = (betas <= 0.0) | (betas >= 1.0)
    while bad.any():
        betas[bad] = rng.beta(1.0, alpha, size=int(bad.sum()))
        bad = (betas <= 0.0) | (betas >= 1.0)
    return betas


def draw_from_betas(betas, spec, rng):
    pre, residual = stick_weights(betas)
    atoms = np.array([sample_base(spec, rng) for _ in range(len(pre))])
    return StickBreakingDraw(np.asarray(betas, dtype=float), pre / pre.sum(), atoms, residual)


def stick_breaking(config, rng=None):
    if rng is None:
        rng = rng_for(config.seed, "stick_breaking")
    betas = _draw_betas(config.alpha, config.truncation, rng)
    return draw_from_betas(betas, config.base, rng)


def draw_learning_rates(config, rng=None):
    """Atoms of one draw sorted in descending order."""
    if rng is None:
        rng = rng_for(config.seed, "learning_rates")
    atoms = stick_breaking(config, rng).atoms
    return sort_descending(atoms)


def sort_descending(values):
    values = np.asarray(values, dtype=float)
    order = np.argsort(-values, kind="stable")
    return values[order]


def draw_combination_weights(config, rng=None):
    """Normalized weights of a draw independent of the learning-rate draw."""
    if rng is None:
        rng = rng_for(config.seed, "weights")
    return stick_breaking(config, rng).weights


def write_draw_csv(draw, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "beta", "weight", "atom"])
        for i, (b, wt, a) in enumerate(zip(draw.betas, draw.weights, draw.atoms)):
            w.writerow([i, repr(float(b)), repr(float(wt)), repr(float(a))])
