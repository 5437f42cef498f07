"""Single-run training along a descending learning-rate schedule.

The run is split into ``p`` segments of ``I`` SGD steps. Segment ``j`` uses
the ``j``-th largest rate, and the parameters at the end of every segment are
frozen into a checkpoint, so one run yields ``p`` base models.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .checkpoint import Checkpoint
from .errors import ConfigInvalid, DivergenceDetected
from .lstm import dropout_mask, init_params, sgd_segment
from .seeding import rng_for

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingConfig:
    schedule: tuple
    iterations: int = 200  # per segment
    lag: int = 7
    hidden: tuple = (32, 16)
    dropout: float = 0.2
    output_activation: str = "tanh"
    init_scale: float = 0.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "schedule", tuple(float(r) for r in self.schedule))
        s = np.asarray(self.schedule)
        if s.size < 1:
            raise ConfigInvalid("schedule needs at least one learning rate")
        if not (s > 0).all() or not np.isfinite(s).all():
            raise ConfigInvalid("learning rates must be positive and finite")
        if (np.diff(s) > 0).any():
            raise ConfigInvalid("schedule must be non-increasing")
        if self.iterations < 1:
            raise ConfigInvalid("iterations per segment must be positive")

    @property
    def total_iterations(self):
        return len(self.schedule) * self.iterations


def _segment_masks(rng, cfg, n1):
    if cfg.dropout == 0.0:
        return np.ones((cfg.iterations, cfg.lag, n1))
    return np.stack([dropout_mask(rng, cfg.lag, n1, cfg.dropout) for _ in range(cfg.iterations)])


def train_with_schedule(frame, config, rng=None):
    """Train one network on ``frame`` and return one checkpoint per segment.

    Each step draws one frame row uniformly at random. Raises
    ``DivergenceDetected`` if the loss becomes non-finite.
    """
    if len(frame) == 0:
        raise ConfigInvalid("empty training frame")
    if frame.lag != config.lag:
        raise ConfigInvalid(f"frame lag {frame.lag} differs from config lag {config.lag}")
    if rng is None:
        rng = rng_for(config.seed, "train")
    params = init_params(rng, config.hidden, config.lag, config.dropout,
                         config.output_activation, config.init_scale)
    n1 = config.hidden[0]
    out = []
    for j, lr in enumerate(config.schedule, start=1):
        rows = rng.integers(0, len(frame), size=config.iterations)
        masks = _segment_masks(rng, config, n1)
        losses, failed = sgd_segment(params, frame.inputs, frame.targets, rows, masks, lr)
        if failed >= 0 or not params.all_finite():
            it = (j - 1) * config.iterations + max(failed, 0) + 1
            raise DivergenceDetected(j, it)
        out.append(Checkpoint(params.copy(), j, j * config.iterations, lr, int(config.seed)))
        log.debug("segment %d lr=%.3g mean loss %.4g", j, lr, float(losses.mean()))
    return out
