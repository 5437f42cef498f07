"""Forecast combination with truncated Dirichlet-process learning rates and weights."""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .ensemble import (CombinationWeights, ForecastTensor, ModelPool, PoolMember, combine_simple,
                       combine_weighted, diversity_matrix, mixed_pool, predict_pool, trim_by_diversity)
from .experiment import ExperimentConfig, load_config, run_experiment
from .lstm import LstmParams, backward, forward, init_params, predict
from .metrics import MetricReport, dataset_metrics, mae, rmse
from .sampler import (DEFAULT_BASES, BaseDistributionSpec, DPConfig, StickBreakingDraw,
                      draw_combination_weights, draw_learning_rates, sample_base, stick_breaking)
from .series import (RawSeries, ScaledSeries, SupervisedFrame, embed_lags, invert_scale,
                     load_m4_weekly, minmax_scale, recursive_forecast)
from .training import TrainingConfig, train_with_schedule

__version__ = "0.1.0"
