"""Sparse index tracking: hybrid half thresholding (L1/2), hybrid LARS (L1)
and an exhaustive-support oracle, with OR-Library ingestion and benchmark
sweeps."""

from .bench import ExperimentSpec, ResultRow, cons, emit_csv, emit_plot_series, run_experiment, supo
from .core import Bounds, PortfolioWeights, TrackerConfig, spectral_norm_sq, tracking_error
from .dataio import PricePanel, ReturnsData, load_orlib, parse_orlib, split, to_returns
from .halfthresh import (
    adaptive_lambda,
    gradient_step,
    half_threshold_scalar,
    half_threshold_vector,
    select_support,
)
from .larspath import cd_lasso, lars_path, lars_support
from .pipeline import TrackResult, track, track_exhaustive, track_l1, track_l12
from .qpsolve import QpProblem, QpSolution, kkt_residual, solve_qp

__version__ = "0.1.0"
