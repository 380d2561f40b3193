"""TASEP shock simulations with Fredholm-determinant and random-matrix references."""

from .config import ConfigError, ExperimentConfig, load_config, make_config, parse_config
from .engine import (ClockField, ShockScaling, SystemState, advance_coupled,
                     backward_index_path, coupled_triple, influence_path, make_initial,
                     min_identity_check, shock_constants, sweep, sweep_batch)
from .fredholm import ConvergenceError, DetResult, KernelSpec, fredholm_det
from .kernels import finite_time_cdf, finite_time_kernel, rescaled_kernel, rescaled_kernel_gap
from .report import ExperimentReport, emit_report, read_table
from .rmt import (airy_ai, gue_m_cdf, gue_m_cdf_contour, sample_gue_max,
                  tracy_widom_cdf)
from .shock_direct import ConditioningError, shock_direct_cdf
from .stats import ECDF, ecdf, ks_distance

__version__ = "0.1.0"
