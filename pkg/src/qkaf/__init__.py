"""Quantized kernel recursive MEE / GMEE adaptive filters."""

__version__ = "0.1.0"

from ._backend import BACKEND, available_backends
from .core import GGDParams, KernelParams, gamma_fn, gaussian_kernel, gaussian_kernel_matrix, ggd_density
from .quantizer import Codebook, build_codebook, quantize_insert, quantize_remove
from .criteria import (
    CriterionParams,
    batch_qgmee_fixed_point,
    effective_desired,
    empirical_ip,
    large_beta_ip_approx,
    qmee_ip,
    quantized_ip,
    theta_weight,
)
from .filters import FilterConfig, FilterState, KernelFilter, batch_solve, init, mee_equivalent, predict, update
from .signals import Embedding, MGConfig, embed, load_series, mackey_glass, sample_noise, scenario_noise
from .analysis import (
    ComplexityReport,
    LyapunovSystem,
    complexity_delta,
    empirical_mean_error_check,
    lyapunov_steady_state,
    spectral_radius,
    theta_cost,
)
from .experiments import ExperimentConfig, MetricSeries, emit_results, load_config, run_experiment, run_sweep
