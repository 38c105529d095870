"""Small-noise large deviations for Volterra-type stochastic volatility models."""

__version__ = "0.1.0"

from .asymptotics import (StrikeAsymptotics, call_price_asymptote, scaling_check, strike_exponent,
                          taylor_check)
from .config import dump_config, load_config, parse_config
from .dynamics import (ControlPath, DriverPath, PathBatch, check_operator, hat_operator, inverse_control,
                       simulate_batch, solve_control_ode)
from .functionals import (FunctionalValues, compute_EFG, inner_objective, path_rate_integrand,
                          phi_functional, phi_m_functional, phi_m_terminal, terminal_noise)
from .grid import Grid
from .kernel import (KernelSpec, KernelWeights, apply_kernel, build_weights, kernel_eval,
                     modulus_estimate)
from .model import FunctionSpec, ModelSpec, ValidationReport, eval_function, validate_spec
from .montecarlo import TailEstimate, estimate_tail, ldp_convergence_study, wilson_interval
from .rate import (RateResult, SolverOptions, minimize_path_rate, minimize_scalar_rate,
                   minimize_terminal_path_rate, rate_profile)

__all__ = [
    "ControlPath",
    "DriverPath",
    "FunctionSpec",
    "FunctionalValues",
    "Grid",
    "KernelSpec",
    "KernelWeights",
    "ModelSpec",
    "PathBatch",
    "RateResult",
    "SolverOptions",
    "StrikeAsymptotics",
    "TailEstimate",
    "ValidationReport",
    "apply_kernel",
    "build_weights",
    "call_price_asymptote",
    "check_operator",
    "compute_EFG",
    "dump_config",
    "estimate_tail",
    "eval_function",
    "hat_operator",
    "inner_objective",
    "inverse_control",
    "kernel_eval",
    "ldp_convergence_study",
    "load_config",
    "minimize_path_rate",
    "minimize_scalar_rate",
    "minimize_terminal_path_rate",
    "modulus_estimate",
    "parse_config",
    "path_rate_integrand",
    "phi_functional",
    "phi_m_functional",
    "phi_m_terminal",
    "rate_profile",
    "scaling_check",
    "simulate_batch",
    "solve_control_ode",
    "strike_exponent",
    "taylor_check",
    "terminal_noise",
    "validate_spec",
    "wilson_interval",
]
