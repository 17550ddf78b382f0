"""Tail index and diagnostics for random coefficient autoregressions."""
from .errors import (InvalidModelError, NotStationaryError, NumericalError, NoConvergenceError,
                     NoRootError, RcaError)
from .model import (ArArchModel, NoiseSpec, RcaModel, load_model, model_from_dict, model_to_dict,
                    to_ar_arch, validate)
from .stationarity import check_d0, second_moment_curve
from .simulate import (SimConfig, conditional_covariance, equivalence_test, sample_stationary,
                       simulate_ar_arch, simulate_path)
from .sphere_chain import estimate_beta, estimate_lyapunov
from .spectral import SphereGrid, kappa_mc, kappa_q1, power_iterate, solve_lambda
from .tailindex import estimate_psi, hill, verify_power_law
from ._parallel import set_max_workers

__version__ = "0.1.0"

__all__ = [
    "ArArchModel", "InvalidModelError", "NoConvergenceError", "NoRootError", "NoiseSpec",
    "NotStationaryError", "NumericalError", "RcaError", "RcaModel", "SimConfig", "SphereGrid",
    "check_d0", "conditional_covariance", "equivalence_test", "estimate_beta",
    "estimate_lyapunov", "estimate_psi", "hill", "kappa_mc", "kappa_q1", "load_model",
    "model_from_dict", "model_to_dict", "power_iterate", "sample_stationary",
    "second_moment_curve", "set_max_workers", "simulate_ar_arch", "simulate_path",
    "solve_lambda", "to_ar_arch", "validate", "verify_power_law",
]
