"""Second-moment stationarity certificate and decay of product moments."""
from dataclasses import dataclass

import numpy as np

from .errors import NotStationaryError, OrderTooLargeError
from .model import companion_from_alpha
from ._products import population_growth

TOL_BOUNDARY = 1e-9
MAX_ORDER = 20


@dataclass
class StationarityReport:
    spectral_radius: float
    is_stationary: bool
    decay_rate: float
    indeterminate: bool = False

    def to_dict(self):
        return {"spectral_radius": self.spectral_radius, "is_stationary": self.is_stationary,
                "decay_rate": self.decay_rate, "indeterminate": self.indeterminate}


def kron_moment_matrix(model):
    """Exact ``E[A (x) A]`` for the companion matrix ``A``.

    ``A = C + sum_i sigma_i eta_i E_{1i}`` with ``C`` the mean companion
    matrix; cross terms vanish because the eta_i are centred and independent.
    """
    q = model.q
    if q > MAX_ORDER:
        raise OrderTooLargeError(f"order {q} exceeds the supported maximum {MAX_ORDER}")
    c = companion_from_alpha(model.a_array)
    out = np.kron(c, c)
    for i, s in enumerate(model.sigma):
        if s:
            e = np.zeros((q, q))
            e[0, i] = 1.0
            out += s * s * np.kron(e, e)
    return out


def check_d0(model, tol_boundary=TOL_BOUNDARY):
    if model.q == 1:
        rho = model.a[0] ** 2 + model.sigma[0] ** 2
    else:
        rho = float(np.max(np.abs(np.linalg.eigvals(kron_moment_matrix(model)))))
    indeterminate = abs(rho - 1.0) < tol_boundary
    stationary = rho < 1.0 - tol_boundary
    decay = float(np.log(rho)) if rho > 0 else -np.inf
    return StationarityReport(float(rho), bool(stationary), decay, bool(indeterminate))


def require_stationary(model):
    report = check_d0(model)
    if not report.is_stationary:
        what = "at the stationarity boundary" if report.indeterminate else "not stationary"
        raise NotStationaryError(
            f"model is {what}: spectral radius of E[A(x)A] = {report.spectral_radius:.12g}")
    return report


@dataclass
class MomentCurve:
    n: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray
    slope: float
    intercept: float
    fit_from: int


def second_moment_curve(model, n_max, paths, rng=None, groups=16, fit_from=None):
    """Estimates of ``E|A_1 ... A_n|^2`` (Frobenius norm) for ``n = 1..n_max``.

    ``slope`` is the least-squares slope of the log estimates against n over
    ``n >= fit_from`` (default: the second half), where the leading
    eigenvalue of ``E[A (x) A]`` dominates the transient.
    """
    require_stationary(model)
    _, mean = population_growth(model, 2.0, n_max, paths, rng, groups)
    per_group = model.q * np.cumprod(mean, axis=1)
    est = per_group.mean(axis=0)
    if groups > 1:
        se = per_group.std(axis=0, ddof=1) / np.sqrt(groups)
    else:
        se = np.full(n_max, np.nan)
    n = np.arange(1, n_max + 1)
    if fit_from is None:
        fit_from = max(1, n_max // 2)
    sel = n >= fit_from
    slope, intercept = np.polyfit(n[sel], np.log(est[sel]), 1)
    return MomentCurve(n, est, se, float(slope), float(intercept), fit_from)
