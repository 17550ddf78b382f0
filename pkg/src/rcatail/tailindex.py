"""Empirical tail index of stationary draws, checked against the solver.

Also estimates the defect ``psi(x, u) = P(tau1 + tau2 > u) - P(tau1 > u)``
with ``tau1 = x'A_1 Y_1`` and ``tau2 = x' zeta_1``, which should be
nonnegative for symmetric unimodal noise.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidModelError
from .model import companion_row_product, draw_alphas, validate
from .simulate import sample_stationary
from .spectral import solve_lambda
from .stationarity import require_stationary
from ._parallel import as_generator, as_seed_sequence

HILL_TABLE_FRACTIONS = (0.005, 0.01, 0.02, 0.05)


@dataclass
class TailEstimate:
    lambda_hat: float
    stderr: float
    method: str
    k: int | None = None

    def __post_init__(self):
        if not self.lambda_hat > 0:
            raise ValueError("tail index estimate must be positive")

    def to_dict(self):
        return dict(vars(self))


def hill(sample, k):
    """Hill estimator from the ``k`` largest of the positive values in ``sample``.

    ``1 / mean(log(X_(i) / X_(k+1)))`` over descending order statistics
    ``i = 1..k``, with standard error ``lambda_hat / sqrt(k)``.
    """
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    x = np.asarray(sample, dtype=float).ravel()
    x = x[x > 0]
    if len(x) < k + 1:
        raise ValueError(f"need at least k + 1 = {k + 1} positive values, got {len(x)}")
    top = np.sort(np.partition(x, len(x) - k - 1)[len(x) - k - 1:])[::-1]
    threshold = top[k]
    mean_log = np.mean(np.log(top[:k] / threshold))
    if not mean_log > 0:
        raise ValueError("top order statistics are tied; Hill estimator undefined")
    lam = 1.0 / mean_log
    return TailEstimate(float(lam), float(lam / math.sqrt(k)), "hill", k)


def hill_table(sample, fractions=HILL_TABLE_FRACTIONS):
    x = np.asarray(sample, dtype=float)
    m = int(np.sum(x > 0))
    return [hill(x, max(1, int(round(f * m)))) for f in fractions]


def write_hill_table(path, table):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "lambda_hat", "stderr"])
        for est in table:
            w.writerow([est.k, repr(est.lambda_hat), repr(est.stderr)])


def loglog_slope(sample, lower=0.99, upper=0.999):
    """Tail index from the slope of the log empirical survival function.

    Least squares of ``log S(x)`` on ``log x`` over order statistics between
    the ``lower`` and ``upper`` sample quantiles. The default window is the
    top decade of survival probability that still holds a thousand points
    per million draws; starting lower (say at the 90% quantile) biases the
    slope down because the body of the law is not yet a power law.
    """
    x = np.sort(np.asarray(sample, dtype=float))
    x = x[x > 0]
    m = len(x)
    surv = (m - np.arange(m)) / m
    lo, hi = np.quantile(x, [lower, upper])
    sel = (x >= lo) & (x <= hi)
    if sel.sum() < 3:
        raise ValueError("too few points in the fitting window")
    slope, _ = np.polyfit(np.log(x[sel]), np.log(surv[sel]), 1)
    return TailEstimate(float(-slope), math.nan, "loglog")


def tail_plateau(sample, lam, t_low, decades=1.0, points=11):
    """``t^lam * P(X > t)`` on a log grid from ``t_low`` over ``decades`` decades."""
    x = np.sort(np.asarray(sample, dtype=float))
    t = t_low * np.logspace(0, decades, points)
    surv = (len(x) - np.searchsorted(x, t, side="right")) / len(x)
    vals = t**lam * surv
    return t, vals, float(np.std(vals) / np.mean(vals))


@dataclass
class PowerLawReport:
    lambda_star: float
    solver_method: str
    hill: TailEstimate
    loglog: TailEstimate
    hill_table: list
    plateau_t: np.ndarray
    plateau_values: np.ndarray
    plateau_cv: float
    pooled: bool
    n_draws: int
    tolerance: float
    certified: bool
    disagreements: list = field(default_factory=list)

    @property
    def agrees(self):
        return not self.disagreements

    def to_dict(self):
        return {"lambda_star": self.lambda_star, "solver_method": self.solver_method,
                "hill": self.hill.to_dict(), "loglog": self.loglog.to_dict(),
                "hill_table": [e.to_dict() for e in self.hill_table],
                "plateau": {"t": self.plateau_t.tolist(), "values": self.plateau_values.tolist(),
                            "cv": self.plateau_cv},
                "pooled": self.pooled, "n_draws": self.n_draws, "tolerance": self.tolerance,
                "theorem_certified": self.certified, "disagreements": self.disagreements,
                "agrees": self.agrees}


def _default_method(model):
    if model.q == 1 and model.eta_noise.is_gaussian:
        return "q1-exact"
    return "spectral" if model.q <= 3 else "mc"


def _unit(direction, q):
    x = np.zeros(q) if direction is None else np.asarray(direction, dtype=float).ravel()
    if direction is None:
        x[0] = 1.0
    if x.shape != (q,) or not np.linalg.norm(x) > 0:
        raise ValueError("direction must be a nonzero vector of length q")
    return x / np.linalg.norm(x)


def verify_power_law(model, direction=None, n_draws=10**6, k_fraction=0.01, rng=None,
                     tolerance=0.15, solver_method=None, plateau_quantile=0.95,
                     loglog_window=(0.99, 0.999)):
    """Hill, log-log and solver tail indices for ``x'Y`` side by side.

    Two-sided pooling of ``|x'Y|`` is used only for gaussian models with
    zero drift. The plateau of ``t^lam P(x'Y > t)`` is reported over one
    decade starting at the ``plateau_quantile`` sample quantile.
    """
    require_stationary(model)
    report = validate(model, tail_mode=True)
    if not report.accepted:
        raise InvalidModelError("; ".join(v.message for v in report.violations if v.hard))
    if not report.theorem_certified:
        warnings.warn("non-gaussian noise: the power-law theorem is not certified for this model",
                      RuntimeWarning, stacklevel=2)
    x = _unit(direction, model.q)
    s_draw, s_solve = as_seed_sequence(rng).spawn(2)
    z = sample_stationary(model, rng=s_draw, size=n_draws) @ x
    pooled = model.is_symmetric_about_zero
    tail = np.abs(z) if pooled else z[z > 0]
    k = max(1, int(round(k_fraction * len(tail))))
    h = hill(tail, k)
    ll = loglog_slope(tail, *loglog_window)
    method = solver_method or _default_method(model)
    lam = solve_lambda(model, method, rng=s_solve).lam
    t_low = float(np.quantile(tail, plateau_quantile))
    t, vals, cv = tail_plateau(tail, lam, t_low)
    bad = []
    for (na, va), (nb, vb) in [(("hill", h.lambda_hat), ("loglog", ll.lambda_hat)),
                               (("hill", h.lambda_hat), ("solver", lam)),
                               (("loglog", ll.lambda_hat), ("solver", lam))]:
        if abs(va - vb) > tolerance * vb:
            bad.append(f"{na}={va:.4g} vs {nb}={vb:.4g}")
    return PowerLawReport(lam, method, h, ll, hill_table(tail), t, vals, cv, pooled, n_draws,
                          tolerance, report.theorem_certified, bad)


@dataclass
class PsiEstimate:
    direction: np.ndarray
    u: np.ndarray
    psi: np.ndarray
    stderr: np.ndarray

    def to_dict(self):
        return {"direction": self.direction.tolist(), "u": self.u.tolist(),
                "psi": self.psi.tolist(), "stderr": self.stderr.tolist()}


def estimate_psi(model, direction, u_grid, mc_draws=10**6, rng=None):
    """Monte Carlo ``psi(x, u)`` with both probabilities on the same draws."""
    require_stationary(model)
    u = np.asarray(u_grid, dtype=float)
    if np.any(np.diff(u) <= 0):
        raise ValueError("u grid must be strictly increasing")
    x = _unit(direction, model.q)
    s_y, s_rest = as_seed_sequence(rng).spawn(2)
    y1 = sample_stationary(model, rng=s_y, size=mc_draws)
    gen = as_generator(s_rest)
    alpha = draw_alphas(model, gen, mc_draws)
    xi = model.xi_noise.sample(gen, mc_draws)
    tau1 = np.einsum("pi,pi->p", companion_row_product(x, alpha), y1)
    tau2 = x[0] * xi
    both = tau1 + tau2
    psi = np.empty(len(u))
    se = np.empty(len(u))
    for j, uj in enumerate(u):
        d = (both > uj).astype(np.int8) - (tau1 > uj).astype(np.int8)
        psi[j] = d.mean()
        se[j] = d.std(ddof=1) / math.sqrt(mc_draws)
    return PsiEstimate(x, u, psi, se)
