"""Random-coefficient AR(q) and AR-ARCH(q) parameterizations.

The scalar recursion

    y_n = alpha_{1n} y_{n-1} + ... + alpha_{qn} y_{n-q} + xi_n,
    alpha_{in} = a_i + sigma_i * eta_{in},

is embedded as ``Y_n = A_n Y_{n-1} + zeta_n`` with ``A_n`` the companion
matrix whose top row is ``alpha_n`` and whose lower block is the shifted
identity. Vectors are stored 0-based; ``a[0]`` is a_1.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .errors import (DegenerateDrawError, EquivalenceNotCertifiedError,
                     InvalidModelError, MissingDrawsError)
from ._parallel import as_generator

__all__ = [
    "NoiseSpec", "RcaModel", "ArArchModel", "CompanionMatrix", "ValidationReport",
    "Violation", "validate", "draw_coefficients", "draw_alphas", "to_ar_arch",
    "reconstruct_residuals", "companion_row_product", "draw_alphas_defensive", "moment_check",
    "load_model", "model_from_dict", "model_to_dict",
]


@dataclass(frozen=True)
class NoiseSpec:
    """Innovation law for eta or xi.

    ``family="gaussian"`` needs nothing else. A ``custom`` family carries a
    sampler ``sampler(generator, size) -> ndarray`` together with the moments
    it claims to have; those claims are what :func:`validate` inspects.
    """
    family: str = "gaussian"
    sampler: Optional[Callable] = field(default=None, compare=False, repr=False)
    mean: float = 0.0
    variance: float = 1.0
    max_moment: float = math.inf
    description: Optional[dict] = None

    def __post_init__(self):
        if self.family not in ("gaussian", "custom"):
            raise InvalidModelError(f"unknown noise family {self.family!r}")
        if self.family == "custom" and self.sampler is None:
            raise InvalidModelError("custom noise needs a sampler")

    @property
    def is_gaussian(self):
        return self.family == "gaussian"

    def sample(self, rng, size):
        if self.is_gaussian:
            return rng.standard_normal(size)
        return np.asarray(self.sampler(rng, size), dtype=float)

    @classmethod
    def from_scipy(cls, name, max_moment=math.inf, **params):
        """Standardized ``scipy.stats`` distribution (mean 0, variance 1 by construction)."""
        dist = getattr(stats, name)(**params)
        loc, scale = float(dist.mean()), float(dist.std())
        if not (math.isfinite(loc) and math.isfinite(scale) and scale > 0):
            raise InvalidModelError(f"{name}{params} has no finite variance")

        def sampler(rng, size):
            return (dist.rvs(size=size, random_state=rng) - loc) / scale

        return cls("custom", sampler, 0.0, 1.0, max_moment,
                   {"family": "custom", "distribution": name, "params": dict(params),
                    "max_moment": None if math.isinf(max_moment) else max_moment})

    def to_dict(self):
        if self.is_gaussian:
            return {"family": "gaussian"}
        if self.description is not None:
            return dict(self.description)
        return {"family": "custom", "mean": self.mean, "variance": self.variance,
                "max_moment": None if math.isinf(self.max_moment) else self.max_moment}


GAUSSIAN = NoiseSpec()


@dataclass(frozen=True)
class RcaModel:
    a: tuple
    sigma: tuple
    eta_noise: NoiseSpec = GAUSSIAN
    xi_noise: NoiseSpec = GAUSSIAN

    def __post_init__(self):
        a = tuple(float(v) for v in np.atleast_1d(self.a))
        sigma = tuple(float(v) for v in np.atleast_1d(self.sigma))
        if len(a) == 0 or len(a) != len(sigma):
            raise InvalidModelError("a and sigma must be non-empty and of equal length")
        if not all(math.isfinite(v) for v in a + sigma):
            raise InvalidModelError("parameters must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "sigma", sigma)

    @property
    def q(self):
        return len(self.a)

    @property
    def a_array(self):
        return np.array(self.a)

    @property
    def sigma_array(self):
        return np.array(self.sigma)

    @property
    def is_gaussian(self):
        return self.eta_noise.is_gaussian and self.xi_noise.is_gaussian

    @property
    def is_symmetric_about_zero(self):
        """Gaussian noise and zero drift; used to decide two-sided tail pooling."""
        return self.is_gaussian and not any(self.a)


@dataclass(frozen=True)
class ArArchModel:
    """Same parameters as :class:`RcaModel`, read through the AR-ARCH recursion."""
    a: tuple
    sigma: tuple

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "sigma", tuple(float(v) for v in self.sigma))

    @property
    def q(self):
        return len(self.a)

    def to_rca(self):
        return RcaModel(self.a, self.sigma)


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    hard: bool = True


@dataclass
class ValidationReport:
    violations: list
    theorem_certified: bool

    @property
    def accepted(self):
        return not any(v.hard for v in self.violations)

    @property
    def codes(self):
        return [v.code for v in self.violations]

    def to_dict(self):
        return {"accepted": self.accepted, "theorem_certified": self.theorem_certified,
                "violations": [vars(v) for v in self.violations]}


def validate(model, tail_mode=False):
    """Check the admissibility rules; never raises.

    ``tail_mode`` additionally requires sigma_1 > 0, without which the
    coefficient law cannot produce moment blow-up and there is no tail index.
    """
    out = []
    if any(s < 0 for s in model.sigma):
        out.append(Violation("sigma_nonnegative", "all sigma_i must be >= 0"))
    if model.a[-1] ** 2 + model.sigma[-1] ** 2 <= 0:
        out.append(Violation("invertible", "a_q^2 + sigma_q^2 must be > 0 (companion matrix is singular)"))
    if tail_mode and not model.sigma[0] > 0:
        out.append(Violation("sigma1_positive", "tail analysis needs sigma_1 > 0"))
    for name, noise in (("eta", model.eta_noise), ("xi", model.xi_noise)):
        if abs(noise.mean) > 1e-12 or abs(noise.variance - 1.0) > 1e-12:
            out.append(Violation(f"{name}_moments",
                                 f"{name} noise must declare mean 0 and variance 1"))
        if not noise.is_gaussian:
            out.append(Violation(f"{name}_not_certified",
                                 f"{name} noise is not gaussian; tail theorem not certified",
                                 hard=False))
    return ValidationReport(out, theorem_certified=model.is_gaussian and model.sigma[0] > 0)


def moment_check(noise, n=10**6, rng=None):
    """Estimate mean and variance of ``noise`` and compare with 0 and 1.

    Returns ``(mean_z, var_z)``, the deviations in units of standard errors.
    """
    x = noise.sample(as_generator(rng), n)
    mean = x.mean()
    mean_z = mean / (x.std(ddof=1) / math.sqrt(n))
    sq = (x - mean) ** 2
    var_z = (sq.mean() - 1.0) / (sq.std(ddof=1) / math.sqrt(n))
    return float(mean_z), float(var_z)


@dataclass(frozen=True)
class CompanionMatrix:
    matrix: np.ndarray
    alpha: np.ndarray

    @property
    def det(self):
        q = len(self.alpha)
        return (-1) ** (q - 1) * self.alpha[-1]


def companion_from_alpha(alpha):
    alpha = np.asarray(alpha, dtype=float)
    q = alpha.shape[-1]
    m = np.zeros((q, q))
    m[0] = alpha
    m[1:, :-1] = np.eye(q - 1)
    return m


def companion_row_product(x, alpha):
    """Row vectors ``x`` times companion matrices with top rows ``alpha``.

    Both arguments broadcast over leading axes; ``(x'A)_j = x_1 alpha_j + x_{j+1}``
    with the last entry lacking the shift term.
    """
    out = x[..., :1] * alpha
    out[..., :-1] += x[..., 1:]
    return out


def draw_alphas(model, rng, size):
    """Top rows of ``size`` independent companion matrices, shape ``(size, q)``."""
    eta = model.eta_noise.sample(rng, (size, model.q))
    return model.a_array + model.sigma_array * eta


def draw_alphas_defensive(model, rng, size, scale=3.0, eta=None):
    """Coefficient draws from a widened proposal, with log likelihood ratios.

    Each draw comes from N(0, 1) or N(0, scale^2) with probability 1/2 in the
    coordinates with sigma_i > 0; the returned log-weights are
    ``log phi(eta) - log(mixture density)`` and never exceed ``log 2``. The
    wide component reaches the coefficient tail that dominates
    ``E|x'A|^lam`` for large lam. Non-gaussian coefficients are drawn
    directly with zero log-weights. ``eta`` may supply standard normal
    draws (e.g. quasi-random); rows in the second half are widened.
    """
    if not model.eta_noise.is_gaussian:
        return draw_alphas(model, rng, size), np.zeros(size)
    active = model.sigma_array > 0
    if eta is None:
        eta = rng.standard_normal((size, model.q))
        wide = rng.random(size) < 0.5
    else:
        eta = np.array(eta, dtype=float)
        size = len(eta)
        wide = np.arange(size) >= size // 2
    eta[np.ix_(wide, active)] *= scale
    k = int(active.sum())
    r2 = np.sum(eta[:, active] ** 2, axis=1)
    # log phi_k(eta) - log(0.5 phi_k(eta) + 0.5 phi_k(eta / scale) / scale^k)
    log_ratio = 0.5 * r2 * (1.0 - 1.0 / scale**2) - k * math.log(scale)
    logw = -np.logaddexp(math.log(0.5), math.log(0.5) + log_ratio)
    return model.a_array + model.sigma_array * eta, logw


def draw_coefficients(model, rng=None, eta=None):
    if eta is None:
        eta = model.eta_noise.sample(as_generator(rng), model.q)
    eta = np.asarray(eta, dtype=float).reshape(model.q)
    alpha = model.a_array + model.sigma_array * eta
    if alpha[-1] == 0.0:
        raise DegenerateDrawError("alpha_q = 0 drawn; companion matrix is singular")
    return CompanionMatrix(companion_from_alpha(alpha), alpha)


def to_ar_arch(model):
    if not model.is_gaussian:
        raise EquivalenceNotCertifiedError(
            "AR-ARCH equivalence holds only for gaussian eta and xi")
    return ArArchModel(model.a, model.sigma)


def _lagged(path, q):
    """Matrix of lags: row t holds (y_{t-1}, ..., y_{t-q}) for retained step t."""
    ext = np.concatenate([np.asarray(path.initial)[::-1], np.asarray(path.values)])
    n = len(path.values)
    return np.stack([ext[q - i: q - i + n] for i in range(1, q + 1)], axis=1)


def reconstruct_residuals(path, model):
    """Normalized innovations that drive the AR-ARCH form of a recorded RCA path."""
    if path.eta is None or path.xi is None:
        raise MissingDrawsError("path was simulated without record_draws")
    lags = _lagged(path, model.q)
    s = model.sigma_array
    num = path.xi + np.sum(s * lags * path.eta, axis=1)
    den = np.sqrt(1.0 + np.sum(s**2 * lags**2, axis=1))
    return num / den


_MODEL_KEYS = {"q", "a", "sigma", "eta_noise", "xi_noise"}
_NOISE_KEYS = {"family", "distribution", "params", "max_moment"}


def _noise_from_dict(d):
    if d is None:
        return GAUSSIAN
    if not isinstance(d, dict):
        raise InvalidModelError("noise spec must be an object")
    unknown = set(d) - _NOISE_KEYS
    if unknown:
        raise InvalidModelError(f"unknown noise keys: {sorted(unknown)}")
    family = d.get("family", "gaussian")
    if family == "gaussian":
        if set(d) - {"family"}:
            raise InvalidModelError("gaussian noise takes no further keys")
        return GAUSSIAN
    if family != "custom":
        raise InvalidModelError(f"unknown noise family {family!r}")
    name = d.get("distribution")
    if not name or not hasattr(stats, name):
        raise InvalidModelError(f"custom noise needs a scipy.stats distribution name, got {name!r}")
    mm = d.get("max_moment")
    try:
        return NoiseSpec.from_scipy(name, math.inf if mm is None else float(mm),
                                    **(d.get("params") or {}))
    except TypeError as exc:
        raise InvalidModelError(str(exc)) from None


def model_from_dict(d):
    if not isinstance(d, dict):
        raise InvalidModelError("model must be a JSON object")
    unknown = set(d) - _MODEL_KEYS
    if unknown:
        raise InvalidModelError(f"unknown model keys: {sorted(unknown)}")
    for key in ("q", "a", "sigma"):
        if key not in d:
            raise InvalidModelError(f"missing key {key!r}")
    q = d["q"]
    if not isinstance(q, int) or isinstance(q, bool) or q < 1:
        raise InvalidModelError("q must be a positive integer")
    try:
        a = [float(v) for v in d["a"]]
        sigma = [float(v) for v in d["sigma"]]
    except (TypeError, ValueError):
        raise InvalidModelError("a and sigma must be arrays of numbers") from None
    if len(a) != q or len(sigma) != q:
        raise InvalidModelError("a and sigma must have length q")
    return RcaModel(tuple(a), tuple(sigma), _noise_from_dict(d.get("eta_noise")),
                    _noise_from_dict(d.get("xi_noise")))


def model_to_dict(model):
    return {"q": model.q, "a": list(model.a), "sigma": list(model.sigma),
            "eta_noise": model.eta_noise.to_dict(), "xi_noise": model.xi_noise.to_dict()}


def load_model(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidModelError(f"model file is not valid JSON: {exc}") from None
    return model_from_dict(data)
