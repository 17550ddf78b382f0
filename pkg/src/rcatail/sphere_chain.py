"""The projective chain ``x_n = x' A_1...A_n / |x' A_1...A_n|`` and its log-norm.

Tilting weights paths by ``|x' Pi_n|^lam h(x_n) / h(x_0)``; expectations
under the tilted law are computed by self-normalized importance sampling
from the untilted chain.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import DegenerateStepError, InconsistencyError, InvalidModelError
from .model import CompanionMatrix, companion_from_alpha, companion_row_product, draw_alphas
from ._parallel import as_generator, chunk_sizes, map_chunks
from ._products import systematic_resample
from .spectral import SphereGrid, power_iterate

MIN_STEP_NORM = 1e-300
_SQRT_2PI = math.sqrt(2 * math.pi)


@dataclass(frozen=True)
class SphereWalkState:
    x: np.ndarray
    v: float = 0.0
    n: int = 0
    # Kahan compensation for v
    carry: float = 0.0

    @classmethod
    def start(cls, x):
        x = np.asarray(x, dtype=float).ravel()
        return cls(x / np.linalg.norm(x))


def step(state, A):
    """One transition ``x' -> x'A/|x'A|``, ``v -> v + log|x'A|``."""
    m = A.matrix if isinstance(A, CompanionMatrix) else np.asarray(A, dtype=float)
    y = np.asarray(state.x, dtype=float) @ m
    norm = float(np.linalg.norm(y))
    if norm < MIN_STEP_NORM:
        raise DegenerateStepError("|x'A| underflowed; the direction is lost")
    u = math.log(norm)
    yk = u - state.carry
    v = state.v + yk
    carry = (v - state.v) - yk
    return SphereWalkState(y / norm, v, state.n + 1, carry), u


def _uniform_directions(rng, size, q):
    if q == 1:
        return np.where(rng.random((size, 1)) < 0.5, -1.0, 1.0)
    z = rng.standard_normal((size, q))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _advance(x, alpha):
    y = companion_row_product(x, alpha)
    norms = np.linalg.norm(y, axis=-1)
    if np.any(norms < MIN_STEP_NORM):
        raise DegenerateStepError("|x'A| underflowed; the direction is lost")
    return y / norms[..., None], np.log(norms)


def chain_trace(model, n, rng=None, x0=None):
    """A single chain ``(x_k, u_k, v_k)``, ``k = 0..n``; ``u_0 = v_0 = 0``."""
    gen = as_generator(rng)
    q = model.q
    state = SphereWalkState.start(_uniform_directions(gen, 1, q)[0] if x0 is None else x0)
    xs, us, vs = [state.x], [0.0], [0.0]
    alphas = draw_alphas(model, gen, n)
    for alpha in alphas:
        state, u = step(state, companion_from_alpha(alpha))
        xs.append(state.x)
        us.append(u)
        vs.append(state.v)
    return np.array(xs), np.array(us), np.array(vs)


def write_chain_csv(path, xs, us, vs):
    q = xs.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", *[f"x_{i + 1}" for i in range(q)], "u", "v"])
        for k in range(len(us)):
            w.writerow([k, *[repr(float(c)) for c in xs[k]], repr(float(us[k])), repr(float(vs[k]))])


@dataclass
class LyapunovEstimate:
    gamma: float
    stderr: float
    n: int
    paths: int

    def to_dict(self):
        return dict(vars(self))


def _start(rng, size, q, x0):
    if x0 is None:
        return _uniform_directions(rng, size, q)
    x0 = np.asarray(x0, dtype=float).ravel()
    return np.broadcast_to(x0 / np.linalg.norm(x0), (size, q)).copy()


def _lyapunov_chunk(model, n, size, rng, x0=None):
    x = _start(rng, size, model.q, x0)
    mean_u = np.zeros(size)
    for k in range(1, n + 1):
        x, u = _advance(x, draw_alphas(model, rng, size))
        # running mean of u equals v_k / k and is exact for constant u
        mean_u += (u - mean_u) / k
    return mean_u


def estimate_lyapunov(model, n=1000, paths=256, rng=None, x0=None):
    """Top Lyapunov exponent as the path average of ``v_n / n``.

    Paths start from uniform random directions unless ``x0`` is given; only
    its direction matters.
    """
    per_path = np.concatenate(map_chunks(lambda s, g: _lyapunov_chunk(model, n, s, g, x0),
                                         chunk_sizes(paths), rng))
    base = per_path[0]
    gamma = base + float(np.mean(per_path - base))
    se = float(per_path.std(ddof=1) / math.sqrt(paths)) if paths > 1 else math.nan
    return LyapunovEstimate(float(gamma), se, n, paths)


@dataclass
class TiltSpec:
    """Exponent ``lam`` and eigenfunction ``h`` defining the tilted chain.

    ``h`` maps an ``(m, q)`` array of unit vectors to ``m`` positive values;
    ``None`` means the constant function, which is exact when ``q = 1``.
    """
    lam: float
    h: Optional[Callable] = None
    kappa: float = 1.0

    @classmethod
    def from_solution(cls, solution):
        grid = getattr(solution, "grid", None)
        h = solution.h if grid is not None and grid.q > 1 else None
        return cls(solution.lam, h, solution.kappa)

    def log_h(self, x):
        if self.h is None:
            return np.zeros(x.shape[:-1])
        vals = np.asarray(self.h(x.reshape(-1, x.shape[-1]))).reshape(x.shape[:-1])
        if np.any(vals <= 0):
            raise InconsistencyError("eigenfunction must be positive")
        return np.log(vals)


@dataclass
class TiltedEstimate:
    value: float
    stderr: float
    ess: float
    paths: int
    log_mean_weight: float

    @property
    def reliable(self):
        return self.ess >= 0.01 * self.paths


def _tilted_chunk(model, tilt, functional, n, x0, size, rng):
    q = model.q
    x = _start(rng, size, q, x0)
    xs = np.empty((size, n + 1, q))
    us = np.empty((size, n))
    xs[:, 0] = x
    for k in range(n):
        x, u = _advance(x, draw_alphas(model, rng, size))
        xs[:, k + 1] = x
        us[:, k] = u
    logw = tilt.lam * us.sum(axis=1) + tilt.log_h(xs[:, -1]) - tilt.log_h(xs[:, 0])
    return logw, np.asarray(functional(xs, us), dtype=float)


def tilted_expectation(model, tilt, functional, n, paths, rng=None, x0=None):
    """Self-normalized estimate of the tilted expectation of ``functional``.

    ``functional(xs, us)`` receives directions of shape ``(paths, n+1, q)``
    and log-norm increments of shape ``(paths, n)`` and returns one value
    per path. ``log_mean_weight`` is the log of the un-normalized mean
    weight, which stays bounded in n exactly when ``kappa(lam) = 1``.
    """
    res = map_chunks(lambda s, g: _tilted_chunk(model, tilt, functional, n, x0, s, g),
                     chunk_sizes(paths), rng)
    logw = np.concatenate([r[0] for r in res])
    f = np.concatenate([r[1] for r in res])
    top = logw.max()
    w = np.exp(logw - top)
    sw = w.sum()
    wn = w / sw
    value = float(np.dot(wn, f))
    se = float(np.sqrt(np.sum(wn**2 * (f - value) ** 2)))
    ess = float(1.0 / np.sum(wn**2))
    out = TiltedEstimate(value, se, ess, paths, float(top + math.log(sw / paths)))
    if not out.reliable:
        warnings.warn(f"tilted estimate unreliable: effective sample size {ess:.1f} "
                      f"of {paths} paths", RuntimeWarning, stacklevel=2)
    return out


@dataclass
class BetaEstimate:
    beta: float
    stderr: float
    method: str
    lam: float

    def to_dict(self):
        return dict(vars(self))


def beta_q1(model, lam):
    """``E|alpha|^lam log|alpha|`` for q = 1 by quadrature against the gaussian density."""
    if model.q != 1 or not model.eta_noise.is_gaussian:
        raise InvalidModelError("closed-form drift needs q = 1 and gaussian coefficients")
    a, s = model.a[0], model.sigma[0]
    if s == 0:
        return abs(a) ** lam * math.log(abs(a))

    def integrand(z):
        al = abs(a + s * z)
        return al**lam * math.log(al) * math.exp(-0.5 * z * z) / _SQRT_2PI if al > 0 else 0.0

    z0 = -a / s
    left = integrate.quad(integrand, -np.inf, z0, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
    right = integrate.quad(integrand, z0, np.inf, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
    return left + right


def _beta_chunk(model, tilt, n, burn, size, rng):
    """Weighted sums of u over the occupancy steps, as ``(log_scale, num, den)``.

    Per-step sums are shifted by their largest log-weight; the shifts are
    returned so steps can be pooled on a common scale. Pooling numerator and
    denominator over all steps (a ratio of sums) avoids the per-step
    ratio bias of averaging self-normalized means.
    """
    x = _uniform_directions(rng, size, model.q)
    lh = tilt.log_h(x)
    tops = np.empty(n - burn)
    nums = np.empty(n - burn)
    dens = np.empty(n - burn)
    for k in range(n):
        y, u = _advance(x, draw_alphas(model, rng, size))
        lh_new = tilt.log_h(y)
        logw = tilt.lam * u + lh_new - lh
        top = logw.max()
        w = np.exp(logw - top)
        if k >= burn:
            tops[k - burn], nums[k - burn], dens[k - burn] = top, np.dot(w, u), w.sum()
        idx = systematic_resample(w, rng)
        x, lh = y[idx], lh_new[idx]
    scale = np.exp(tops - tops.max())
    return float(np.dot(scale, nums) / np.dot(scale, dens))


def estimate_beta(model, solution, method=None, n=400, paths=20_000, burn=50, rng=None,
                  groups=8, kappa_tol=1e-3):
    """Drift of the log-norm under the tilted chain.

    For q = 1 the default is quadrature of ``E|alpha|^lam log|alpha|``.
    ``method="tilted"`` (the only route for q >= 2) runs a resampled
    population of the projective chain; after ``burn`` steps the population
    occupies the tilted invariant law and ``u`` is averaged under the
    one-step tilting weight, pooled over steps.

    ``solution`` is a solved tail index (``lam`` and ``kappa``); for q >= 2
    without eigenfunction values the eigenfunction is computed on the
    default grid. ``kappa`` must be within ``kappa_tol`` of one.
    """
    if method is None:
        method = "quadrature" if model.q == 1 else "tilted"
    lam = solution.lam
    if abs(solution.kappa - 1.0) > kappa_tol:
        raise ValueError(f"kappa({lam:.6g}) = {solution.kappa:.6g} is not 1: not a tail index")
    if method == "quadrature":
        beta, se = beta_q1(model, lam), 0.0
    elif method == "tilted":
        if model.q > 1 and getattr(solution, "h_values", None) is None:
            solution = power_iterate(SphereGrid(model.q), model, lam, tol=1e-9, rng=rng)
        tilt = TiltSpec.from_solution(solution)
        size = max(paths // groups, 1)
        per_group = np.array(map_chunks(lambda s, g: _beta_chunk(model, tilt, n, burn, s, g),
                                        [size] * groups, rng))
        beta = float(per_group.mean())
        se = float(per_group.std(ddof=1) / math.sqrt(groups)) if groups > 1 else math.nan
    else:
        raise ValueError(f"unknown method {method!r}")
    if beta <= 0 and (se == 0 or beta + 3 * se < 0):
        raise InconsistencyError(f"tilted drift beta = {beta:.4g} is not positive")
    return BetaEstimate(float(beta), float(se), method, float(lam))
