"""Path simulation, stationary sampling and the conditional covariance.

Burn-in is what makes a zero start acceptable: the chain forgets its
initial state geometrically fast, so the default of 10**4 steps is far more
than enough for any model with a comfortable stationarity margin.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from .errors import ExplosionError, InvalidModelError
from .model import (ArArchModel, RcaModel, companion_row_product, draw_alphas,
                    reconstruct_residuals, to_ar_arch)
from .stationarity import require_stationary
from ._parallel import as_generator, as_seed_sequence, chunk_sizes, map_chunks

DEFAULT_BURN_IN = 10_000


@dataclass(frozen=True)
class SimConfig:
    n: int
    burn_in: int = DEFAULT_BURN_IN
    seed: int = 0
    num_paths: int = 1
    record_draws: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.num_paths < 1:
            raise ValueError("num_paths must be >= 1")


@dataclass
class PathSample:
    """Retained part of a simulated path.

    ``initial`` is the state ``(y_0, ..., y_{-q+1})`` right before the first
    retained value, i.e. after burn-in. Recorded draws cover the retained
    steps only: ``eta`` has shape ``(n, q)``, ``xi`` and ``eps`` shape ``(n,)``.
    """
    values: np.ndarray
    initial: np.ndarray
    eta: Optional[np.ndarray] = None
    xi: Optional[np.ndarray] = None
    eps: Optional[np.ndarray] = None
    kind: str = "rca"

    def to_csv(self, path_or_file):
        own = isinstance(path_or_file, str)
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "value"])
            for i, v in enumerate(self.values):
                w.writerow([i, repr(float(v))])
        finally:
            if own:
                fh.close()


def _initial(model, initial):
    if initial is None:
        return [0.0] * model.q
    init = [float(v) for v in np.asarray(initial, dtype=float).reshape(model.q)]
    return init


def _injected(arr, total, shape_tail=()):
    arr = np.asarray(arr, dtype=float)
    if arr.shape != (total, *shape_tail):
        raise ValueError(f"injected noise must have shape {(total, *shape_tail)}, got {arr.shape}")
    return arr


def simulate_path(model, cfg, rng=None, eta=None, xi=None, initial=None):
    """Run the random-coefficient recursion ``n + burn_in`` times.

    ``rng`` defaults to ``cfg.seed``. ``eta`` (shape ``(n + burn_in, q)``)
    and ``xi`` (length ``n + burn_in``) replace the random draws when given.
    """
    q, total = model.q, cfg.n + cfg.burn_in
    gen = as_generator(cfg.seed if rng is None else rng)
    eta = model.eta_noise.sample(gen, (total, q)) if eta is None else _injected(eta, total, (q,))
    xi = model.xi_noise.sample(gen, total) if xi is None else _injected(xi, total)
    alpha = (model.a_array + model.sigma_array * eta).tolist()
    xs = xi.tolist()
    state = _initial(model, initial)
    out = [0.0] * total
    start_state = state
    for t in range(total):
        if t == cfg.burn_in:
            start_state = state
        al = alpha[t]
        y = xs[t]
        for i in range(q):
            y += al[i] * state[i]
        if not math.isfinite(y):
            raise ExplosionError(t + 1)
        out[t] = y
        state = [y] + state[:-1]
    if cfg.burn_in == total:
        start_state = state
    b = cfg.burn_in
    return PathSample(np.array(out[b:]), np.array(start_state),
                      eta[b:].copy() if cfg.record_draws else None,
                      xi[b:].copy() if cfg.record_draws else None)


def simulate_ar_arch(model, cfg, rng=None, eps=None, initial=None):
    """Run ``x_n = sum a_i x_{n-i} + sqrt(1 + sum sigma_i^2 x_{n-i}^2) eps_n``."""
    if isinstance(model, RcaModel):
        model = to_ar_arch(model)
    q, total = model.q, cfg.n + cfg.burn_in
    gen = as_generator(cfg.seed if rng is None else rng)
    eps = gen.standard_normal(total) if eps is None else _injected(eps, total)
    a = list(model.a)
    s2 = [s * s for s in model.sigma]
    es = eps.tolist()
    state = _initial(model, initial)
    out = [0.0] * total
    start_state = state
    for t in range(total):
        if t == cfg.burn_in:
            start_state = state
        mean = 0.0
        var = 1.0
        for i in range(q):
            mean += a[i] * state[i]
            var += s2[i] * state[i] * state[i]
        x = mean + math.sqrt(var) * es[t]
        if not math.isfinite(x):
            raise ExplosionError(t + 1)
        out[t] = x
        state = [x] + state[:-1]
    if cfg.burn_in == total:
        start_state = state
    b = cfg.burn_in
    return PathSample(np.array(out[b:]), np.array(start_state),
                      eps=eps[b:].copy() if cfg.record_draws else None, kind="ar-arch")


def simulate_paths(model, cfg, ar_arch=False):
    """``cfg.num_paths`` independent paths from substreams of ``cfg.seed``."""
    seeds = as_seed_sequence(cfg.seed).spawn(cfg.num_paths)
    sim = simulate_ar_arch if ar_arch else simulate_path
    return [sim(model, cfg, rng=np.random.default_rng(s)) for s in seeds]


def truncation_depth(rho, tol):
    """Smallest K with ``rho**K / (1 - rho) < tol**2``."""
    if rho <= 0:
        return 1
    if not rho < 1:
        raise ValueError("truncation needs rho < 1")
    target = tol * tol * (1.0 - rho)
    k = max(1, math.ceil(math.log(target) / math.log(rho)))
    while rho**k >= target:
        k += 1
    while k > 1 and rho ** (k - 1) < target:
        k -= 1
    return k


def _stationary_chunk(model, depth, size, rng):
    # Y_K = zeta_1 + A_1 zeta_2 + ... + A_1...A_{K-1} zeta_K, evaluated by
    # Horner's rule from the innermost term outwards.
    q = model.q
    y = np.zeros((size, q))
    for _ in range(depth):
        alpha = draw_alphas(model, rng, size)
        xi = model.xi_noise.sample(rng, size)
        # A y: first entry alpha . y, the rest shift down.
        new = np.empty_like(y)
        new[:, 0] = np.einsum("pi,pi->p", alpha, y) + xi
        new[:, 1:] = y[:, :-1]
        y = new
    return y


def sample_stationary(model, tol=1e-6, rng=None, size=None):
    """Draws from the stationary law via the truncated series.

    The terms are accumulated from the innermost one outwards, so each
    draw is exactly the truncated series with an i.i.d. coefficient
    sequence. Returns a length-q state vector, or ``(size, q)`` draws.
    """
    report = require_stationary(model)
    depth = truncation_depth(report.spectral_radius, tol)
    n = 1 if size is None else int(size)
    parts = map_chunks(lambda s, g: _stationary_chunk(model, depth, s, g), chunk_sizes(n), rng)
    out = np.concatenate(parts, axis=0)
    return out[0] if size is None else out


@dataclass
class CovarianceRealization:
    R: np.ndarray
    min_eigenvalue: float
    depth: int


def conditional_covariance(model, rng=None, tol=1e-6, alphas=None):
    """One realization of ``R = B + sum_k Pi_{k-1} B Pi_{k-1}'`` given the coefficients."""
    if not model.is_gaussian:
        raise InvalidModelError("conditional covariance is defined for the gaussian model")
    report = require_stationary(model)
    depth = truncation_depth(report.spectral_radius, tol)
    q = model.q
    if alphas is None:
        alphas = draw_alphas(model, as_generator(rng), max(depth - 1, 0))
    # rows of Pi' are the columns of Pi; R = sum_k (Pi_{k-1} e_1)(Pi_{k-1} e_1)'.
    col = np.zeros(q)
    col[0] = 1.0
    # Pi_{k-1} e_1 = A_1 ... A_{k-1} e_1, built from the right.
    r = np.outer(col, col)
    prod = np.eye(q)
    for alpha in alphas[: depth - 1]:
        prod = companion_row_product(prod, alpha)
        v = prod[:, 0]
        r += np.outer(v, v)
    r = 0.5 * (r + r.T)
    return CovarianceRealization(r, float(np.linalg.eigvalsh(r)[0]), depth)


@dataclass
class EquivalenceReport:
    n: int
    thin: int
    ks_statistic: float
    ks_pvalue: float
    residual_statistic: float
    residual_pvalue: float
    level: float

    @property
    def passed(self):
        return self.ks_pvalue > self.level and self.residual_pvalue > self.level

    def to_dict(self):
        d = dict(vars(self))
        d["passed"] = self.passed
        return d


def equivalence_test(model, n, seed=0, burn_in=DEFAULT_BURN_IN, thin=10, level=0.01):
    """Compare RCA and AR-ARCH marginals and test the reconstructed residuals.

    Both paths are serially dependent, so the two-sample Kolmogorov-Smirnov
    test uses every ``thin``-th value; the residuals are i.i.d. and are
    tested in full against N(0, 1).
    """
    to_ar_arch(model)
    s_rca, s_arch = as_seed_sequence(seed).spawn(2)
    cfg = SimConfig(n=n, burn_in=burn_in, seed=seed, record_draws=True)
    rca = simulate_path(model, cfg, rng=np.random.default_rng(s_rca))
    arch = simulate_ar_arch(model, cfg, rng=np.random.default_rng(s_arch))
    ks = stats.ks_2samp(rca.values[::thin], arch.values[::thin])
    res = stats.kstest(reconstruct_residuals(rca, model), "norm")
    return EquivalenceReport(n, thin, float(ks.statistic), float(ks.pvalue),
                             float(res.statistic), float(res.pvalue), level)
