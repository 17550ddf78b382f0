"""Growth rate kappa(lam), eigenfunction h and eigenmeasure nu; the tail index.

Three routes to kappa:

* ``q1-exact``: quadrature of ``E|a + sigma z|^lam`` against the normal density;
* ``spectral``: Perron root of the transfer operator
  ``Q f(x) = E |x'A|^lam f(x'A / |x'A|)`` discretized on a sphere grid, with
  one batch of coefficient draws shared by all nodes and all lam;
* ``mc``: growth of ``E|A_1 ... A_n|^lam`` estimated by population resampling.

The tail index is the root of ``kappa(lam) = 1`` above 2.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special
from scipy.stats import qmc
from scipy.spatial import cKDTree

from .errors import InvalidModelError, NoConvergenceError, NoRootError, NumericalError
from .model import companion_row_product, draw_alphas, draw_alphas_defensive, validate
from .stationarity import require_stationary
from ._parallel import as_generator, as_seed_sequence
from ._products import population_growth

_SQRT_2PI = math.sqrt(2 * math.pi)

DEFAULT_GRID_SIZE = {1: 2, 2: 256, 3: 2048}
DEFAULT_DRAWS = {1: 2**18, 2: 2**15, 3: 2**11}
PROPOSAL_SCALE = 3.0


def coefficient_batch(model, draws, rng=None, proposal_scale=PROPOSAL_SCALE):
    """Coefficient draws and log-weights for discretizing the transfer operator.

    Gaussian coefficients use a scrambled Sobol net (rounded up to a power
    of two) pushed through the normal quantile function and the defensive
    widened proposal; other families fall back to plain draws with unit weights.
    """
    gen = as_generator(rng)
    if not model.eta_noise.is_gaussian:
        return draw_alphas(model, gen, draws), np.zeros(draws)
    m = max(1, math.ceil(math.log2(draws)))
    u = qmc.Sobol(model.q, scramble=True, seed=gen).random_base2(m)
    eta = special.ndtri(np.clip(u, 1e-16, 1 - 1e-16))
    return draw_alphas_defensive(model, gen, len(eta), proposal_scale, eta=eta)


class SphereGrid:
    """Nodes on the unit sphere with an interpolation rule.

    q = 1 uses the two-point sphere {+1, -1}; q = 2 a uniform angle grid
    with periodic linear interpolation; q = 3 a Fibonacci point set with
    inverse-distance weighting over the three nearest nodes.
    """

    def __init__(self, q, size=None):
        if q not in DEFAULT_GRID_SIZE:
            raise InvalidModelError("sphere grids exist for q <= 3; use the mc route beyond")
        self.q = q
        size = DEFAULT_GRID_SIZE[q] if size is None else int(size)
        if q == 1:
            self.nodes = np.array([[1.0], [-1.0]])
            self.rule = "two-point"
        elif q == 2:
            theta = 2 * np.pi * np.arange(size) / size
            self.nodes = np.column_stack([np.cos(theta), np.sin(theta)])
            self.rule = "angle-linear"
        else:
            i = np.arange(size) + 0.5
            z = 1 - 2 * i / size
            r = np.sqrt(1 - z * z)
            phi = np.pi * (3 - math.sqrt(5)) * i
            self.nodes = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
            self.rule = "idw-3"
            self._tree = cKDTree(self.nodes)
        self.weights = np.full(len(self.nodes), 1.0 / len(self.nodes))

    def __len__(self):
        return len(self.nodes)

    def stencil(self, y):
        """Node indices and interpolation weights for unit vectors ``y`` of shape (m, q)."""
        y = np.asarray(y, dtype=float).reshape(-1, self.q)
        if self.q == 1:
            return np.where(y[:, :1] > 0, 0, 1), np.ones((len(y), 1))
        if self.q == 2:
            n = len(self.nodes)
            pos = np.mod(np.arctan2(y[:, 1], y[:, 0]), 2 * np.pi) * (n / (2 * np.pi))
            j0 = np.floor(pos)
            t = pos - j0
            j0 = j0.astype(np.int64) % n
            return np.column_stack([j0, (j0 + 1) % n]), np.column_stack([1 - t, t])
        d, idx = self._tree.query(y, k=3)
        w = 1.0 / np.maximum(d, 1e-12)
        return idx, w / w.sum(axis=1, keepdims=True)

    def interpolate(self, f, y):
        f = np.asarray(f, dtype=float)
        idx, w = self.stencil(y)
        if self.q == 2:
            # f0 + t (f1 - f0) keeps constants exact
            return f[idx[:, 0]] + w[:, 1] * (f[idx[:, 1]] - f[idx[:, 0]])
        return np.sum(f[idx] * w, axis=1)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*[f"x_{i + 1}" for i in range(self.q)], "weight"])
            for node, wt in zip(self.nodes, self.weights):
                w.writerow([*[repr(float(c)) for c in node], repr(float(wt))])


def _images(grid, alphas):
    """Log-norms and directions of ``x'A`` for every node and draw."""
    y = companion_row_product(grid.nodes[:, None, :], alphas[None, :, :])
    norms = np.linalg.norm(y, axis=-1)
    return np.log(norms), y / norms[..., None]


def apply_Q(grid, model, lam, f, mc_draws=10_000, rng=None, alphas=None):
    """Monte Carlo ``Q_lam f`` at every node, one draw batch shared by all nodes."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValueError("f must be finite")
    if alphas is None:
        alphas = draw_alphas(model, as_generator(rng), mc_draws)
    logn, dirs = _images(grid, alphas)
    vals = grid.interpolate(f, dirs.reshape(-1, grid.q)).reshape(logn.shape)
    weight = np.ones_like(logn) if lam == 0 else np.exp(lam * logn)
    out = np.mean(weight * vals, axis=1)
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite value in Q_lam f")
    return out


class TransferOperator:
    """``Q_lam`` on a grid as a dense matrix, for any lam, from one draw batch.

    Per-draw images are cached when they fit in ``cache_limit`` node-draw
    pairs; larger batches are recomputed chunk by chunk on every call.
    """

    def __init__(self, grid, model, mc_draws=None, rng=None, alphas=None, log_weights=None,
                 chunk=2048, cache_limit=10_000_000):
        self.grid = grid
        if alphas is None:
            mc_draws = DEFAULT_DRAWS[grid.q] if mc_draws is None else mc_draws
            alphas, log_weights = coefficient_batch(model, mc_draws, rng)
        self.alphas = np.asarray(alphas, dtype=float)
        self.log_weights = np.zeros(len(alphas)) if log_weights is None else np.asarray(log_weights)
        self.mc_draws = len(alphas)
        self.chunk = chunk
        self._cache = None
        if len(grid) * self.mc_draws <= cache_limit:
            self._cache = [self._prepare(s) for s in range(0, self.mc_draws, chunk)]

    def _prepare(self, start):
        n = len(self.grid)
        stop = start + self.chunk
        logn, dirs = _images(self.grid, self.alphas[start:stop])
        idx, w = self.grid.stencil(dirs.reshape(-1, self.grid.q))
        rows = np.repeat(np.arange(n), logn.shape[1])
        flat = (rows[:, None] * n + idx).ravel().astype(np.int32)
        return logn, self.log_weights[start:stop], flat, w.reshape(logn.shape + (-1,)).astype(np.float32)

    def matrix(self, lam):
        n = len(self.grid)
        out = np.zeros(n * n)
        parts = self._cache if self._cache is not None else (
            self._prepare(s) for s in range(0, self.mc_draws, self.chunk))
        for logn, logr, flat, w in parts:
            scale = np.exp(lam * logn + logr)[..., None] * w
            out += np.bincount(flat, weights=scale.ravel(), minlength=n * n)
        return out.reshape(n, n) / self.mc_draws


@dataclass
class SpectralSolution:
    lam: float
    kappa: float
    h_values: np.ndarray
    nu_weights: np.ndarray
    residual: float
    iterations: int
    grid: SphereGrid = field(repr=False)
    kappa_nu: float = math.nan

    def h(self, x):
        return self.grid.interpolate(self.h_values, x)

    def to_dict(self):
        return {"lambda": self.lam, "kappa": self.kappa, "kappa_nu": self.kappa_nu,
                "residual": self.residual, "iterations": self.iterations,
                "grid": {"q": self.grid.q, "size": len(self.grid), "rule": self.grid.rule},
                "nodes": self.grid.nodes.tolist(),
                "h_values": self.h_values.tolist(), "nu_weights": self.nu_weights.tolist()}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _perron(Q, tol, max_iter):
    h = np.ones(len(Q))
    residual = math.inf
    for it in range(1, max_iter + 1):
        g = Q @ h
        kappa = g.max()
        h = g / kappa
        g = Q @ h
        kappa = g.max()
        residual = float(np.max(np.abs(g - kappa * h)) / kappa)
        if residual <= tol:
            return float(kappa), h, residual, it
    raise NoConvergenceError(residual, max_iter)


def power_iterate(grid, model, lam, tol=1e-10, max_iter=10_000, rng=None, mc_draws=None,
                  operator=None):
    """Right eigenfunction h (sup-normalized), Perron root kappa and left eigenmeasure nu."""
    if lam <= 0:
        raise ValueError("lam must be > 0")
    if operator is None:
        operator = TransferOperator(grid, model, mc_draws, rng)
    Q = operator.matrix(lam)
    kappa, h, residual, iters = _perron(Q, tol, max_iter)
    # adjoint iteration for the fixpoint measure
    nu = np.full(len(Q), 1.0 / len(Q))
    for _ in range(max_iter):
        new = nu @ Q
        new /= new.sum()
        done = np.max(np.abs(new - nu)) <= tol * new.max()
        nu = new
        if done:
            break
    kappa_nu = float(nu @ Q.sum(axis=1))
    return SpectralSolution(float(lam), kappa, h, nu, residual, iters, operator.grid, kappa_nu)


def kappa_q1(model, lam):
    """``E|a + sigma z|^lam`` for standard normal z, adaptive quadrature to 1e-10."""
    if model.q != 1:
        raise InvalidModelError("the closed-form growth rate needs q = 1")
    if not model.eta_noise.is_gaussian:
        raise InvalidModelError("the closed-form growth rate needs gaussian coefficients")
    a, s = model.a[0], model.sigma[0]
    if lam == 0:
        return 1.0
    if s == 0:
        return abs(a) ** lam

    def integrand(z):
        return abs(a + s * z) ** lam * math.exp(-0.5 * z * z) / _SQRT_2PI

    z0 = -a / s
    half = 40.0 + abs(z0)
    peak = math.sqrt(lam + 1.0)
    points = sorted({z0, z0 - peak, z0 + peak, -peak, peak})
    val, _ = integrate.quad(integrand, -half, half, points=points, epsabs=1e-10, epsrel=1e-13,
                            limit=500)
    return val


@dataclass
class KappaEstimate:
    kappa: float
    stderr: float
    kappa_n: float
    n: int
    paths: int

    @property
    def reliable(self):
        return self.stderr <= 0.2 * self.kappa

    def to_dict(self):
        d = dict(vars(self))
        d["reliable"] = self.reliable
        return d


def kappa_mc(model, lam, n=30, paths=100_000, rng=None, groups=16, burn=None,
             proposal_scale=PROPOSAL_SCALE):
    """Monte Carlo growth rate of ``E|A_1 ... A_n|^lam``.

    ``kappa_n`` is the finite-n quantity ``(E|A_1...A_n|^lam)^(1/n)``;
    ``kappa`` averages the per-step growth factors after ``burn`` steps
    (default n // 3 for q > 1) and so carries no ``c^(1/n)`` prefactor bias.
    Both are computed in the log domain with max-shifted averaging.
    Coefficients come from the defensive widened proposal (weights are
    likelihood-ratio corrected), except at lam = 0 where every weight is 1.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if burn is None:
        burn = 0 if model.q == 1 else n // 3
    scale = proposal_scale if lam > 0 else None
    log_mean, _ = population_growth(model, float(lam), n, paths, rng, groups, scale)
    log_k = log_mean[:, burn:].mean(axis=1)
    log_kn = (0.5 * lam * math.log(model.q) + log_mean.sum(axis=1)) / n
    mk = float(log_k.mean())
    kappa = math.exp(mk)
    se = float(kappa * log_k.std(ddof=1) / math.sqrt(groups)) if groups > 1 else math.nan
    return KappaEstimate(kappa, se, math.exp(float(log_kn.mean())), n, paths)


@dataclass
class KappaCurve:
    records: list

    def __post_init__(self):
        lams = [r["lambda"] for r in self.records]
        if any(b <= a for a, b in zip(lams, lams[1:])):
            raise ValueError("lambda values must be strictly increasing")

    def to_dict(self):
        return {"records": list(self.records)}


def _fresh(seed_seq):
    return np.random.SeedSequence(seed_seq.entropy, spawn_key=seed_seq.spawn_key)


class _KappaEvaluator:
    """kappa(lam) with common random numbers across lam, for one method."""

    def __init__(self, model, method, rng, mc_n, mc_paths, mc_max_paths, grid_size, mc_draws):
        self.model, self.method = model, method
        self.seed = as_seed_sequence(rng).spawn(1)[0]
        self.mc_n, self.mc_paths, self.mc_max_paths = mc_n, mc_paths, mc_max_paths
        self.operator = None
        if method == "spectral":
            grid = SphereGrid(model.q, grid_size)
            self.operator = TransferOperator(grid, model, mc_draws, np.random.default_rng(_fresh(self.seed)))
        self.records = {}

    def __call__(self, lam, decide=True):
        """Return (kappa, stderr); for mc, grow the population until the sign of
        kappa - 1 is resolved at three standard errors or the cap is hit."""
        if self.method == "q1-exact":
            k, se = kappa_q1(self.model, lam), 0.0
        elif self.method == "spectral":
            Q = self.operator.matrix(lam)
            k, _, _, _ = _perron(Q, 1e-11, 100_000)
            se = 0.0
        else:
            paths = self.mc_paths
            while True:
                est = kappa_mc(self.model, lam, self.mc_n, paths, _fresh(self.seed))
                k, se = est.kappa, est.stderr
                if not decide or se < abs(k - 1) / 3 or paths * 2 > self.mc_max_paths:
                    break
                paths *= 2
        self.records[float(lam)] = (float(k), float(se))
        return k, se

    def resolved(self, k, se):
        return se < abs(k - 1) / 3 or se == 0.0

    def curve(self):
        return KappaCurve([{"lambda": lam, "kappa": k, "method": self.method, "stderr": se}
                           for lam, (k, se) in sorted(self.records.items())])


@dataclass
class LambdaSolution:
    lam: float
    method: str
    kappa: float
    stderr: float
    bracket: tuple
    evaluations: int
    resolved: bool
    curve: KappaCurve = field(repr=False)

    def to_dict(self):
        return {"lambda": self.lam, "method": self.method, "kappa": self.kappa,
                "kappa_stderr": self.stderr, "bracket": list(self.bracket),
                "evaluations": self.evaluations, "resolved": self.resolved,
                "curve": self.curve.records}


METHODS = ("q1-exact", "spectral", "mc")


def solve_lambda(model, method="spectral", tol=1e-9, rng=None, lambda_max=64.0, max_iter=200,
                 mc_n=30, mc_paths=100_000, mc_max_paths=None, grid_size=None, mc_draws=None):
    """Tail index: root of ``kappa(lam) = 1`` found by bracketing and bisection.

    The bracket starts at lam = 2, where kappa is below one for any
    stationary model, and doubles its upper end until kappa exceeds one.
    Bisection stops at ``|kappa - 1| < tol`` or bracket half-width ``< tol``.
    Monte Carlo evaluations must resolve the sign of ``kappa - 1`` at three
    standard errors; when even ``mc_max_paths`` cannot, the midpoint of the
    current bracket is returned with ``resolved=False``.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if method == "q1-exact" and model.q != 1:
        raise InvalidModelError("q1-exact needs q = 1")
    report = validate(model, tail_mode=True)
    if not report.accepted:
        raise InvalidModelError("; ".join(v.message for v in report.violations if v.hard))
    require_stationary(model)
    if mc_max_paths is None:
        mc_max_paths = 16 * mc_paths
    ev = _KappaEvaluator(model, method, rng, mc_n, mc_paths, mc_max_paths, grid_size, mc_draws)

    def done(lam, k, se, resolved, lo, hi):
        return LambdaSolution(float(lam), method, float(k), float(se), (float(lo), float(hi)),
                              len(ev.records), resolved, ev.curve())

    lo, hi = 2.0, 4.0
    k_lo, se_lo = ev(lo)
    if k_lo >= 1:
        raise NoRootError(f"kappa(2) = {k_lo:.6g} >= 1 although the model is stationary")
    while True:
        k_hi, se_hi = ev(hi)
        if k_hi > 1:
            break
        if not ev.resolved(k_hi, se_hi):
            # the root is within noise of hi
            return done(hi, k_hi, se_hi, False, lo, hi)
        if hi >= lambda_max:
            raise NoRootError(f"kappa stays below 1 up to lambda = {lambda_max}")
        lo, hi = hi, min(2 * hi, lambda_max)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        k, se = ev(mid)
        if abs(k - 1) < tol or 0.5 * (hi - lo) < tol:
            return done(mid, k, se, True, lo, hi)
        if not ev.resolved(k, se):
            return done(mid, k, se, False, lo, hi)
        if k < 1:
            lo = mid
        else:
            hi = mid
    return done(mid, k, se, True, lo, hi)


def kappa_curve(model, lambdas, method="spectral", rng=None, **kw):
    """kappa on a grid of lam values, all evaluated with common random numbers."""
    ev = _KappaEvaluator(model, method, rng, kw.get("mc_n", 30), kw.get("mc_paths", 100_000),
                         kw.get("mc_paths", 100_000), kw.get("grid_size"), kw.get("mc_draws"))
    for lam in sorted(lambdas):
        ev(lam, decide=False)
    return ev.curve()
