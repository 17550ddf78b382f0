"""Moments of norms of random matrix products by population resampling.

Plain averaging of ``|A_1 ... A_n|^lam`` over independent paths is useless
beyond a handful of steps: the summands are log-normal-like and the sample
mean is carried by paths that a feasible sample never contains. Instead a
population of normalized partial products is propagated one factor at a
time, each member weighted by its norm increment ``(|M A| / |M|)^lam`` and
then resampled in proportion to that weight. The product over steps of the
mean increments is an unbiased estimate of ``E|A_1 ... A_n|^lam`` (the usual
sequential Monte Carlo normalizing-constant estimate); its per-step factors
converge to the growth rate kappa(lam).
"""
import math

import numpy as np

from .errors import DegenerateStepError
from .model import companion_row_product, draw_alphas, draw_alphas_defensive
from ._parallel import map_chunks


def systematic_resample(weights, rng):
    n = len(weights)
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    points = (rng.random() + np.arange(n)) / n
    return np.minimum(np.searchsorted(cdf, points, side="right"), n - 1)


def _run_population(model, lam, n_steps, size, rng, proposal_scale):
    q = model.q
    mats = np.broadcast_to(np.eye(q) / math.sqrt(q), (size, q, q)).copy()
    log_mean = np.empty(n_steps)
    mean = np.empty(n_steps)
    for k in range(n_steps):
        if proposal_scale is None:
            alpha, logr = draw_alphas(model, rng, size), 0.0
        else:
            alpha, logr = draw_alphas_defensive(model, rng, size, proposal_scale)
        mats = companion_row_product(mats, alpha[:, None, :])
        sq = np.einsum("pij,pij->p", mats, mats)
        norms = np.sqrt(sq)
        if np.any(norms <= 0):
            raise DegenerateStepError("matrix product collapsed to zero")
        logw = lam * np.log(norms) + logr
        top = logw.max()
        w = np.exp(logw - top)
        log_mean[k] = top + math.log(w.mean())
        mean[k] = sq.mean() if lam == 2 and proposal_scale is None else math.exp(log_mean[k])
        mats /= norms[:, None, None]
        if k + 1 < n_steps and q > 1:
            mats = mats[systematic_resample(w, rng)]
    return log_mean, mean


def population_growth(model, lam, n_steps, paths, rng, groups=16, proposal_scale=None):
    """Per-group, per-step mean weight increments.

    Returns ``(log_mean, mean)``, each of shape ``(groups, n_steps)``. Groups
    are independent populations of ``paths // groups`` members with their
    own substreams, so between-group spread yields standard errors.
    ``proposal_scale`` switches to the defensive widened coefficient
    proposal, with likelihood ratios folded into the weights.
    """
    size = max(paths // groups, 1)
    res = map_chunks(lambda s, g: _run_population(model, lam, n_steps, s, g, proposal_scale),
                     [size] * groups, rng)
    log_mean = np.array([r[0] for r in res])
    mean = np.array([r[1] for r in res])
    return log_mean, mean
