import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from oracles import lyapunov_fixed_point
from rcatail.errors import ExplosionError, InvalidModelError, NotStationaryError
from rcatail.model import NoiseSpec, RcaModel, draw_alphas, to_ar_arch
from rcatail.simulate import (PathSample, SimConfig, conditional_covariance, equivalence_test,
                              sample_stationary, simulate_ar_arch, simulate_path, simulate_paths,
                              truncation_depth)


def test_ar1_deterministic():
    p = simulate_path(RcaModel((0.5,), (0.0,)), SimConfig(n=3, burn_in=0),
                      eta=np.zeros((3, 1)), xi=[1.0, 0.0, 0.0])
    np.testing.assert_array_equal(p.values, [1.0, 0.5, 0.25])


def test_zero_noise_zero_path():
    m = RcaModel((0.4, 0.3), (0.5, 0.5))
    p = simulate_path(m, SimConfig(n=10, burn_in=5), eta=np.zeros((15, 2)), xi=np.zeros(15))
    np.testing.assert_array_equal(p.values, np.zeros(10))


def test_stationary_variance_q1():
    m = RcaModel((0.3,), (0.5,))
    p = simulate_path(m, SimConfig(n=10**6, burn_in=1000), rng=7)
    y = p.values
    # dependence inflates the error of the mean square; batch means give a fair se
    sq = (y**2).reshape(1000, 1000).mean(axis=1)
    se = sq.std(ddof=1) / math.sqrt(len(sq))
    assert abs(sq.mean() - 1 / (1 - 0.34)) < 3 * se


def test_ar_arch_reduces_to_ar1():
    p = simulate_ar_arch(RcaModel((0.5,), (0.0,)), SimConfig(n=3, burn_in=0), eps=[1.0, 0.0, 0.0])
    np.testing.assert_array_equal(p.values, [1.0, 0.5, 0.25])


def test_ar_arch_arithmetic():
    p = simulate_ar_arch(to_ar_arch(RcaModel((0.0,), (1.0,))), SimConfig(n=2, burn_in=0),
                         eps=[1.0, 1.0])
    assert p.values[0] == 1.0
    assert p.values[1] == pytest.approx(math.sqrt(2), abs=1e-15)


def test_ar_arch_matches_rca_marginal(ref_q2):
    rep = equivalence_test(ref_q2, 10**5, seed=3)
    assert rep.ks_pvalue > 0.01 and rep.residual_pvalue > 0.01 and rep.passed


def test_explosion_names_step():
    with pytest.raises(ExplosionError) as exc:
        simulate_path(RcaModel((1e200,), (0.0,)), SimConfig(n=10, burn_in=0),
                      xi=np.ones(10), eta=np.zeros((10, 1)))
    assert exc.value.step == 3


def test_injected_shape_checked():
    with pytest.raises(ValueError):
        simulate_path(RcaModel((0.5,), (0.1,)), SimConfig(n=3, burn_in=0), xi=[1.0, 2.0])


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(n=0)
    with pytest.raises(ValueError):
        SimConfig(n=5, burn_in=-1)


@given(st.integers(0, 2**32), st.integers(1, 3))
def test_replay_from_recorded_draws(seed, q):
    gen = np.random.default_rng(seed)
    m = RcaModel(tuple(gen.uniform(-0.4, 0.4, q)), tuple(gen.uniform(0, 0.4, q)))
    p = simulate_path(m, SimConfig(n=50, burn_in=20, record_draws=True), rng=seed)
    again = simulate_path(m, SimConfig(n=50, burn_in=0), eta=p.eta, xi=p.xi, initial=p.initial)
    np.testing.assert_array_equal(again.values, p.values)


def test_seeded_runs_bitwise_identical():
    m = RcaModel((0.2, 0.1), (0.3, 0.1))
    cfg = SimConfig(n=500, burn_in=100, seed=42, num_paths=3)
    a = simulate_paths(m, cfg)
    b = simulate_paths(m, cfg)
    for x, y in zip(a, b):
        assert x.values.tobytes() == y.values.tobytes()
    assert a[0].values.tobytes() != a[1].values.tobytes()


def test_burn_in_insensitivity():
    m = RcaModel((0.3, 0.1), (0.4, 0.2))
    ests = []
    for burn in (10**3, 10**4):
        v = simulate_path(m, SimConfig(n=2 * 10**5, burn_in=burn), rng=burn).values
        sq = (v**2).reshape(200, -1).mean(axis=1)
        ests.append((sq.mean(), sq.var(ddof=1) / len(sq)))
    (m1, v1), (m2, v2) = ests
    assert abs(m1 - m2) < 4 * math.sqrt(v1 + v2)


def test_csv_format():
    p = PathSample(np.array([1.5, -0.25]), np.zeros(1))
    buf = io.StringIO()
    p.to_csv(buf)
    assert buf.getvalue() == "index,value\n0,1.5\n1,-0.25\n"


def test_truncation_depth_rule():
    assert truncation_depth(0.34, 1e-6) == 26
    assert 0.34**26 / 0.66 < 1e-12 <= 0.34**25 / 0.66
    assert truncation_depth(0.0, 1e-6) == 1


@given(st.floats(0.01, 0.99), st.floats(1e-8, 0.1))
def test_truncation_depth_is_minimal(rho, tol):
    k = truncation_depth(rho, tol)
    assert rho**k / (1 - rho) < tol**2
    assert k == 1 or rho ** (k - 1) / (1 - rho) >= tol**2


def test_sample_stationary_ar1_variance():
    y = sample_stationary(RcaModel((0.5,), (0.0,)), rng=1, size=10**5)[:, 0]
    se = math.sqrt(2 * (4 / 3) ** 2 / len(y))
    assert abs(y.var() - 4 / 3) < 3 * se


def test_sample_stationary_single_vector():
    y = sample_stationary(RcaModel((0.2, 0.1), (0.3, 0.1)), rng=0)
    assert y.shape == (2,)


def test_sample_stationary_matches_long_path():
    m = RcaModel((0.3, -0.2), (0.4, 0.3))
    y = sample_stationary(m, rng=2, size=20_000)[:, 0]
    path = simulate_path(m, SimConfig(n=200_000, burn_in=1000), rng=5).values[::10]
    assert stats.ks_2samp(y, path).pvalue > 0.01


def test_sample_stationary_fixed_point_law():
    m = RcaModel((0.3, -0.2), (0.4, 0.3))
    y = sample_stationary(m, rng=3, size=50_000)
    gen = np.random.default_rng(9)
    alpha = draw_alphas(m, gen, len(y))
    image = np.einsum("pi,pi->p", alpha, y) + gen.standard_normal(len(y))
    fresh = sample_stationary(m, rng=4, size=50_000)[:, 0]
    assert stats.ks_2samp(image, fresh).pvalue > 0.01


def test_sample_stationary_requires_d0():
    with pytest.raises(NotStationaryError):
        sample_stationary(RcaModel((0.9,), (0.5,)), rng=0)


def test_sample_stationary_independent_of_threads():
    from rcatail._parallel import set_max_workers
    m = RcaModel((0.2, 0.1), (0.3, 0.1))
    a = sample_stationary(m, rng=8, size=30_000)
    set_max_workers(3)
    try:
        b = sample_stationary(m, rng=8, size=30_000)
    finally:
        set_max_workers(1)
    assert a.tobytes() == b.tobytes()


def test_conditional_covariance_ar1():
    r = conditional_covariance(RcaModel((0.5,), (0.0,)), rng=0, tol=1e-12)
    assert r.R[0, 0] == pytest.approx(4 / 3, abs=1e-10)


@pytest.mark.parametrize("a", [(0.5, 0.2), (0.3, -0.4), (-0.6, 0.1)])
def test_conditional_covariance_q2_deterministic(a):
    r = conditional_covariance(RcaModel(a, (0.0, 0.0)), rng=0, tol=1e-10)
    np.testing.assert_allclose(r.R, lyapunov_fixed_point(a), rtol=0, atol=1e-8)


def test_conditional_covariance_positive_definite(ref_q2):
    gen = np.random.default_rng(0)
    mins = [conditional_covariance(ref_q2, rng=gen).min_eigenvalue for _ in range(1000)]
    assert min(mins) > 0


def test_conditional_covariance_needs_gaussian():
    m = RcaModel((0.3,), (0.2,), xi_noise=NoiseSpec.from_scipy("laplace"))
    with pytest.raises(InvalidModelError):
        conditional_covariance(m, rng=0)
