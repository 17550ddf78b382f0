import csv
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import beta_q1_closed, log_abs_gaussian_mean, normal_log_abs_mean
from rcatail.errors import DegenerateStepError, InconsistencyError
from rcatail.model import CompanionMatrix, RcaModel, companion_from_alpha, draw_alphas
from rcatail.spectral import kappa_q1, solve_lambda
from rcatail.sphere_chain import (SphereWalkState, TiltSpec, beta_q1, chain_trace, estimate_beta,
                                  estimate_lyapunov, step, tilted_expectation, write_chain_csv)

unit2 = st.floats(0, 2 * math.pi).map(lambda t: np.array([math.cos(t), math.sin(t)]))
alpha2 = st.lists(st.floats(-3, 3), min_size=2, max_size=2).filter(lambda a: abs(a[1]) > 1e-3)


def test_step_permutation():
    cm = CompanionMatrix(companion_from_alpha([0.0, 1.0]), np.array([0.0, 1.0]))
    s, u = step(SphereWalkState.start([1.0, 0.0]), cm)
    np.testing.assert_array_equal(s.x, [0.0, 1.0])
    assert u == 0.0 and s.n == 1


def test_step_q1():
    s, u = step(SphereWalkState.start([1.0]), companion_from_alpha([-2.0]))
    assert s.x[0] == -1.0
    assert u == pytest.approx(math.log(2), abs=1e-15)
    assert s.v == u


@given(unit2, alpha2, st.floats(0.01, 100))
def test_step_scaling(x, alpha, c):
    m = companion_from_alpha(alpha)
    s1, u1 = step(SphereWalkState(x), m)
    s2, u2 = step(SphereWalkState(x), c * m)
    np.testing.assert_allclose(s2.x, s1.x, atol=1e-14)
    assert u2 == pytest.approx(u1 + math.log(c), abs=1e-12)


@given(unit2, alpha2)
def test_step_projective(x, alpha):
    m = companion_from_alpha(alpha)
    s1, u1 = step(SphereWalkState(x), m)
    s2, u2 = step(SphereWalkState(-x), m)
    np.testing.assert_array_equal(s2.x, -s1.x)
    assert u1 == u2


@given(st.integers(0, 2**32))
def test_state_stays_on_sphere(seed):
    m = RcaModel((0.3, 0.2, -0.1), (0.6, 0.3, 0.2))
    xs, _, _ = chain_trace(m, 100, rng=seed)
    assert np.max(np.abs(np.linalg.norm(xs, axis=1) - 1)) <= 1e-12


@given(st.integers(0, 2**32), st.integers(1, 50))
def test_v_matches_explicit_product(seed, n):
    m = RcaModel((0.4, -0.3), (0.7, 0.5))
    gen = np.random.default_rng(seed)
    alphas = draw_alphas(m, gen, n)
    x0 = np.array([0.6, 0.8])
    s = SphereWalkState.start(x0)
    prod = np.eye(2)
    for a in alphas:
        s, _ = step(s, companion_from_alpha(a))
        prod = prod @ companion_from_alpha(a)
    assert s.v == pytest.approx(math.log(np.linalg.norm(x0 @ prod)), abs=1e-8)


def test_degenerate_step():
    with pytest.raises(DegenerateStepError):
        step(SphereWalkState.start([1.0, 0.0]), np.zeros((2, 2)))


def test_chain_csv(tmp_path):
    xs, us, vs = chain_trace(RcaModel((0.2, 0.1), (0.3, 0.1)), 5, rng=0)
    f = tmp_path / "chain.csv"
    write_chain_csv(str(f), xs, us, vs)
    rows = list(csv.reader(open(f)))
    assert rows[0] == ["n", "x_1", "x_2", "u", "v"]
    assert len(rows) == 7
    assert float(rows[-1][-1]) == vs[-1]


def test_lyapunov_deterministic():
    est = estimate_lyapunov(RcaModel((0.5,), (0.0,)), n=200, paths=64, rng=0)
    assert est.gamma == math.log(0.5)


def test_lyapunov_q1_against_quadrature():
    est = estimate_lyapunov(RcaModel((0.0,), (0.5,)), n=1000, paths=512, rng=1)
    expect = math.log(0.5) + normal_log_abs_mean()
    assert expect == pytest.approx(log_abs_gaussian_mean(0.0, 0.5), abs=1e-12)
    assert abs(est.gamma - expect) < 3 * est.stderr


def test_lyapunov_q1_nonzero_mean():
    est = estimate_lyapunov(RcaModel((0.7,), (0.4,)), n=1000, paths=512, rng=2)
    assert abs(est.gamma - log_abs_gaussian_mean(0.7, 0.4)) < 3 * est.stderr


def test_lyapunov_q2_negative(ref_q2):
    est = estimate_lyapunov(ref_q2, n=500, paths=256, rng=3)
    assert est.gamma + 3 * est.stderr < 0


def test_lyapunov_start_scale_invariant():
    m = RcaModel((0.3, 0.2), (0.5, 0.2))
    a = estimate_lyapunov(m, n=100, paths=64, rng=4, x0=[1.0, 2.0])
    b = estimate_lyapunov(m, n=100, paths=64, rng=4, x0=[3.0, 6.0])
    assert a.gamma == pytest.approx(b.gamma, abs=1e-13)


@pytest.mark.filterwarnings("ignore:tilted estimate unreliable")
def test_tilted_constant_functional():
    m = RcaModel((0.2, 0.1), (0.3, 0.1))
    est = tilted_expectation(m, TiltSpec(3.0), lambda xs, us: np.ones(len(xs)), 10, 2000, rng=0)
    assert est.value == pytest.approx(1.0, abs=1e-14)


def test_tilted_q1_first_increment():
    m = RcaModel((0.3,), (0.6,))
    lam = 3.0
    est = tilted_expectation(m, TiltSpec(lam), lambda xs, us: us[:, 0], 1, 400_000, rng=1)
    expect = beta_q1_closed(0.3, 0.6, lam) / kappa_q1(m, lam)
    assert abs(est.value - expect) < 4 * est.stderr


@pytest.mark.filterwarnings("ignore:tilted estimate unreliable")
def test_tilted_weight_mean_growth():
    # for q = 1 the un-normalized weight mean is kappa(lam)^n: flat at the
    # root, geometric decay below it
    m = RcaModel((0.0,), (3 ** -0.25,))
    one = lambda xs, us: np.ones(len(xs))
    at_root = [tilted_expectation(m, TiltSpec(4.0), one, n, 400_000, rng=n).log_mean_weight
               for n in (1, 2)]
    assert max(abs(v) for v in at_root) < 0.1
    below = [tilted_expectation(m, TiltSpec(2.0), one, n, 400_000, rng=n).log_mean_weight
             for n in (1, 2, 3)]
    np.testing.assert_allclose(below, [n * math.log(kappa_q1(m, 2.0)) for n in (1, 2, 3)],
                               atol=0.05)


def test_tilted_warns_when_degenerate():
    m = RcaModel((0.0,), (1.5,))
    with pytest.warns(RuntimeWarning, match="unreliable"):
        tilted_expectation(m, TiltSpec(30.0), lambda xs, us: us[:, -1], 20, 500, rng=0)


def test_beta_q1_forced_root(forced4):
    b = beta_q1(forced4, 4.0)
    assert b == pytest.approx(beta_q1_closed(0.0, 3 ** -0.25, 4.0), rel=1e-10)
    assert b > 0


def test_beta_quadrature_matches_closed_form(ref_q1):
    sol = solve_lambda(ref_q1, "q1-exact")
    est = estimate_beta(ref_q1, sol)
    assert est.method == "quadrature"
    assert est.beta == pytest.approx(beta_q1_closed(0.3, 0.6, sol.lam), rel=1e-9)


def test_beta_tilted_matches_quadrature(forced4):
    sol = solve_lambda(forced4, "q1-exact")
    quad = estimate_beta(forced4, sol)
    tilt = estimate_beta(forced4, sol, method="tilted", n=200, paths=20_000, rng=0)
    assert tilt.beta == pytest.approx(quad.beta, rel=0.02)


def test_beta_rejects_non_root():
    m = RcaModel((0.0,), (0.5,))
    sol = type("S", (), {"lam": 1.0, "kappa": kappa_q1(m, 1.0)})()
    with pytest.raises(ValueError, match="not a tail index"):
        estimate_beta(m, sol)


def test_beta_rejects_negative_drift():
    # a mislabelled solution: at lam = 1 this model's drift is negative
    m = RcaModel((0.0,), (0.5,))
    sol = type("S", (), {"lam": 1.0, "kappa": 1.0})()
    with pytest.raises(InconsistencyError):
        estimate_beta(m, sol)


def test_beta_q2_positive(ref_q2):
    sol = solve_lambda(ref_q2, "spectral", rng=0)
    est = estimate_beta(ref_q2, sol, n=150, paths=8000, burn=30, rng=1)
    assert est.method == "tilted"
    assert est.beta > 3 * est.stderr
