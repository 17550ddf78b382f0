import csv
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import pareto_quantile_sample
from rcatail.errors import NotStationaryError
from rcatail.model import NoiseSpec, RcaModel
from rcatail.simulate import sample_stationary
from rcatail.tailindex import (TailEstimate, estimate_psi, hill, hill_table, loglog_slope,
                               tail_plateau, verify_power_law, write_hill_table)

SIGMA_FOUR = 3 ** -0.25
positive_samples = st.lists(st.floats(1e-3, 1e6), min_size=20, max_size=200, unique=True)


def test_hill_hand_arithmetic():
    est = hill([math.e**3, math.e**2, math.e], 2)
    assert est.lambda_hat == pytest.approx(2 / 3, rel=1e-14)
    assert est.stderr == pytest.approx(est.lambda_hat / math.sqrt(2))
    assert est.method == "hill" and est.k == 2


def test_hill_pareto_quantiles():
    est = hill(pareto_quantile_sample(10**4, 3.0), 100)
    assert est.lambda_hat == pytest.approx(3.0, rel=0.10)


@given(positive_samples, st.integers(-20, 20))
def test_hill_exact_power_of_two_scaling(x, e):
    k = len(x) // 3
    assert hill(np.ldexp(x, e), k).lambda_hat == hill(x, k).lambda_hat


@given(positive_samples, st.floats(1e-3, 1e3))
def test_hill_scaling_any_constant(x, c):
    k = len(x) // 3
    assert hill(np.multiply(x, c), k).lambda_hat == pytest.approx(hill(x, k).lambda_hat, rel=1e-12)


@given(positive_samples, st.randoms(use_true_random=False))
def test_hill_permutation_invariant(x, rnd):
    y = list(x)
    rnd.shuffle(y)
    k = len(x) // 2
    assert hill(y, k).lambda_hat == hill(x, k).lambda_hat


def test_hill_ignores_nonpositive_values():
    x = pareto_quantile_sample(1000, 2.0)
    assert hill(np.concatenate([x, -x, [0.0]]), 50).lambda_hat == hill(x, 50).lambda_hat


@pytest.mark.parametrize("x,k", [([1.0, 2.0], 2), ([1.0, 2.0, 3.0], 0), ([-1.0, 0.0, 1.0], 1)])
def test_hill_insufficient_data(x, k):
    with pytest.raises(ValueError):
        hill(x, k)


def test_hill_ties():
    with pytest.raises(ValueError):
        hill([5.0, 5.0, 5.0, 1.0], 2)


def test_tail_estimate_positive():
    with pytest.raises(ValueError):
        TailEstimate(0.0, 0.1, "hill", 3)


def test_hill_table_csv(tmp_path):
    x = pareto_quantile_sample(10**4, 3.0)
    table = hill_table(x)
    assert [e.k for e in table] == [50, 100, 200, 500]
    f = tmp_path / "hill.csv"
    write_hill_table(str(f), table)
    rows = list(csv.reader(open(f)))
    assert rows[0] == ["k", "lambda_hat", "stderr"] and len(rows) == 5


def test_loglog_pareto():
    x = pareto_quantile_sample(10**5, 2.5)
    assert loglog_slope(x).lambda_hat == pytest.approx(2.5, rel=0.02)
    assert loglog_slope(x, 0.9, 0.999).lambda_hat == pytest.approx(2.5, rel=0.02)


def test_plateau_flat_for_pareto():
    x = pareto_quantile_sample(10**5, 2.0)
    _, vals, cv = tail_plateau(x, 2.0, 1.5)
    assert cv < 0.02


def test_power_law_forced_root(forced4):
    rep = verify_power_law(forced4, n_draws=10**6, rng=0)
    assert rep.pooled and rep.lambda_star == pytest.approx(4.0, abs=1e-6)
    assert rep.hill.lambda_hat == pytest.approx(4.0, rel=0.15)
    assert rep.loglog.lambda_hat == pytest.approx(4.0, rel=0.15)
    assert rep.agrees and rep.plateau_cv < 0.3
    assert len(rep.hill_table) == 4


@pytest.mark.parametrize("a,s", [(0.5, 0.6), (0.0, 0.8), (0.2, 0.7)])
def test_power_law_q1_models_agree(a, s):
    rep = verify_power_law(RcaModel((a,), (s,)), n_draws=10**6, rng=1)
    assert rep.pooled == (a == 0.0)
    assert rep.agrees, rep.disagreements


def test_power_law_hill_bias_shrinks_with_k(ref_q1):
    # at lambda* near 5.5 the Hill estimate sits below lambda* at 10**6 draws
    # and climbs towards it as fewer order statistics are used
    rep = verify_power_law(ref_q1, n_draws=10**6, rng=1)
    assert not rep.pooled
    table = [e.lambda_hat for e in rep.hill_table]
    assert table == sorted(table, reverse=True)
    assert table[-1] < rep.hill.lambda_hat < rep.lambda_star
    assert rep.hill.lambda_hat == pytest.approx(rep.lambda_star, rel=0.2)


def test_power_law_direction_symmetry(forced4):
    # symmetric noise: upper and lower tails of Y have the same law
    y = sample_stationary(forced4, rng=2, size=10**6)[:, 0]
    up, down = hill(y, 5000), hill(-y, 5000)
    assert abs(up.lambda_hat - down.lambda_hat) < 3 * math.hypot(up.stderr, down.stderr)


def test_power_law_second_moment_stable(ref_q1):
    # lambda* > 2: the sample second moment settles as n doubles
    y = sample_stationary(ref_q1, rng=3, size=4 * 10**5)[:, 0]
    m = [np.mean(y[:n] ** 2) for n in (10**5, 2 * 10**5, 4 * 10**5)]
    assert max(m) / min(m) < 1.1
    assert m[-1] == pytest.approx(1 / (1 - 0.45), rel=0.1)


def test_power_law_warns_for_custom_noise():
    m = RcaModel((0.0,), (0.6,), xi_noise=NoiseSpec.from_scipy("t", df=10))
    with pytest.warns(RuntimeWarning, match="not certified"):
        verify_power_law(m, n_draws=20_000, rng=0, solver_method="q1-exact")


def test_power_law_nonstationary():
    with pytest.raises(NotStationaryError):
        verify_power_law(RcaModel((0.9,), (0.5,)), n_draws=1000)


def test_psi_zero_first_coordinate(ref_q2):
    est = estimate_psi(ref_q2, (0.0, 1.0), np.linspace(0, 3, 7), mc_draws=50_000, rng=0)
    assert np.all(est.psi == 0.0) and np.all(est.stderr == 0.0)


def test_psi_nonnegative_with_witness(ref_q2):
    u = np.linspace(0.0, 4.0, 21)
    for x in [(1.0, 0.0), (1.0, 1.0), (-1.0, 0.5)]:
        est = estimate_psi(ref_q2, x, u, mc_draws=200_000, rng=1)
        assert np.all(est.psi >= -3 * est.stderr)
        assert np.any(est.psi > 3 * est.stderr)


def test_psi_q1_direction_symmetry(forced4):
    u = np.linspace(0.0, 3.0, 7)
    a = estimate_psi(forced4, (1.0,), u, mc_draws=200_000, rng=2)
    b = estimate_psi(forced4, (-1.0,), u, mc_draws=200_000, rng=3)
    assert np.all(np.abs(a.psi - b.psi) < 4 * np.hypot(a.stderr, b.stderr) + 1e-12)


def test_psi_grid_must_increase(ref_q2):
    with pytest.raises(ValueError):
        estimate_psi(ref_q2, (1.0, 0.0), [1.0, 0.5], mc_draws=100)
