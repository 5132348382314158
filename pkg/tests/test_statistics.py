import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from onchip_hom.source import (PairStatistics, mean_pair_number, mu_from_squeezing, multipair_factor,
                               pair_number_distribution, squeezing_from_mu)


def test_vacuum():
    p = pair_number_distribution(0.0, 10)
    assert p[0] == 1.0 and not p[1:].any()


def test_single_pair_probability():
    assert pair_number_distribution(0.1, 5)[1] == pytest.approx(2 * 0.05 / 1.05**3, abs=1e-15)
    assert pair_number_distribution(0.1, 5)[1] == pytest.approx(0.0863838, abs=1e-6)


def test_closed_form_terms():
    mu = 0.7
    p = pair_number_distribution(mu, 8)
    for n in range(9):
        assert p[n] == pytest.approx((1 + n) * (mu / 2) ** n / (1 + mu / 2) ** (n + 2), rel=1e-12)


def _tail(mu, n_max):
    # sum_{n > N} (n + 1) q^n (1 - q)^2 = q^(N+1) (N + 2 - (N + 1) q), q = (mu/2) / (1 + mu/2)
    q = (mu / 2) / (1 + mu / 2)
    return q ** (n_max + 1) * (n_max + 2 - (n_max + 1) * q)


@settings(max_examples=60, deadline=None)
@given(mu=st.floats(0.0, 5.0))
def test_truncated_sum_matches_analytic_tail(mu):
    assert pair_number_distribution(mu, 50).sum() == pytest.approx(1.0 - _tail(mu, 50), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(mu=st.floats(0.0, 5.0))
def test_normalisation(mu):
    assert pair_number_distribution(mu, 200).sum() == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("mu", [0.0, 0.01, 0.1, 1.0, 2.0])
def test_normalisation_at_fifty(mu):
    assert pair_number_distribution(mu, 50).sum() == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(mu=st.floats(0.0, 2.0))
def test_mean_is_mu(mu):
    p = pair_number_distribution(mu, 400)
    assert np.sum(np.arange(401) * p) == pytest.approx(mu, abs=1e-9)


def test_argument_errors():
    with pytest.raises(ValueError):
        pair_number_distribution(-0.1, 5)
    with pytest.raises(ValueError):
        pair_number_distribution(0.1, -1)
    with pytest.raises(ValueError):
        mean_pair_number(-1.0, PairStatistics(power_calibration=1e-3))
    with pytest.raises(ValueError):
        PairStatistics(mu=-1.0)


@settings(max_examples=40, deadline=None)
@given(chi=st.floats(0.0, 2.0))
def test_squeezing_round_trip(chi):
    mu = mu_from_squeezing(chi)
    assert mu == pytest.approx(2 * math.sinh(chi) ** 2)
    assert squeezing_from_mu(mu) == pytest.approx(chi, abs=1e-12)


def test_linear_power_mapping():
    stats = PairStatistics(power_calibration=2.4e-4)
    assert mean_pair_number(0.0, stats) == 0.0
    assert mean_pair_number(3.5, stats) == pytest.approx(mean_pair_number(10.5, stats) / 3, rel=1e-14)
    s = stats.at_power(10.5)
    assert s.chi_t == pytest.approx(squeezing_from_mu(s.mu))
    assert s.pair_rate == pytest.approx(s.mu / 256e-12)


@settings(max_examples=40, deadline=None)
@given(mu=st.floats(1e-6, 1.0))
def test_multipair_factor_thermal_closed_form(mu):
    # thermal law: <n(n-1)> = 6 (mu/2)^2, so the factor is 1 / (1 + 3 mu)
    assert multipair_factor(mu, 400) == pytest.approx(1 / (1 + 3 * mu), rel=1e-9)


def test_multipair_factor_limits():
    assert multipair_factor(0.0) == 1.0
    powers = [multipair_factor(m) for m in (1e-4, 1e-3, 1e-2)]
    assert powers == sorted(powers, reverse=True)
