import numpy as np
import pytest

from conftest import chain_at, engine_at
from psqueue.distributions import (
    SojournReading,
    alpha_pmf_given_n,
    build_engine,
    delta_pmf,
    delta_pmf_departure_form,
    delta_pmf_given_n,
    delta_pmf_quadrature,
    normalization_integral,
    joint_given_n,
    joint_table_given_n,
    kappa_gen,
    kappa_given_n,
    kappa_mean,
    kappa_pmf_given_n,
    nu_given_n,
    nu_pmf_given_n,
    sojourn_tail,
    stationary_nu_pmf,
    stationary_sojourn_mean,
    stationary_sojourn_tail,
)
from psqueue.errors import CapacityError, ParameterError
from psqueue.model import TruncationConfig, validate_params
from psqueue.oracle import oracle_alpha_delta, oracle_joint, oracle_kappa, oracle_nu, oracle_sojourn_tail


def test_engine_sizes_its_table(engine):
    assert engine.table.n_max >= 40 + engine.outer_index
    assert engine.achieved_epsilon < engine.trunc.epsilon
    assert isinstance(engine.sojourn_reading, SojournReading)


@pytest.mark.parametrize("n", [0, 3])
def test_nu_matches_the_chain(n):
    exact = oracle_nu(chain_at(0.5), n)
    spectral = nu_pmf_given_n(engine_at(0.5), n, 20)
    np.testing.assert_allclose(spectral.probs, exact.probs[:21], atol=1e-8)
    assert nu_given_n(engine_at(0.5), n, 4) == pytest.approx(exact[4], abs=1e-8)


def test_kappa_matches_the_chain(rho):
    exact = oracle_kappa(chain_at(rho), 2)
    spectral = kappa_pmf_given_n(engine_at(rho), 2, 30)
    np.testing.assert_allclose(spectral.probs, exact.probs[:30], atol=1e-7)
    assert kappa_given_n(engine_at(rho), 0, 1) == pytest.approx(1.0 / (1.0 + rho), abs=1e-10)


def test_joint_law_by_hand():
    e = engine_at(0.5)
    assert joint_given_n(e, 0, 2, 1) == pytest.approx(1.0 / 9.0, abs=1e-9)
    assert abs(joint_given_n(e, 0, 2, 0)) < 1e-10
    assert abs(joint_given_n(e, 0, 3, 1)) < 1e-10


def test_joint_law_matches_the_chain(rho):
    exact = oracle_joint(chain_at(rho), 4, k_max=30).probs
    spectral = joint_table_given_n(engine_at(rho), 4, 30, 40)
    rows = exact.shape[0]
    np.testing.assert_allclose(spectral[:rows], exact[:, :41], atol=1e-7)


def test_joint_marginalizes_to_kappa(rho):
    e = engine_at(rho)
    n, k_max = 2, 12
    joint = joint_table_given_n(e, n, k_max, n + k_max)
    np.testing.assert_allclose(joint.sum(axis=1), kappa_pmf_given_n(e, n, k_max).probs, atol=1e-9)


@pytest.mark.parametrize("n", [0, 3, 10])
@pytest.mark.parametrize(("rho", "k_max"), [(0.2, 80), (0.8, 400)])
def test_joint_marginalizes_to_nu(rho, k_max, n):
    # Σ_{k <= K} P(κ = k, ν = m) falls short of P(ν = m) by P(κ > K, ν = m), at most the κ tail
    e = engine_at(rho)
    m_max = 15
    joint = joint_table_given_n(e, n, k_max, m_max)
    gap = nu_pmf_given_n(e, n, m_max).probs - joint.sum(axis=0)
    tail = max(1.0 - float(kappa_pmf_given_n(e, n, k_max).probs.sum()), 0.0)
    assert np.all(np.abs(gap) <= tail + 1e-10)
    assert gap.sum() <= tail + 1e-10
    if rho == 0.2:
        assert tail < 1e-12
        assert np.abs(gap).max() < 1e-10


def test_stationary_nu_is_geometric(engine, rho):
    nu = stationary_nu_pmf(engine, 40)
    np.testing.assert_allclose(nu.probs, (1 - rho) * rho ** np.arange(41), atol=1e-8)


@pytest.mark.parametrize("n", [0, 1, 7, 20])
def test_absorption_identity(engine, n):
    assert normalization_integral(engine, n) == pytest.approx(1.0, abs=1e-8)


def test_kappa_generating_function(engine, rho):
    assert kappa_gen(engine, 1.0) == pytest.approx(1.0, abs=1e-8)
    assert kappa_gen(engine, 0.0) == 0.0
    assert kappa_mean(engine) == pytest.approx((1 + rho) / (1 - rho), rel=1e-6)
    h = 1e-4
    slope = (kappa_gen(engine, 1.0) - kappa_gen(engine, 1.0 - h)) / h
    assert slope == pytest.approx((1 + rho) / (1 - rho), rel=5e-2)
    with pytest.raises(ParameterError):
        kappa_gen(engine, 1.5)


def test_delta_matches_the_chain(engine, chain, rho):
    _, exact = oracle_alpha_delta(chain, 25, TruncationConfig(epsilon=1e-10))
    spectral = delta_pmf(engine, 25)
    np.testing.assert_allclose(spectral.probs, exact.probs, atol=1e-7)


def test_delta_paths_agree():
    e = engine_at(0.5)
    moment = delta_pmf(e, 25)
    np.testing.assert_allclose(delta_pmf_quadrature(e, 25).probs, moment.probs, atol=1e-8)
    np.testing.assert_allclose(delta_pmf_departure_form(e, 25).probs, moment.probs, atol=1e-8)


@pytest.mark.parametrize("n", [0, 2, 5])
def test_conditional_arrivals_and_departures(n):
    e, c = engine_at(0.5), chain_at(0.5)
    exact = oracle_joint(c, n).probs
    k = np.arange(1, exact.shape[0] + 1)[:, None]
    m = np.arange(exact.shape[1])[None, :]
    twice_alpha = k + m - n - 1
    expected = np.array([exact[twice_alpha == 2 * j].sum() for j in range(16)])
    np.testing.assert_allclose(alpha_pmf_given_n(e, n, 15).probs, expected, atol=1e-8)
    twice_delta = k - m + n - 1
    expected = np.array([exact[twice_delta == 2 * j].sum() for j in range(16)])
    np.testing.assert_allclose(delta_pmf_given_n(e, n, 15).probs, expected, atol=1e-8)


def test_light_load_tail_decreases():
    p = delta_pmf(engine_at(0.2), 40)
    assert all(p[j + 1] < p[j] for j in range(5, 40))


def test_delta_needs_a_large_enough_table():
    small = build_engine(validate_params(0.5), TruncationConfig(epsilon=1e-4), j_max=5)
    with pytest.raises(CapacityError):
        delta_pmf(small, 30)


def test_negative_indices():
    e = engine_at(0.5)
    with pytest.raises(ParameterError):
        nu_given_n(e, -1, 0)
    with pytest.raises(ParameterError):
        kappa_given_n(e, 0, 0)
    with pytest.raises(ParameterError):
        delta_pmf(e, -1)
    with pytest.raises(ParameterError):
        sojourn_tail(e, 0, -1.0)


@pytest.mark.parametrize("n", [0, 1, 4, 10])
def test_sojourn_tail_starts_at_one(n):
    assert sojourn_tail(engine_at(0.5), n, 0.0) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("n", [0, 3])
def test_sojourn_tail_matches_the_chain(n):
    y = [0.5, 1.0, 2.0, 5.0]
    spectral = sojourn_tail(engine_at(0.5), n, y)
    exact = oracle_sojourn_tail(chain_at(0.5), n, y)
    assert np.all(np.diff(spectral) < 0.0)
    np.testing.assert_allclose(spectral, exact, atol=1e-6)


def test_stationary_sojourn(engine, rho):
    assert stationary_sojourn_mean(engine) == pytest.approx(1.0 / (1.0 - rho), abs=1e-4)
    assert stationary_sojourn_tail(engine, 0.0) == pytest.approx(1.0, abs=1e-6)
    tails = stationary_sojourn_tail(engine, np.linspace(0.0, 10.0, 6))
    assert np.all(np.diff(tails) < 0.0)
