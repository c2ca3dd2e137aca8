import math

import numpy as np
import pytest
from scipy.integrate import quad

from psqueue.errors import ParameterError, SingularityError
from psqueue.model import validate_params
from psqueue.spectral import (
    build_quadrature,
    eval_pollaczek,
    eval_Q,
    gen_P,
    gen_Q,
    gen_Q_ode_residual,
    phi,
    pollaczek_matrix,
    pollaczek_weight,
)


def test_first_scaled_polynomials():
    p = validate_params(0.5)
    assert eval_Q(1, 0.2, p) == pytest.approx(3.0 * 0.2)
    assert eval_Q(2, 0.2, p) == pytest.approx(9.0 * 0.04 - 1.0)


def test_scaled_family_is_rescaled_pollaczek(rho):
    p = validate_params(rho)
    theta = np.linspace(0.1, 3.0, 11)
    x = p.support_bound * np.cos(theta)
    for n in range(8):
        expected = p.sqrt_rho**-n * eval_pollaczek(n, np.cos(theta))
        np.testing.assert_allclose(eval_Q(n, x, p), expected, rtol=1e-12, atol=1e-12)


def test_negative_degree():
    with pytest.raises(ParameterError):
        eval_Q(-1, 0.0, validate_params(0.5))
    with pytest.raises(ParameterError):
        eval_pollaczek(-1, 0.0)


def test_matrix_rows_match_single_evaluations():
    u = np.linspace(-0.9, 0.9, 7)
    rows = pollaczek_matrix(6, u, a=2.0, b=1.0)
    for n in range(7):
        np.testing.assert_allclose(rows[n], eval_pollaczek(n, u, a=2.0, b=1.0), rtol=1e-13)


@pytest.mark.parametrize(("a", "b"), [(1.0, 0.0), (2.0, 1.0)])
def test_pollaczek_orthogonality(a, b):
    def inner(n, m):
        f = lambda u: eval_pollaczek(n, u, a, b) * eval_pollaczek(m, u, a, b) * pollaczek_weight(u, a, b)
        return quad(f, -1.0, 1.0, limit=200, epsabs=1e-12)[0]

    for n in range(4):
        assert inner(n, n) == pytest.approx(1.0 / (2 * n + 1 + a), rel=1e-7)
        for m in range(n):
            assert abs(inner(n, m)) < 1e-8


@pytest.mark.parametrize(("a", "b"), [(1.0, 0.0), (2.0, 1.0)])
def test_pollaczek_normalization_up_to_degree_twenty(a, b):
    m = build_quadrature(validate_params(0.5))
    u = m.cos_theta
    du = m.raw_weights * np.sin(m.theta)
    rows = pollaczek_matrix(20, u, a, b)
    gram = (rows * (np.asarray(pollaczek_weight(u, a, b)) * du)) @ rows.T
    norms = 2.0 * np.arange(21) + 1.0 + a
    np.testing.assert_allclose(gram * np.sqrt(norms[:, None] * norms[None, :]), np.eye(21), atol=1e-10)


def test_pollaczek_weight_domain():
    assert pollaczek_weight(1.0) == 0.0
    assert pollaczek_weight(-1.0) == 0.0
    with pytest.raises(ParameterError):
        pollaczek_weight(0.0, a=1.0, b=1.0)
    with pytest.raises(ParameterError):
        pollaczek_weight(1.5)


def test_phi_is_the_branch_of_the_argument(rho):
    p = validate_params(rho)
    theta = np.linspace(0.0, np.pi, 21)
    z = 1.0 - p.sqrt_rho * np.exp(1j * theta)
    np.testing.assert_allclose(np.angle(z), -np.asarray(phi(theta, p)), atol=1e-14)


def test_phi_at_quarter_turn():
    assert phi(math.pi / 2, validate_params(0.5)) == pytest.approx(math.atan(math.sqrt(0.5)))
    with pytest.raises(ParameterError):
        phi(-0.1, validate_params(0.5))


def test_gen_P_endpoint_limits():
    assert gen_P(0.0, 0.5) == pytest.approx(2.0 * math.e)
    assert gen_P(math.pi, 0.5) == pytest.approx(math.exp(-1.0 / 3.0) / 1.5)
    assert gen_P(1e-9, 0.5) == pytest.approx(gen_P(0.0, 0.5), rel=1e-6)


@pytest.mark.parametrize("theta", [0.3, 1.0, math.pi / 2, 2.5])
@pytest.mark.parametrize("z", [-0.5, 0.25, 0.5])
def test_gen_P_matches_series(theta, z):
    series = math.fsum(eval_pollaczek(n, math.cos(theta)) * z**n for n in range(120))
    assert gen_P(theta, z) == pytest.approx(series, rel=1e-10)


@pytest.mark.parametrize("theta", [math.pi / 6, math.pi / 2, 5 * math.pi / 6])
def test_gen_P_series_converges_near_the_radius(theta):
    z = 0.9
    terms = pollaczek_matrix(799, np.array([math.cos(theta)]))[:, 0] * z ** np.arange(800)
    errors = np.abs(np.cumsum(terms) - gen_P(theta, z))
    # envelopes over doubling windows, each longer than one oscillation period
    envelopes = [errors[lo : 2 * lo].max() for lo in (25, 50, 100, 200, 400)]
    assert all(later < earlier for earlier, later in zip(envelopes, envelopes[1:]))
    assert envelopes[-1] < 1e-12 * max(1.0, abs(float(gen_P(theta, z))))


def test_gen_P_singularities():
    with pytest.raises(SingularityError):
        gen_P(1.0, 1.0)
    with pytest.raises(SingularityError):
        gen_P(0.0, 1.0)
    with pytest.raises(SingularityError):
        gen_P(math.pi, -1.0)


def test_gen_Q_matches_partial_sum():
    p = validate_params(0.5)
    series = math.fsum(eval_Q(n, 0.3, p) * 0.5**n for n in range(160))
    assert abs(gen_Q(0.3, 0.5, p) - series) <= 1e-8


def test_gen_Q_convergence_radius():
    p = validate_params(0.5)
    with pytest.raises(SingularityError):
        gen_Q(0.3, 0.75, p)
    with pytest.raises(ParameterError):
        gen_Q(0.95, 0.1, p)


@pytest.mark.parametrize(("x", "z"), [(0.3, 0.5), (-0.6, 0.2), (0.0, -0.4)])
def test_gen_Q_solves_its_differential_equation(x, z):
    assert abs(gen_Q_ode_residual(x, z, validate_params(0.5))) < 1e-6
