import math

import numpy as np
import pytest

from conftest import engine_at
from psqueue.asymptotics import (
    b_asymptote,
    btilde_asymptote,
    compare_to_asymptote,
    decay_diagnostics,
    delta_asymptote,
    log_b_asymptote,
    log_btilde_asymptote,
    log_delta_asymptote,
    moment_asymptote,
)
from psqueue.busy_period import BusyPeriodModel, b_pmf, btilde_pmf
from psqueue.distributions import delta_pmf
from psqueue.errors import DiagnosticsError, ParameterError
from psqueue.model import Pmf, validate_params
from psqueue.spectral import build_coefficient_table


@pytest.mark.parametrize("rho", [0.1, 0.3, 0.6])
@pytest.mark.parametrize("j", [1, 7, 30])
def test_log_forms_match_direct_evaluation(rho, j):
    p = validate_params(rho)
    direct = (
        4.0 / (1.0 - rho)
        * math.exp(2.0 * (1.0 + rho) / (1.0 - rho))
        * math.sqrt(8.0 / 3.0 * (math.pi / 2.0) ** (5.0 / 3.0))
        * j ** (-5.0 / 6.0)
        * math.exp(-3.0 * (math.pi / 2.0) ** (2.0 / 3.0) * j ** (1.0 / 3.0))
        * p.support_bound ** (2 * j)
    )
    assert delta_asymptote(p, j) == pytest.approx(direct, rel=1e-12)
    direct_b = (1 + rho) / (rho * (1 - rho) * math.sqrt(math.pi)) * j**-1.5 * p.z0**-j
    assert b_asymptote(p, j) == pytest.approx(direct_b, rel=1e-12)
    direct_bt = 4 * (1 + rho) / ((1 - rho) ** 3 * math.sqrt(math.pi)) * j**-2.5 * p.z0**-j
    assert btilde_asymptote(p, j) == pytest.approx(direct_bt, rel=1e-12)


def test_heavy_load_prefactor_stays_finite():
    p = validate_params(0.999)
    assert math.isfinite(log_delta_asymptote(p, 10))
    assert log_delta_asymptote(p, 10) > 700.0


def test_asymptotes_share_the_exponential_factor():
    p = validate_params(0.5)
    j = 20
    assert log_b_asymptote(p, j + 1) - log_b_asymptote(p, j) + 1.5 * math.log((j + 1) / j) == pytest.approx(
        p.decay_rate, abs=1e-12
    )
    assert log_btilde_asymptote(p, j + 1) - log_btilde_asymptote(p, j) + 2.5 * math.log((j + 1) / j) == pytest.approx(
        p.decay_rate, abs=1e-12
    )


def test_index_domain():
    p = validate_params(0.5)
    with pytest.raises(ParameterError):
        delta_asymptote(p, 0)
    with pytest.raises(ParameterError):
        moment_asymptote(p, 7)


def test_moment_band():
    p = validate_params(0.5)
    mu = build_coefficient_table(40, p).moments_float(80)
    for n in range(40, 81, 2):
        assert 0.5 <= mu[n] / moment_asymptote(p, n) <= 2.0


@pytest.mark.parametrize(("rho", "lo", "hi"), [(0.2, 40, 80), (0.5, 150, 300)])
def test_b_band(rho, lo, hi):
    p = validate_params(rho)
    b = b_pmf(BusyPeriodModel(p), hi)
    for j in range(lo, hi + 1):
        assert 0.9 <= b[j] / b_asymptote(p, j) <= 1.1


def test_light_load_delta_band():
    p = validate_params(0.2)
    delta = delta_pmf(engine_at(0.2), 40)
    for report in compare_to_asymptote(delta, log_delta_asymptote, p, range(20, 41)):
        assert 0.5 <= report.ratio <= 1.5


def test_corrected_slopes_approach_the_decay_rate():
    p = validate_params(0.5)
    delta = delta_pmf(engine_at(0.5, epsilon=1e-16, j_max=80), 80)
    btilde = btilde_pmf(BusyPeriodModel(p), 80)
    for pmf, log_asymptote in ((delta, log_delta_asymptote), (btilde, log_btilde_asymptote)):
        reports = compare_to_asymptote(pmf, log_asymptote, p, range(60, 81))
        for r in reports[:-1]:
            assert r.log_gap_per_index < p.decay_rate
            assert r.corrected_log_slope == pytest.approx(p.decay_rate, rel=0.15)
        assert reports[-1].log_gap_per_index is None


def test_delta_tail_sits_below_btilde():
    p = validate_params(0.5)
    delta = delta_pmf(engine_at(0.5), 40)
    btilde = btilde_pmf(BusyPeriodModel(p), 40)
    diagnostics = decay_diagnostics(delta, btilde, p, (15, 40))
    assert diagnostics.ratio_decreasing
    assert np.all(diagnostics.ratios < 1.0)
    assert diagnostics.indices == tuple(range(15, 41))


def test_diagnostics_refuse_bad_windows():
    p = validate_params(0.5)
    pmf = Pmf.from_array([0.5, 0.25, 0.125, 0.0625])
    with pytest.raises(DiagnosticsError):
        decay_diagnostics(pmf, pmf, p, (1, 2))
    with pytest.raises(DiagnosticsError):
        compare_to_asymptote(pmf, log_delta_asymptote, p, [2, 9])
    with pytest.raises(DiagnosticsError):
        compare_to_asymptote(Pmf.from_array([0.5, 0.0, 0.5]), log_delta_asymptote, p, [1, 2])
    with pytest.raises(DiagnosticsError):
        compare_to_asymptote(pmf, log_delta_asymptote, p, [])
