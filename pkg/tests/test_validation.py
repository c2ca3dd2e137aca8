import pytest

from psqueue.errors import ParameterError
from psqueue.validation import CHECKS, SuiteConfig, run_suite

QUICK = SuiteConfig(quick=True, reps=5000)


def test_registered_checks():
    assert list(CHECKS) == [
        "oracle",
        "delta",
        "closed_forms",
        "means",
        "busy_period",
        "orthogonality",
        "asymptotics",
        "monte_carlo",
    ]


def test_unknown_check():
    with pytest.raises(ParameterError, match="unknown checks"):
        run_suite([0.5], QUICK, ["bogus"])


@pytest.mark.parametrize("name", ["oracle", "delta", "closed_forms", "means", "busy_period", "orthogonality"])
def test_exact_checks_pass_at_half_load(name):
    checks = run_suite([0.5], QUICK, [name])
    assert checks
    failed = [c for c in checks if not c.passed]
    assert not failed, failed


def test_asymptotic_bands_at_light_load():
    checks = {c.name: c for c in run_suite([0.2], QUICK, ["asymptotics"])}
    assert set(checks) == {
        "b_asymptote_band",
        "delta_asymptote_band",
        "delta_btilde_ratio_decreasing",
        "delta_below_btilde",
    }
    assert all(c.passed for c in checks.values())


def test_heavy_load_skips_the_bands():
    assert run_suite([0.8], QUICK, ["asymptotics"]) == []


def test_monte_carlo_report():
    checks = {c.name: c for c in run_suite([0.5], QUICK, ["monte_carlo"])}
    assert set(checks) == {
        "mc_nu_geometric",
        "mc_delta_within_4_sigma",
        "mc_sojourn_mean_within_3_sigma",
        "mc_alpha_delta_same_law",
        "mc_workers_identical",
    }
    assert checks["mc_workers_identical"].passed
    assert all(c.rho == 0.5 for c in checks.values())


def test_default_replications_match_the_acceptance_run():
    assert SuiteConfig().reps == 1_000_000


def test_monte_carlo_report_states_its_replications():
    checks = run_suite([0.5], QUICK, ["monte_carlo"])
    assert all(c.detail.endswith("5000 replications") for c in checks)
