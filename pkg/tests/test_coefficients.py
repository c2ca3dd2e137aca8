import dataclasses

import numpy as np
import pytest

from psqueue.errors import CapacityError, ParameterError, PrecisionEscalationError
from psqueue.model import validate_params
from psqueue.spectral import (
    MomentMethod,
    PrecisionPolicy,
    build_coefficient_table,
    build_quadrature,
    cross_check_moments,
    escalate_table,
    eval_Q,
    moments,
)


def test_second_row_at_half_load():
    t = build_coefficient_table(2, validate_params(0.5))
    assert [float(c) for c in t.row(2)] == [-1.0, 0.0, 9.0]


def test_rows_evaluate_like_the_recurrence(rho):
    p = validate_params(rho)
    t = build_coefficient_table(20, p)
    rng = np.random.default_rng(3)
    for x in rng.uniform(-p.support_bound, p.support_bound, 20):
        for n in (0, 1, 5, 12, 20):
            scale = p.sqrt_rho**n
            assert float(t.evaluate(n, x)) * scale == pytest.approx(eval_Q(n, x, p) * scale, rel=1e-9, abs=1e-11)


def test_parity_zeros():
    t = build_coefficient_table(30, validate_params(0.3))
    for n in range(31):
        row = t.row(n)
        assert len(row) == n + 1
        assert all(row[k] == 0 for k in range(n + 1) if (n - k) % 2)


def test_row_out_of_range():
    t = build_coefficient_table(3, validate_params(0.5))
    with pytest.raises(CapacityError):
        t.row(4)
    with pytest.raises(CapacityError):
        t.moments_float(7)
    with pytest.raises(ParameterError):
        build_coefficient_table(-1, validate_params(0.5))


def test_digit_budget():
    with pytest.raises(CapacityError):
        build_coefficient_table(100, validate_params(0.5), policy=PrecisionPolicy(max_dps=50))


def test_moment_paths_agree(rho):
    p = validate_params(rho)
    measure = build_quadrature(p)
    table = escalate_table(20, p, measure)
    by_recursion = moments(40, MomentMethod.RECURSION, table=table, measure=measure)
    by_quadrature = moments(40, MomentMethod.QUADRATURE, measure=measure)
    np.testing.assert_allclose(by_recursion, by_quadrature, rtol=0.0, atol=1e-10)
    assert by_recursion[2] == pytest.approx(rho / (2 * (1 + rho) ** 2), rel=1e-12)


def test_moment_paths_need_their_inputs():
    with pytest.raises(ParameterError):
        moments(4, MomentMethod.RECURSION)
    with pytest.raises(ParameterError):
        moments(4, MomentMethod.QUADRATURE)


def test_corrupted_moment_is_named():
    p = validate_params(0.5)
    table = build_coefficient_table(10, p)
    bad = list(table.moments)
    bad[6] = bad[6] * 2
    with pytest.raises(PrecisionEscalationError) as info:
        cross_check_moments(dataclasses.replace(table, moments=tuple(bad)), build_quadrature(p))
    assert info.value.index == 6
