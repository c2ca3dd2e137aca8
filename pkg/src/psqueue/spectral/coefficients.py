"""Monomial coefficients of Q_n and the moments of dψ in extended precision."""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Any

import mpmath

from psqueue.errors import CapacityError, ParameterError, PrecisionEscalationError
from psqueue.model import QueueParameters
from psqueue.spectral.measure import SpectralMeasure, quadrature_moments

logger = logging.getLogger(__name__)

DOUBLE_DIGITS = 16


@dataclass(frozen=True)
class PrecisionPolicy:
    """
    Decimal digits for the coefficient table: base_dps plus digits_per_degree per unit of n_max.

    >>> PrecisionPolicy().dps_for(40)
    104
    """

    base_dps: int = 4 * DOUBLE_DIGITS
    digits_per_degree: float = 1.0
    max_dps: int = 4096
    self_check_digits: int = 30

    def dps_for(self, n_max: int) -> int:
        return self.base_dps + math.ceil(self.digits_per_degree * n_max)


@dataclass(frozen=True, eq=False)
class CoefficientTable:
    """
    Triangular table l[n][k] with Q_n(x) = Σ_k l[n][k] x^k, and the moments μ_0..μ_{2 n_max}.

    Entries are mpf values bound to `context`, a private mpmath context at `dps` digits.
    """

    rho: float
    n_max: int
    dps: int
    coeffs: tuple[tuple[Any, ...], ...]
    moments: tuple[Any, ...]
    context: Any

    def row(self, n: int) -> tuple[Any, ...]:
        if not 0 <= n <= self.n_max:
            raise CapacityError(f"coefficient table covers degrees 0..{self.n_max}, asked for {n}")
        return self.coeffs[n]

    def evaluate(self, n: int, x: float) -> Any:
        """
        Σ_k l[n][k] x^k by Horner's rule at the table precision.

        >>> from psqueue.model import validate_params
        >>> t = build_coefficient_table(2, validate_params(0.5))
        >>> [int(c) for c in t.row(2)], float(t.evaluate(2, 0.5))
        ([-1, 0, 9], 1.25)
        """
        ctx = self.context
        value = ctx.zero
        xs = ctx.mpf(x)
        for c in reversed(self.row(n)):
            value = value * xs + c
        return value

    def moments_float(self, n_max: int | None = None) -> list[float]:
        stop = len(self.moments) if n_max is None else n_max + 1
        if stop > len(self.moments):
            raise CapacityError(f"moment table covers 0..{len(self.moments) - 1}, asked for {stop - 1}")
        return [float(m) for m in self.moments[:stop]]


def _coefficient_rows(n_rows: int, rho: float, ctx: Any) -> list[list[Any]]:
    r = ctx.mpf(rho)
    lead = (1 + r) / r
    rows: list[list[Any]] = [[ctx.one]]
    if n_rows > 0:
        rows.append([ctx.zero, lead])
    for n in range(2, n_rows + 1):
        damp = ctx.mpf(n - 1) / (n * r)
        up, down = rows[n - 1], rows[n - 2]
        row = [ctx.zero] * (n + 1)
        for k in range(n % 2, n + 1, 2):
            value = lead * up[k - 1] if k >= 1 else ctx.zero
            if k <= n - 2:
                value -= damp * down[k]
            row[k] = value
        rows.append(row)
    return rows


def _recursion_moments(rows: Sequence[Sequence[Any]], ctx: Any) -> list[Any]:
    mu = [ctx.one]
    for n in range(1, len(rows)):
        if n % 2:
            mu.append(ctx.zero)
            continue
        row = rows[n]
        even = range(0, n, 2)
        mu.append(-ctx.fdot([row[k] for k in even], [mu[k] for k in even]) / row[n])
    return mu


def build_coefficient_table(
    n_max: int,
    params: QueueParameters,
    dps: int | None = None,
    policy: PrecisionPolicy = PrecisionPolicy(),
) -> CoefficientTable:
    """
    >>> from psqueue.model import validate_params
    >>> t = build_coefficient_table(3, validate_params(0.5))
    >>> t.moments_float(3)
    [1.0, 0.0, 0.1111111111111111, 0.0]
    """
    if n_max < 0:
        raise ParameterError(f"n_max must be nonnegative, got {n_max}")
    dps = policy.dps_for(n_max) if dps is None else dps
    if dps > policy.max_dps:
        raise CapacityError(f"n_max={n_max} needs {dps} digits, beyond the budget of {policy.max_dps}")
    ctx = mpmath.MPContext()
    ctx.dps = dps
    rows = _coefficient_rows(2 * n_max, params.rho, ctx)
    mu = _recursion_moments(rows, ctx)
    logger.debug("coefficient table n_max=%d at %d digits", n_max, dps)
    return CoefficientTable(
        rho=params.rho,
        n_max=n_max,
        dps=dps,
        coeffs=tuple(tuple(row) for row in rows[: n_max + 1]),
        moments=tuple(mu),
        context=ctx,
    )


def _first_disagreement(coarse: CoefficientTable, fine: CoefficientTable, digits: int) -> int | None:
    ctx = fine.context
    tol = ctx.mpf(10) ** (-digits)
    for k, (a, b) in enumerate(zip(coarse.moments, fine.moments)):
        if abs(ctx.mpf(a) - b) > tol * abs(b):
            return k
    return None


def cross_check_moments(
    table: CoefficientTable, measure: SpectralMeasure, n_check: int = 40, tol: float = 1e-10
) -> None:
    """Compare recursion moments with quadrature moments up to n_check; raise on the first disagreement."""
    n_check = min(n_check, len(table.moments) - 1)
    quad = quadrature_moments(measure, n_check)
    for k in range(n_check + 1):
        rec = float(table.moments[k])
        if abs(rec - quad[k]) >= tol * max(1.0, abs(rec)):
            raise PrecisionEscalationError(
                f"moment {k}: recursion {rec!r} disagrees with quadrature {float(quad[k])!r}", k
            )


def escalate_table(
    n_max: int,
    params: QueueParameters,
    measure: SpectralMeasure | None = None,
    policy: PrecisionPolicy = PrecisionPolicy(),
) -> CoefficientTable:
    """
    Coefficient table whose moments are stable under doubling the precision.

    Starting at policy.dps_for(n_max) digits, the table is rebuilt at twice the digits until both agree to
    policy.self_check_digits; the accepted table is then cross-checked against quadrature when a measure is given.
    """
    table = build_coefficient_table(n_max, params, policy=policy)
    if 2 * table.dps > policy.max_dps:
        raise CapacityError(f"no room to double {table.dps} digits within the budget of {policy.max_dps}")
    failing: int | None = None
    while True:
        finer_dps = 2 * table.dps
        if finer_dps > policy.max_dps:
            raise PrecisionEscalationError(
                f"moment {failing} not stable to {policy.self_check_digits} digits within {policy.max_dps} digits",
                failing or 0,
            )
        finer = build_coefficient_table(n_max, params, dps=finer_dps, policy=policy)
        failing = _first_disagreement(table, finer, policy.self_check_digits)
        if failing is None:
            break
        logger.info("escalating coefficient table to %d digits (moment %d unstable)", finer_dps, failing)
        table = finer
    if measure is not None:
        cross_check_moments(table, measure)
    return table


class MomentMethod(Enum):
    RECURSION = "recursion"
    QUADRATURE = "quadrature"


def moments(
    n_max: int,
    method: MomentMethod,
    table: CoefficientTable | None = None,
    measure: SpectralMeasure | None = None,
) -> list[float]:
    """
    μ_0..μ_{n_max} by the coefficient recursion or by quadrature against dψ.

    The recursion path is cross-checked against quadrature whenever a measure is supplied.
    """
    match method:
        case MomentMethod.RECURSION:
            if table is None:
                raise ParameterError("the recursion path needs a coefficient table")
            values = table.moments_float(n_max)
            if measure is not None:
                cross_check_moments(table, measure, n_check=min(n_max, 40))
            return values
        case MomentMethod.QUADRATURE:
            if measure is None:
                raise ParameterError("the quadrature path needs a spectral measure")
            return [float(v) for v in quadrature_moments(measure, n_max)]
