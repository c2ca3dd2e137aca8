"""
Large-index behaviour of P(δ = j), μ_n, P(b = j) and P(b̃ = j), and diagnostics comparing computed tails with it.

Every asymptote shares the exponential factor z0^{-j}; the log_* evaluators are exact in log space and the plain
evaluators exponentiate them.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from psqueue.errors import DiagnosticsError, ParameterError
from psqueue.model import Pmf, QueueParameters

logger = logging.getLogger(__name__)

UNDERFLOW = 1e-300

LogAsymptote = Callable[[QueueParameters, int], float]


def _check_positive(j: int) -> None:
    if j < 1:
        raise ParameterError(f"asymptotes are defined for index >= 1, got {j}")


def log_delta_prefactor(params: QueueParameters) -> float:
    """log of (4/(1-ρ)) e^{2(1+ρ)/(1-ρ)} √((8/3)(π/2)^{5/3})."""
    rho = params.rho
    return (
        math.log(4.0 / (1.0 - rho))
        + 2.0 * (1.0 + rho) / (1.0 - rho)
        + 0.5 * math.log(8.0 / 3.0 * (math.pi / 2.0) ** (5.0 / 3.0))
    )


def log_delta_rate(params: QueueParameters, j: int) -> float:
    """
    log r(j) = -(5/6) log j - 3(π/2)^{2/3} j^{1/3} + 2j log(2√ρ/(1+ρ)).

    >>> from psqueue.model import validate_params
    >>> p = validate_params(0.5)
    >>> direct = -(5 / 6) * math.log(8) - 3 * (math.pi / 2) ** (2 / 3) * 2 + 16 * math.log(p.support_bound)
    >>> abs(log_delta_rate(p, 8) - direct) < 1e-12
    True
    """
    _check_positive(j)
    return -(5.0 / 6.0) * math.log(j) - 3.0 * (math.pi / 2.0) ** (2.0 / 3.0) * j ** (1.0 / 3.0) + j * params.decay_rate


def log_delta_asymptote(params: QueueParameters, j: int) -> float:
    return log_delta_prefactor(params) + log_delta_rate(params, j)


def delta_asymptote(params: QueueParameters, j: int) -> float:
    return math.exp(log_delta_asymptote(params, j))


def log_moment_asymptote(params: QueueParameters, n: int) -> float:
    """
    log of 2e (2√ρ/(1+ρ))^n n^{-5/6} √(8π^{5/3}/3) e^{-(3/2)π^{2/3} n^{1/3}} for even n >= 2.

    >>> from psqueue.model import validate_params
    >>> log_moment_asymptote(validate_params(0.5), 41)
    Traceback (most recent call last):
    ...
    psqueue.errors.ParameterError: odd moments vanish; moment asymptote needs an even n >= 2, got 41
    """
    if n < 2 or n % 2:
        raise ParameterError(f"odd moments vanish; moment asymptote needs an even n >= 2, got {n}")
    return (
        math.log(2.0 * math.e)
        + n * math.log(params.support_bound)
        - (5.0 / 6.0) * math.log(n)
        + 0.5 * math.log(8.0 * math.pi ** (5.0 / 3.0) / 3.0)
        - 1.5 * math.pi ** (2.0 / 3.0) * n ** (1.0 / 3.0)
    )


def moment_asymptote(params: QueueParameters, n: int) -> float:
    return math.exp(log_moment_asymptote(params, n))


def log_b_asymptote(params: QueueParameters, j: int) -> float:
    """log of ((1+ρ)/(ρ(1-ρ)√π)) j^{-3/2} z0^{-j}."""
    _check_positive(j)
    rho = params.rho
    return math.log((1.0 + rho) / (rho * (1.0 - rho) * math.sqrt(math.pi))) - 1.5 * math.log(j) + j * params.decay_rate


def b_asymptote(params: QueueParameters, j: int) -> float:
    return math.exp(log_b_asymptote(params, j))


def log_btilde_asymptote(params: QueueParameters, j: int) -> float:
    """log of (4(1+ρ)/((1-ρ)³√π)) j^{-5/2} z0^{-j}."""
    _check_positive(j)
    rho = params.rho
    scale = 4.0 * (1.0 + rho) / ((1.0 - rho) ** 3 * math.sqrt(math.pi))
    return math.log(scale) - 2.5 * math.log(j) + j * params.decay_rate


def btilde_asymptote(params: QueueParameters, j: int) -> float:
    return math.exp(log_btilde_asymptote(params, j))


@dataclass(frozen=True)
class AsymptoticReport:
    """
    One index of a comparison between a computed table and its asymptote.

    `log_gap_per_index` is log exact(j+1) - log exact(j); `corrected_log_slope` is the same slope after dividing out
    the subexponential prefactor of the asymptote, so it tends to the decay rate. Both are None at the last index.
    """

    index: int
    exact: float
    asymptote: float
    ratio: float
    log_gap_per_index: float | None
    corrected_log_slope: float | None


def _log_exact(pmf: Pmf, j: int) -> float:
    value = pmf[j]
    if value <= UNDERFLOW:
        raise DiagnosticsError(f"P({j}) = {value:.3g} is at or below underflow; shorten the window")
    return math.log(value)


def compare_to_asymptote(
    pmf: Pmf, log_asymptote: LogAsymptote, params: QueueParameters, indices: Sequence[int]
) -> list[AsymptoticReport]:
    """Rows of exact value, asymptote and their ratio; slopes are taken between consecutive requested indices."""
    indices = list(indices)
    if not indices:
        raise DiagnosticsError("no indices to compare")
    for j in indices:
        if j > pmf.max_index:
            raise DiagnosticsError(f"table stops at {pmf.max_index}, asked for {j}")
    logs = [_log_exact(pmf, j) for j in indices]
    asymptotes = [log_asymptote(params, j) for j in indices]
    reports = []
    for i, j in enumerate(indices):
        gap = corrected = None
        if i + 1 < len(indices):
            step = indices[i + 1] - j
            gap = (logs[i + 1] - logs[i]) / step
            drift = (asymptotes[i + 1] - asymptotes[i]) / step
            corrected = gap - drift + params.decay_rate
        exact, asymptote = math.exp(logs[i]), math.exp(asymptotes[i])
        reports.append(AsymptoticReport(j, exact, asymptote, math.exp(logs[i] - asymptotes[i]), gap, corrected))
    return reports


@dataclass(frozen=True, eq=False)
class DecayDiagnostics:
    indices: tuple[int, ...]
    delta: tuple[AsymptoticReport, ...]
    btilde: tuple[AsymptoticReport, ...]
    ratios: NDArray[np.float64]
    ratio_decreasing: bool


def decay_diagnostics(
    delta: Pmf, btilde: Pmf, params: QueueParameters, window: tuple[int, int] = (15, 40)
) -> DecayDiagnostics:
    """
    Compare the tails of δ and b̃ over a common window: their slopes against the shared decay rate and the ratio
    P(δ = j) / P(b̃ = j), which decreases because the prefactors differ.
    """
    lo, hi = window
    if lo < 1 or hi - lo + 1 < 3:
        raise DiagnosticsError(f"window {window} must start at 1 or later and hold at least three indices")
    indices = tuple(range(lo, hi + 1))
    delta_rows = compare_to_asymptote(delta, log_delta_asymptote, params, indices)
    btilde_rows = compare_to_asymptote(btilde, log_btilde_asymptote, params, indices)
    ratios = np.array([d.exact / b.exact for d, b in zip(delta_rows, btilde_rows)])
    decreasing = bool(np.all(np.diff(ratios) < 0.0))
    logger.debug("decay diagnostics on %s: ratio %.3g to %.3g", window, ratios[0], ratios[-1])
    return DecayDiagnostics(indices, tuple(delta_rows), tuple(btilde_rows), ratios, decreasing)
