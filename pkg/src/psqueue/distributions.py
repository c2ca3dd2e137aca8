"""
Spectral formulas for the tagged customer: ν, κ and their joint law, the generating function of κ,
the common law of α and δ, and sojourn-time tails.

All integrals run over the θ-parametrized quadrature of dψ, with x = (2√ρ/(1+ρ)) cos θ and
Q_n(x) = ρ^{-n/2} P_n(cos θ; 1, 0).
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from numpy.typing import ArrayLike, NDArray

from psqueue.errors import CapacityError, ParameterError, QuadratureError
from psqueue.model import Pmf, QueueParameters, TruncationConfig, outer_truncation
from psqueue.spectral import (
    CoefficientTable,
    PrecisionPolicy,
    SpectralMeasure,
    build_quadrature,
    escalate_table,
    gen_P,
    phi,
    pollaczek_matrix,
    refined_for_degree,
)

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

NORMALIZATION_TOLERANCE = 1e-6


class SojournReading(Enum):
    """Ways to read the sin θ factor of the sojourn-tail integral."""

    SINE_IN_MEASURE = "sine carried by dpsi"
    EXPLICIT_SINE = "explicit sine against dpsi"
    EXPLICIT_SINE_DTHETA = "explicit sine against dtheta"


@dataclass(frozen=True, eq=False)
class SpectralEngine:
    params: QueueParameters
    table: CoefficientTable
    measure: SpectralMeasure
    trunc: TruncationConfig
    sojourn_reading: SojournReading = SojournReading.SINE_IN_MEASURE

    @property
    def outer_index(self) -> int:
        """Largest initial population kept in stationary mixtures."""
        return outer_truncation(self.params, self.trunc)[1]

    @property
    def achieved_epsilon(self) -> float:
        return self.params.rho ** (self.outer_index + 1)


@dataclass(frozen=True, eq=False)
class _NodeBasis:
    """Quadrature nodes of a rule fine enough for some degree, with P_0..P_rows evaluated on them."""

    measure: SpectralMeasure
    x: FloatArray
    weights: FloatArray
    P: FloatArray
    Qrho: FloatArray


@lru_cache(maxsize=64)
def _basis(engine: SpectralEngine, degree: int, rows: int) -> _NodeBasis:
    measure = refined_for_degree(engine.measure, degree)
    P = pollaczek_matrix(rows, measure.cos_theta)
    Qrho = np.asarray(gen_P(measure.theta, engine.params.sqrt_rho))
    return _NodeBasis(measure, measure.x, measure.weights, P, Qrho)


def _check_index(name: str, value: int, lowest: int = 0) -> None:
    if value < lowest:
        raise ParameterError(f"{name} must be at least {lowest}, got {value}")


def resolve_sojourn_reading(measure: SpectralMeasure, params: QueueParameters) -> SojournReading:
    """Pick the reading of the sojourn integral under which P(W_0 > 0) = 1."""
    at_zero = np.zeros(1)
    totals = {r: float(_sojourn_integral(measure, params, r, 0, at_zero)[0]) for r in SojournReading}
    for reading, total in totals.items():
        logger.debug("sojourn reading %r normalizes to %.12g", reading.value, total)
    for reading, total in totals.items():
        if abs(total - 1.0) < NORMALIZATION_TOLERANCE:
            logger.info("adopting sojourn reading %r", reading.value)
            return reading
    residual = min(abs(total - 1.0) for total in totals.values())
    raise QuadratureError("no reading of the sojourn integral normalizes to one", residual)


def build_engine(
    params: QueueParameters,
    trunc: TruncationConfig = TruncationConfig(),
    j_max: int = 40,
    panels: int = 64,
    order: int = 20,
    policy: PrecisionPolicy = PrecisionPolicy(),
) -> SpectralEngine:
    """Bind a quadrature of dψ and a coefficient table sized for j_max plus the stationary truncation."""
    _check_index("j_max", j_max)
    measure = build_quadrature(params, panels, order)
    _, N = outer_truncation(params, trunc)
    table = escalate_table(j_max + N, params, measure, policy)
    reading = resolve_sojourn_reading(measure, params)
    logger.debug("engine rho=%g: N=%d, table n_max=%d at %d digits", params.rho, N, table.n_max, table.dps)
    return SpectralEngine(params, table, measure, trunc, reading)


# ν, κ and their joint law given N0 = n


def nu_given_n(engine: SpectralEngine, n: int, m: int) -> float:
    """(ρ^m / (1+ρ)) ∫ Q_m Q_n / (1 - x) dψ."""
    return float(nu_pmf_given_n(engine, n, m).probs[m])


def nu_pmf_given_n(engine: SpectralEngine, n: int, m_max: int) -> Pmf:
    _check_index("n", n)
    _check_index("m_max", m_max)
    rho = engine.params.rho
    b = _basis(engine, n + m_max, max(n, m_max))
    scale = rho ** (np.arange(m_max + 1) / 2.0)
    left = b.P[: m_max + 1] * scale[:, None]
    right = b.weights * b.P[n] * rho ** (-n / 2.0) / (1.0 - b.x)
    return Pmf.from_array(left @ right / (1.0 + rho))


def kappa_given_n(engine: SpectralEngine, n: int, k: int) -> float:
    """(1/(1+ρ)) ∫ x^{k-1} 𝒬(x; ρ) Q_n dψ."""
    _check_index("k", k, 1)
    return float(kappa_pmf_given_n(engine, n, k).probs[k - 1])


def kappa_pmf_given_n(engine: SpectralEngine, n: int, k_max: int) -> Pmf:
    _check_index("n", n)
    _check_index("k_max", k_max, 1)
    rho = engine.params.rho
    b = _basis(engine, n + k_max - 1, n)
    powers = b.x[None, :] ** np.arange(k_max)[:, None]
    right = b.weights * b.Qrho * b.P[n] * rho ** (-n / 2.0)
    return Pmf.from_array(powers @ right / (1.0 + rho), offset=1)


def joint_given_n(engine: SpectralEngine, n: int, k: int, m: int) -> float:
    """(ρ^m / (1+ρ)) ∫ x^{k-1} Q_m Q_n dψ."""
    _check_index("k", k, 1)
    _check_index("m", m)
    return float(joint_table_given_n(engine, n, k, m)[k - 1, m])


def joint_table_given_n(engine: SpectralEngine, n: int, k_max: int, m_max: int) -> FloatArray:
    """P(κ = k, ν = m | N0 = n) at [k - 1, m] for k <= k_max, m <= m_max."""
    _check_index("n", n)
    _check_index("k_max", k_max, 1)
    rho = engine.params.rho
    b = _basis(engine, n + m_max + k_max - 1, max(n, m_max))
    powers = b.x[None, :] ** np.arange(k_max)[:, None] * (b.weights * b.P[n])
    scale = rho ** ((np.arange(m_max + 1) - n) / 2.0)
    return powers @ (b.P[: m_max + 1] * scale[:, None]).T / (1.0 + rho)


def stationary_nu_pmf(engine: SpectralEngine, m_max: int) -> Pmf:
    """ν under the stationary initial population, mixed in closed form through Σ_n ρ^n Q_n = 𝒬(x; ρ)."""
    _check_index("m_max", m_max)
    rho = engine.params.rho
    b = _basis(engine, m_max, m_max)
    scale = rho ** (np.arange(m_max + 1) / 2.0)
    right = b.weights * b.Qrho / (1.0 - b.x)
    return Pmf.from_array((1.0 - rho) / (1.0 + rho) * (b.P[: m_max + 1] * scale[:, None]) @ right)


def normalization_integral(engine: SpectralEngine, n: int) -> float:
    """(1/(1+ρ)) ∫ 𝒬(x; ρ) Q_n / (1 - x) dψ, which equals one for every n."""
    _check_index("n", n)
    rho = engine.params.rho
    b = _basis(engine, n, n)
    return float(b.weights @ (b.Qrho * b.P[n] / (1.0 - b.x))) * rho ** (-n / 2.0) / (1.0 + rho)


def kappa_gen(engine: SpectralEngine, z: float) -> float:
    """
    E z^κ = ((1-ρ)/(1+ρ)) ∫ z / (1 - zx) 𝒬(x; ρ)² dψ for |z| <= 1.
    """
    if abs(z) > 1.0:
        raise ParameterError(f"generating function of kappa is evaluated for |z| <= 1, got {z}")
    rho = engine.params.rho
    b = _basis(engine, 0, 0)
    return (1.0 - rho) / (1.0 + rho) * float(b.weights @ (z / (1.0 - z * b.x) * b.Qrho**2))


def kappa_mean(engine: SpectralEngine) -> float:
    rho = engine.params.rho
    b = _basis(engine, 0, 0)
    return (1.0 - rho) / (1.0 + rho) * float(b.weights @ (b.Qrho**2 / (1.0 - b.x) ** 2))


# α and δ


def _arrival_partials(b: _NodeBasis, rho: float, L_max: int) -> FloatArray:
    """H_L = Σ_{m <= L} ρ^{m/2} P_m X^{L-m} for L <= L_max, with X = x at the nodes."""
    H = np.empty((L_max + 1, b.x.size))
    H[0] = b.P[0]
    for L in range(1, L_max + 1):
        H[L] = b.x * H[L - 1] + rho ** (L / 2.0) * b.P[L]
    return H


def _departure_partials(b: _NodeBasis, rho: float, a_max: int, m_top: int) -> FloatArray:
    """T_a = Σ_{m >= a} ρ^{m/2} P_m X^{m-a} for a <= a_max, the series cut after m_top."""
    T = np.zeros((a_max + 1, b.x.size))
    tail = np.zeros(b.x.size)
    for a in range(m_top, -1, -1):
        tail = rho ** (a / 2.0) * b.P[a] + b.x * tail
        if a <= a_max:
            T[a] = tail
    return T


def _departure_cutoff(params: QueueParameters, trunc: TruncationConfig, a_max: int, j_max: int) -> int:
    ratio = 2.0 * params.rho / (1.0 + params.rho)
    return math.ceil(math.log(trunc.epsilon * 1e-2) / math.log(ratio)) + a_max + j_max


def _arrival_rows(b: _NodeBasis, H: FloatArray, rho: float, n: int, j_max: int) -> FloatArray:
    """∫ x^{2j+n-m} Σ_{m <= j+n} ρ^m Q_m Q_n dψ for j = 0..j_max."""
    powers = b.x[None, :] ** np.arange(j_max + 1)[:, None]
    return (powers * H[n : n + j_max + 1]) @ (b.weights * b.P[n]) * rho ** (-n / 2.0)


def _departure_rows(b: _NodeBasis, T: FloatArray, rho: float, n: int, j_max: int) -> FloatArray:
    """∫ Σ_{m >= (n-j)+} x^{2j-n+m} ρ^m Q_m Q_n dψ for j = 0..j_max."""
    j = np.arange(j_max + 1)
    a = np.maximum(n - j, 0)
    powers = b.x[None, :] ** (2 * j - n + a)[:, None]
    return (powers * T[a]) @ (b.weights * b.P[n]) * rho ** (-n / 2.0)


def alpha_pmf_given_n(engine: SpectralEngine, n: int, j_max: int) -> Pmf:
    """P(α = j | N0 = n): arrivals seen by a customer that finds n others."""
    _check_index("n", n)
    _check_index("j_max", j_max)
    rho = engine.params.rho
    L_max = j_max + n
    b = _basis(engine, 2 * L_max, L_max)
    H = _arrival_partials(b, rho, L_max)
    return Pmf.from_array(_arrival_rows(b, H, rho, n, j_max) / (1.0 + rho))


def delta_pmf_given_n(engine: SpectralEngine, n: int, j_max: int) -> Pmf:
    """P(δ = j | N0 = n): departures seen by a customer that finds n others."""
    _check_index("n", n)
    _check_index("j_max", j_max)
    rho = engine.params.rho
    m_top = _departure_cutoff(engine.params, engine.trunc, n, j_max)
    b = _basis(engine, 2 * j_max + m_top, m_top)
    T = _departure_partials(b, rho, n, m_top)
    return Pmf.from_array(_departure_rows(b, T, rho, n, j_max) / (1.0 + rho))


def delta_pmf_quadrature(engine: SpectralEngine, j_max: int) -> Pmf:
    """The stationary law of δ by direct quadrature of the arrival-form double sum."""
    _check_index("j_max", j_max)
    rho = engine.params.rho
    weights, N = outer_truncation(engine.params, engine.trunc)
    L_max = j_max + N
    b = _basis(engine, 2 * L_max, L_max)
    H = _arrival_partials(b, rho, L_max)
    total = sum(w * _arrival_rows(b, H, rho, n, j_max) for n, w in enumerate(weights))
    return Pmf.from_array(np.asarray(total) / (1.0 + rho))


def delta_pmf_departure_form(engine: SpectralEngine, j_max: int) -> Pmf:
    """The stationary law of δ from the departure-form sum, coded independently of the arrival form."""
    _check_index("j_max", j_max)
    rho = engine.params.rho
    weights, N = outer_truncation(engine.params, engine.trunc)
    m_top = _departure_cutoff(engine.params, engine.trunc, N, j_max)
    b = _basis(engine, 2 * j_max + m_top, m_top)
    T = _departure_partials(b, rho, N, m_top)
    total = sum(w * _departure_rows(b, T, rho, n, j_max) for n, w in enumerate(weights))
    return Pmf.from_array(np.asarray(total) / (1.0 + rho))


def delta_pmf(engine: SpectralEngine, j_max: int) -> Pmf:
    """
    The stationary law of δ (equal in law to α) from the moments of dψ and the coefficients of Q_n.

    With g_L(x) = Σ_{m <= L} ρ^m Q_m(x) x^{L-m} and λ_n(k) = ∫ x^k Q_n dψ, which vanishes for k < n,
    P(δ = j) = ((1-ρ)/(1+ρ)) Σ_{n <= N} ρ^n Σ_r g_{j+n, r} λ_n(j + r), accumulated at the table precision.
    """
    _check_index("j_max", j_max)
    table = engine.table
    weights, N = outer_truncation(engine.params, engine.trunc)
    n_max = j_max + N
    if table.n_max < n_max:
        raise CapacityError(f"delta_pmf up to j={j_max} with N={N} needs a table of degree {n_max}, have {table.n_max}")
    ctx = table.context
    rho = ctx.mpf(engine.params.rho)
    mu = table.moments

    # g_L coefficients, only entries of the parity of L are nonzero
    g = [[ctx.one]]
    rho_power = ctx.one
    for L in range(1, n_max + 1):
        rho_power *= rho
        row = [ctx.zero] + list(g[L - 1])
        for k, c in enumerate(table.row(L)):
            if c:
                row[k] += rho_power * c
        g.append(row)

    probs = []
    for j in range(j_max + 1):
        acc = ctx.zero
        rho_n = ctx.one
        for n in range(N + 1):
            coeffs = table.row(n)
            odd = n % 2
            ts = range(odd, n + 1, 2)
            g_row = g[j + n]
            rs = [r for r in range((j + n) % 2, j + n + 1, 2) if j + r >= n]
            lam = [ctx.fdot([coeffs[t] for t in ts], [mu[j + r + t] for t in ts]) for r in rs]
            acc += rho_n * ctx.fdot([g_row[r] for r in rs], lam)
            rho_n *= rho
        probs.append(acc)
    scale = (1 - rho) / (1 + rho)
    values = [float(scale * p) for p in probs]
    logger.debug("delta_pmf: j_max=%d, N=%d, %d digits", j_max, N, table.dps)
    return Pmf.from_array(values)


# sojourn times


def _sojourn_weights(measure: SpectralMeasure, reading: SojournReading) -> FloatArray:
    match reading:
        case SojournReading.SINE_IN_MEASURE:
            return measure.weights
        case SojournReading.EXPLICIT_SINE:
            return measure.weights * np.sin(measure.theta)
        case SojournReading.EXPLICIT_SINE_DTHETA:
            return measure.raw_weights * np.sin(measure.theta)


def _sojourn_kernel(measure: SpectralMeasure, params: QueueParameters) -> tuple[FloatArray, FloatArray]:
    """e^{φ cot θ} and r² = 1 + ρ - 2√ρ cos θ at the nodes."""
    theta = measure.theta
    angle = np.asarray(phi(theta, params)) * np.cos(theta) / np.sin(theta)
    r2 = 1.0 + params.rho - 2.0 * params.sqrt_rho * np.cos(theta)
    return np.exp(angle), r2


def _sojourn_integral(
    measure: SpectralMeasure, params: QueueParameters, reading: SojournReading, n: int, y: FloatArray
) -> FloatArray:
    P_n = pollaczek_matrix(n, measure.cos_theta)[n]
    growth, r2 = _sojourn_kernel(measure, params)
    base = _sojourn_weights(measure, reading) * P_n * growth * r2**-1.5
    return np.exp(-np.outer(y, r2)) @ base * params.rho ** (-n / 2.0)


def _as_times(y: ArrayLike) -> FloatArray:
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if np.any(y < 0.0):
        raise ParameterError("sojourn tail needs y >= 0")
    return y


def sojourn_tail(engine: SpectralEngine, n: int, y: ArrayLike) -> float | FloatArray:
    """P(W_n > y) for a customer that finds n others."""
    _check_index("n", n)
    times = _as_times(y)
    measure = refined_for_degree(engine.measure, n)
    values = _sojourn_integral(measure, engine.params, engine.sojourn_reading, n, times)
    return float(values[0]) if np.ndim(y) == 0 else values


def stationary_sojourn_tail(engine: SpectralEngine, y: ArrayLike) -> float | FloatArray:
    """P(W > y) = (1-ρ) ∫ e^{2φ cot θ} r^{-4} e^{-r² y} dψ, the mixture over n in closed form."""
    times = _as_times(y)
    rho = engine.params.rho
    growth, r2 = _sojourn_kernel(engine.measure, engine.params)
    base = _sojourn_weights(engine.measure, engine.sojourn_reading) * growth**2 * r2**-2.0
    values = (1.0 - rho) * (np.exp(-np.outer(times, r2)) @ base)
    return float(values[0]) if np.ndim(y) == 0 else values


def stationary_sojourn_mean(engine: SpectralEngine) -> float:
    rho = engine.params.rho
    growth, r2 = _sojourn_kernel(engine.measure, engine.params)
    base = _sojourn_weights(engine.measure, engine.sojourn_reading) * growth**2 * r2**-3.0
    return (1.0 - rho) * float(base.sum())
