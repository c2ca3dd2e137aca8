"""
The residual busy period seen by an arriving customer: its generating functions, the law of the number b of
customers it serves, and the law of the rank b̃ of one of them picked uniformly.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from numpy.typing import ArrayLike, NDArray
from scipy.special import gammaln

from psqueue.errors import ParameterError, SingularityError, TruncationError
from psqueue.model import Pmf, QueueParameters

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]


@dataclass(frozen=True)
class BusyPeriodModel:
    """
    >>> from psqueue.model import validate_params
    >>> BusyPeriodModel(validate_params(0.5), k_cap=0)
    Traceback (most recent call last):
    ...
    psqueue.errors.ParameterError: k_cap must be at least 1, got 0
    """

    params: QueueParameters
    series_tol: float = 1e-14
    k_cap: int = 2_000_000

    def __post_init__(self) -> None:
        if not self.series_tol > 0:
            raise ParameterError(f"series_tol must be positive, got {self.series_tol}")
        if self.k_cap < 1:
            raise ParameterError(f"k_cap must be at least 1, got {self.k_cap}")


def _check_branch(model: BusyPeriodModel, z: float) -> None:
    if z > model.params.z0:
        raise SingularityError(f"z={z} lies on the branch cut beyond z0={model.params.z0}", z)


def _beta(rho: float, z: ArrayLike) -> NDArray[np.complex128] | FloatArray:
    """((1+ρ)/(2ρ)) (1 - √(1-u)) with u = 4ρz/(1+ρ)², written without cancellation at small u."""
    u = 4.0 * rho * np.asarray(z) / (1.0 + rho) ** 2
    return (1.0 + rho) / (2.0 * rho) * u / (1.0 + np.sqrt(1.0 - u))


def beta_gen(model: BusyPeriodModel, z: float) -> float:
    """
    Generating function of the number of customers served in one busy period.

    >>> from psqueue.model import validate_params
    >>> m = BusyPeriodModel(validate_params(0.5))
    >>> beta_gen(m, 1.0), beta_gen(m, 0.0)
    (1.0, 0.0)
    """
    _check_branch(model, z)
    if z == 1.0:
        return 1.0
    return float(_beta(model.params.rho, z))


def B_gen(model: BusyPeriodModel, z: float) -> float:
    """
    Generating function of b: an arrival that finds n others waits for n+1 busy periods.

    >>> from psqueue.model import validate_params
    >>> m = BusyPeriodModel(validate_params(0.5))
    >>> B_gen(m, 1.0), B_gen(m, 0.0)
    (1.0, 0.0)
    """
    _check_branch(model, z)
    if z == 1.0:
        return 1.0
    rho = model.params.rho
    beta = beta_gen(model, z)
    if rho * beta == 1.0:
        raise SingularityError(f"B has a pole where rho * beta(z) = 1, z={z}", z)
    return (1.0 - rho) * beta / (1.0 - rho * beta)


def B_gen_closed(model: BusyPeriodModel, z: float) -> float:
    """
    (1-ρ)(1+ρ) / (2ρ²(z-1)) · (1 - 2ρz/(1+ρ) - √(1 - 4ρz/(1+ρ)²)), undefined at the removable point z = 1.
    """
    _check_branch(model, z)
    if z == 1.0:
        raise SingularityError("the closed form of B is singular at z=1; use B_gen", z)
    rho = model.params.rho
    root = math.sqrt(1.0 - 4.0 * rho * z / (1.0 + rho) ** 2)
    return (1.0 - rho) * (1.0 + rho) / (2.0 * rho**2 * (z - 1.0)) * (1.0 - 2.0 * rho * z / (1.0 + rho) - root)


def _log_catalan_terms(rho: float, K: int) -> FloatArray:
    """log of C(2k, k) ρ^k / ((k+1)(1+ρ)^{2k}) for k = 0..K."""
    k = np.arange(K + 1, dtype=np.float64)
    return gammaln(2.0 * k + 1.0) - 2.0 * gammaln(k + 1.0) - np.log1p(k) + k * math.log(rho / (1.0 + rho) ** 2)


def _series_cutoff(model: BusyPeriodModel, l_max: int) -> FloatArray:
    """Catalan terms far enough past l_max that the dropped tail is below series_tol relative to term l_max."""
    z0 = model.params.z0
    K = l_max + 64
    while True:
        K = min(K, model.k_cap)
        logs = _log_catalan_terms(model.params.rho, K)
        relative = math.exp(logs[K] - logs[l_max]) / (1.0 - 1.0 / z0)
        if relative < model.series_tol:
            logger.debug("busy-period series cut at K=%d for l_max=%d (relative tail %.3g)", K, l_max, relative)
            return np.exp(logs)
        if K >= model.k_cap:
            raise TruncationError(f"series tail {relative:.3g} still above {model.series_tol} at k_cap={K}", relative)
        K *= 2


def _b_series(model: BusyPeriodModel, l_max: int) -> FloatArray:
    """P(b = ℓ) for ℓ = 0..K, K the series cutoff for l_max."""
    rho = model.params.rho
    terms = _series_cutoff(model, l_max)
    tails = np.cumsum(terms[::-1])[::-1]
    probs = (1.0 - rho) / (rho * (1.0 + rho)) * tails
    probs[0] = 0.0
    return probs


def b_pmf(model: BusyPeriodModel, l_max: int) -> Pmf:
    """
    P(b = ℓ) = ((1-ρ)/(ρ(1+ρ))) Σ_{k >= ℓ} C(2k, k) ρ^k / ((k+1)(1+ρ)^{2k}) for ℓ >= 1, and P(b = 0) = 0.

    >>> from psqueue.model import validate_params
    >>> p = b_pmf(BusyPeriodModel(validate_params(0.5)), 5)
    >>> p[0], round(p[1], 12)
    (0.0, 0.333333333333)
    """
    if l_max < 1:
        raise ParameterError(f"l_max must be at least 1, got {l_max}")
    return Pmf.from_array(_b_series(model, l_max)[: l_max + 1])


def btilde_pmf(model: BusyPeriodModel, j_max: int) -> Pmf:
    """P(b̃ = j) = Σ_{k >= j+1} P(b = k) / k."""
    if j_max < 0:
        raise ParameterError(f"j_max must be nonnegative, got {j_max}")
    probs = _b_series(model, j_max + 1)
    k = np.arange(probs.size, dtype=np.float64)
    shares = np.zeros_like(probs)
    shares[1:] = probs[1:] / k[1:]
    tails = np.cumsum(shares[::-1])[::-1]
    return Pmf.from_array(tails[1 : j_max + 2])


def b_coefficients(
    model: BusyPeriodModel, l_max: int, radius: float = 1.0, points: int | None = None
) -> FloatArray:
    """
    Taylor coefficients of B at 0 up to l_max by a discrete Cauchy integral on |z| = radius.

    >>> from psqueue.model import validate_params
    >>> c = b_coefficients(BusyPeriodModel(validate_params(0.5)), 2)
    >>> [round(abs(float(v)), 12) for v in c]
    [0.0, 0.333333333333, 0.185185185185]
    """
    z0 = model.params.z0
    if not 0.0 < radius < z0:
        raise ParameterError(f"radius must lie in (0, z0={z0}), got {radius}")
    if l_max < 0:
        raise ParameterError(f"l_max must be nonnegative, got {l_max}")
    if points is None:
        points = 1 << max(12, math.ceil(math.log2(4 * (l_max + 1))))
    if points <= l_max:
        raise ParameterError(f"need more than l_max={l_max} points on the circle, got {points}")
    rho = model.params.rho
    z = radius * np.exp(2j * np.pi * np.arange(points) / points)
    beta = _beta(rho, z)
    values = (1.0 - rho) * beta / (1.0 - rho * beta)
    coeffs = np.fft.fft(values)[: l_max + 1] / points
    return coeffs.real / radius ** np.arange(l_max + 1)


def btilde_gen(model: BusyPeriodModel, z: float, quad_points: int = 64) -> float:
    """
    E z^b̃ = ∫_0^1 (B(t) - B(zt)) / (t(1-z)) dt by Gauss-Legendre on [0, 1].

    >>> from psqueue.model import validate_params
    >>> m = BusyPeriodModel(validate_params(0.5))
    >>> abs(btilde_gen(m, 0.0) - btilde_pmf(m, 0)[0]) < 1e-10
    True
    """
    if not 0.0 <= z < 1.0:
        raise ParameterError(f"generating function of btilde is evaluated for 0 <= z < 1, got {z}")
    rho = model.params.rho
    nodes, weights = leggauss(quad_points)
    t = 0.5 * (nodes + 1.0)

    def B(s: FloatArray) -> FloatArray:
        beta = _beta(rho, s)
        return (1.0 - rho) * beta / (1.0 - rho * beta)

    integrand = (B(t) - B(z * t)) / (t * (1.0 - z))
    return 0.5 * float(weights @ integrand)


def sample_btilde(model: BusyPeriodModel, samples: int, seed: int) -> NDArray[np.int64]:
    """
    Draw b̃: a geometric N0, the M/M/1 walk from N0 + 1 customers down to empty counting departures, then a rank
    chosen uniformly among those departures.
    """
    if samples < 1:
        raise ParameterError(f"samples must be at least 1, got {samples}")
    rho = model.params.rho
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    queue = rng.geometric(1.0 - rho, size=samples).astype(np.int64)
    served = np.zeros(samples, dtype=np.int64)
    active = np.flatnonzero(queue)
    while active.size:
        arrival = rng.random(active.size) < rho / (1.0 + rho)
        queue[active] += np.where(arrival, 1, -1)
        served[active] += ~arrival
        active = active[queue[active] > 0]
    return rng.integers(0, served)
