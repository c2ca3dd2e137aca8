import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from numpy.typing import ArrayLike, NDArray

from psqueue.errors import CapacityError, ParameterError, QuadratureError
from psqueue.model import QueueParameters
from psqueue.spectral.polynomials import _log_cosh, _scalar_or_array

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

MASS_TOLERANCE = 1e-6


def measure_density_theta(theta: ArrayLike, params: QueueParameters | None = None) -> float | FloatArray:
    """
    dψ/dθ = sin θ / cosh(π cot θ / 2) · e^{cot θ (θ - π/2)}, evaluated in log space.

    The density does not depend on the load in this parametrization.

    >>> measure_density_theta(math.pi / 2)
    1.0
    >>> round(measure_density_theta(math.pi / 4), 6)
    0.128487
    >>> measure_density_theta(0.0)
    0.0
    """
    shape = np.shape(theta)
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    if np.any((theta < 0.0) | (theta > np.pi)):
        raise ParameterError("theta must lie in [0, pi]")
    out = np.zeros_like(theta)
    inside = (theta > 0.0) & (theta < np.pi)
    t = theta[inside]
    sin_t = np.sin(t)
    cot_t = np.cos(t) / sin_t
    out[inside] = np.exp(np.log(sin_t) - _log_cosh(0.5 * np.pi * cot_t) + cot_t * (t - 0.5 * np.pi))
    out[theta == 0.5 * np.pi] = 1.0
    return _scalar_or_array(out, shape)


def measure_density_x(x: ArrayLike, params: QueueParameters) -> float | FloatArray:
    """
    dψ/dx on the support [-2√ρ/(1+ρ), 2√ρ/(1+ρ)], zero outside.

    >>> from psqueue.model import validate_params
    >>> measure_density_x(0.95, validate_params(0.5))
    0.0
    """
    shape = np.shape(x)
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    bound = params.support_bound
    out = np.zeros_like(x)
    inside = np.abs(x) < bound
    theta = np.arccos(x[inside] / bound)
    out[inside] = np.asarray(measure_density_theta(theta)) / (bound * np.sin(theta))
    return _scalar_or_array(out, shape)


@lru_cache(maxsize=16)
def _gauss_legendre(order: int) -> tuple[FloatArray, FloatArray]:
    return leggauss(order)


def _panel_edges(panels: int, levels: int) -> FloatArray:
    """Uniform panel edges on [0, π] whose outermost panels are split geometrically toward the endpoints."""
    h = np.pi / panels
    inner = h / 2.0 ** np.arange(levels, 0, -1)
    left = np.concatenate(([0.0], inner))
    uniform = h * np.arange(1, panels)
    right = np.pi - left[::-1]
    return np.concatenate((left, uniform, right))


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    """
    Composite Gauss-Legendre rule in θ for integrals against dψ.

    `weights` already carry the density; `raw_weights` integrate plain dθ on the same nodes.
    """

    rho: float
    support: tuple[float, float]
    panels: int
    order: int
    levels: int
    theta: FloatArray
    raw_weights: FloatArray
    weights: FloatArray

    @property
    def params(self) -> QueueParameters:
        return QueueParameters(self.rho)

    @property
    def cos_theta(self) -> FloatArray:
        return np.cos(self.theta)

    @property
    def x(self) -> FloatArray:
        return self.support[1] * np.cos(self.theta)

    @property
    def max_degree(self) -> int:
        """Largest polynomial degree in cos θ this rule resolves to double precision."""
        return int(self.panels * self.order / (1.5 * math.pi))

    def density_theta(self, theta: ArrayLike) -> float | FloatArray:
        return measure_density_theta(theta)

    def density_x(self, x: ArrayLike) -> float | FloatArray:
        return measure_density_x(x, self.params)

    def integrate(self, values: ArrayLike) -> FloatArray | float:
        """Integrate node values (last axis runs over nodes) against dψ."""
        return np.asarray(values) @ self.weights

    def require_degree(self, degree: int) -> None:
        if degree > self.max_degree:
            raise CapacityError(
                f"integrand degree {degree} exceeds what {self.panels}x{self.order} nodes resolve ({self.max_degree})"
            )


def build_quadrature(params: QueueParameters, panels: int = 64, order: int = 20, levels: int = 24) -> SpectralMeasure:
    """
    >>> from psqueue.model import validate_params
    >>> m = build_quadrature(validate_params(0.5))
    >>> abs(float(m.weights.sum()) - 1.0) < 1e-10
    True
    """
    if panels < 1 or order < 2:
        raise ParameterError(f"need panels >= 1 and order >= 2, got panels={panels}, order={order}")
    if panels < 2:
        levels = 0
    edges = _panel_edges(panels, levels) if panels >= 2 else np.array([0.0, np.pi])
    nodes, gauss_weights = _gauss_legendre(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    theta = (0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)).ravel()
    raw = (0.5 * (hi - lo) * gauss_weights).ravel()
    weights = raw * np.asarray(measure_density_theta(theta))

    residual = abs(math.fsum(weights) - 1.0)
    if residual > MASS_TOLERANCE:
        raise QuadratureError(f"total mass of dpsi off by {residual:.3g} with {panels}x{order} nodes", residual)
    logger.debug("quadrature %dx%d (+%d refinements), mass residual %.2e", panels, order, levels, residual)
    bound = params.support_bound
    return SpectralMeasure(params.rho, (-bound, bound), panels, order, levels, theta, raw, weights)


def refined_for_degree(measure: SpectralMeasure, degree: int) -> SpectralMeasure:
    """The same rule, with enough panels for integrands of the given degree in cos θ."""
    needed = math.ceil(1.5 * degree * math.pi / measure.order)
    if needed <= measure.panels:
        return measure
    logger.debug("refining quadrature from %d to %d panels for degree %d", measure.panels, needed, degree)
    return build_quadrature(QueueParameters(measure.rho), needed, measure.order, measure.levels)


def quadrature_moments(measure: SpectralMeasure, n_max: int) -> FloatArray:
    """
    μ_0, ..., μ_{n_max} as ∫ x^n dψ.

    >>> from psqueue.model import validate_params
    >>> mu = quadrature_moments(build_quadrature(validate_params(0.5)), 3)
    >>> [round(abs(float(v)), 10) for v in mu]
    [1.0, 0.0, 0.1111111111, 0.0]
    """
    measure = refined_for_degree(measure, n_max)
    powers = measure.x[None, :] ** np.arange(n_max + 1)[:, None]
    return powers @ measure.weights
