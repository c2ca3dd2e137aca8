"""Pollaczek polynomials P_n(u; a, b), the scaled family Q_n(x) and their generating functions."""

import math
from typing import overload

import numpy as np
from numpy.typing import ArrayLike, NDArray

from psqueue.errors import ParameterError, SingularityError
from psqueue.model import QueueParameters

FloatArray = NDArray[np.float64]


def _scalar_or_array(values: FloatArray, shape: tuple[int, ...] | None = None) -> float | FloatArray:
    if shape is not None:
        values = values.reshape(shape)
    return float(values) if values.ndim == 0 else values


@overload
def eval_Q(n: int, x: float, params: QueueParameters) -> float: ...
@overload
def eval_Q(n: int, x: ArrayLike, params: QueueParameters) -> float | FloatArray: ...
def eval_Q(n: int, x: ArrayLike, params: QueueParameters) -> float | FloatArray:
    """
    Q_n(x) by the forward three-term recurrence of the generator of the tagged chain.

    >>> from psqueue.model import validate_params
    >>> p = validate_params(0.5)
    >>> eval_Q(0, 0.7, p), round(eval_Q(1, 0.1, p), 12), eval_Q(2, 0.0, p)
    (1.0, 0.3, -1.0)
    """
    if n < 0:
        raise ParameterError(f"polynomial degree must be nonnegative, got {n}")
    rho = params.rho
    x = np.asarray(x, dtype=np.float64)
    prev, curr = np.zeros_like(x), np.ones_like(x)
    for k in range(n):
        prev, curr = curr, ((1.0 + rho) / rho) * x * curr - (k / ((k + 1) * rho)) * prev
    return _scalar_or_array(curr)


def eval_pollaczek(n: int, u: ArrayLike, a: float = 1.0, b: float = 0.0) -> float | FloatArray:
    """
    P_n(u; a, b) from (k+1) P_{k+1} = ((2k+1+a) u + b) P_k - k P_{k-1}.

    >>> eval_pollaczek(1, 0.25), eval_pollaczek(2, 0.0)
    (0.5, -0.5)
    """
    if n < 0:
        raise ParameterError(f"polynomial degree must be nonnegative, got {n}")
    u = np.asarray(u, dtype=np.float64)
    prev, curr = np.zeros_like(u), np.ones_like(u)
    for k in range(n):
        prev, curr = curr, (((2 * k + 1 + a) * u + b) * curr - k * prev) / (k + 1)
    return _scalar_or_array(curr)


def pollaczek_matrix(n_max: int, u: ArrayLike, a: float = 1.0, b: float = 0.0) -> FloatArray:
    """Rows P_0(u), ..., P_{n_max}(u) evaluated at every point of u."""
    u = np.asarray(u, dtype=np.float64)
    rows = np.empty((n_max + 1, u.size))
    rows[0] = 1.0
    if n_max >= 1:
        rows[1] = (1.0 + a) * u + b
    for k in range(1, n_max):
        rows[k + 1] = (((2 * k + 1 + a) * u + b) * rows[k] - k * rows[k - 1]) / (k + 1)
    return rows


def _log_cosh(t: FloatArray) -> FloatArray:
    return np.logaddexp(t, -t) - math.log(2.0)


def pollaczek_weight(u: ArrayLike, a: float = 1.0, b: float = 0.0) -> float | FloatArray:
    """
    Orthogonality weight e^{(2θ-π)τ} / (2 cosh πτ) with u = cos θ and τ = (a cos θ + b) / (2 sin θ).

    Vanishes at u = ±1 for admissible a > |b|.

    >>> round(pollaczek_weight(0.0), 12)
    0.5
    """
    if not a > abs(b):
        raise ParameterError(f"Pollaczek parameters need a > |b|, got a={a}, b={b}")
    shape = np.shape(u)
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    if np.any(np.abs(u) > 1.0):
        raise ParameterError("Pollaczek weight is supported on [-1, 1]")
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    theta = np.arccos(u[inside])
    tau = (a * np.cos(theta) + b) / (2.0 * np.sin(theta))
    out[inside] = np.exp((2.0 * theta - np.pi) * tau - _log_cosh(np.pi * tau) - math.log(2.0))
    return _scalar_or_array(out, shape)


def phi(theta: ArrayLike, params: QueueParameters) -> float | FloatArray:
    """
    Argument φ(θ) in 1 - √ρ e^{iθ} = |1 - √ρ e^{iθ}| e^{-iφ(θ)}, continuous on [0, π].

    >>> from psqueue.model import validate_params
    >>> round(phi(math.pi / 2, validate_params(0.25)), 12) == round(math.atan(0.5), 12)
    True
    >>> phi(0.0, validate_params(0.5))
    0.0
    """
    theta = np.asarray(theta, dtype=np.float64)
    if np.any((theta < 0.0) | (theta > np.pi)):
        raise ParameterError("theta must lie in [0, pi]")
    s = params.sqrt_rho
    return _scalar_or_array(np.arctan2(s * np.sin(theta), 1.0 - s * np.cos(theta)))


def gen_P(theta: ArrayLike, z: float) -> float | FloatArray:
    """
    Generating function Σ P_n(cos θ; 1, 0) z^n in closed form, with its limits at θ = 0 and θ = π.

    >>> round(gen_P(0.0, 0.5), 6), round(gen_P(math.pi / 2, 0.6), 6), gen_P(1.0, 0.0)
    (5.436564, 0.857493, 1.0)
    """
    shape = np.shape(theta)
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    if np.any((theta < 0.0) | (theta > np.pi)):
        raise ParameterError("theta must lie in [0, pi]")
    at_zero = theta == 0.0
    at_pi = theta == np.pi
    interior = ~(at_zero | at_pi)
    if np.any(at_zero) and z >= 1.0:
        raise SingularityError(f"generating function at theta=0 needs z < 1, got {z}", z)
    if np.any(at_pi) and z <= -1.0:
        raise SingularityError(f"generating function at theta=pi needs z > -1, got {z}", z)
    if np.any(interior) and abs(z) >= 1.0:
        raise SingularityError(f"generating function needs |z| < 1, got {z}", z)

    out = np.empty_like(theta)
    t = theta[interior]
    sin_t, cos_t = np.sin(t), np.cos(t)
    angle = np.arctan2(z * sin_t, 1.0 - z * cos_t)
    out[interior] = np.exp(cos_t / sin_t * angle - 0.5 * np.log1p(z * z - 2.0 * z * cos_t))
    if np.any(at_zero):
        out[at_zero] = math.exp(z / (1.0 - z)) / (1.0 - z)
    if np.any(at_pi):
        out[at_pi] = math.exp(-z / (1.0 + z)) / (1.0 + z)
    return _scalar_or_array(out, shape)


def _theta_of(x: ArrayLike, params: QueueParameters) -> FloatArray:
    x = np.asarray(x, dtype=np.float64)
    if np.any(np.abs(x) >= params.support_bound):
        raise ParameterError(f"x must lie in the open support (-{params.support_bound}, {params.support_bound})")
    return np.arccos(x / params.support_bound)


def gen_Q(x: ArrayLike, z: float, params: QueueParameters) -> float | FloatArray:
    """
    Generating function Σ Q_n(x) z^n, convergent for |z| < √ρ.

    >>> from psqueue.model import validate_params
    >>> gen_Q(0.3, 0.0, validate_params(0.5))
    1.0
    """
    if abs(z) >= params.sqrt_rho:
        raise SingularityError(f"series in z diverges for |z| >= sqrt(rho) = {params.sqrt_rho:.6g}, got {z}", z)
    return gen_P(_theta_of(x, params), z / params.sqrt_rho)


def gen_Q_ode_residual(x: float, z: float, params: QueueParameters, h: float = 1e-5) -> float:
    """
    Residual of (z² - (1+ρ)xz + ρ) ∂𝒬/∂z + (z - (1+ρ)x) 𝒬 = 0, by central differences.
    """
    rho = params.rho
    q = float(gen_Q(x, z, params))
    dq = (float(gen_Q(x, z + h, params)) - float(gen_Q(x, z - h, params))) / (2.0 * h)
    return (z * z - (1.0 + rho) * x * z + rho) * dq + (z - (1.0 + rho) * x) * q
