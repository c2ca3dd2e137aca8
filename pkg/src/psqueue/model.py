import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from psqueue.errors import InconsistentPathError, ParameterError, TruncationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QueueParameters:
    """
    Load of an M/M/1 queue with unit service rate and the constants derived from it.

    >>> p = validate_params(0.5)
    >>> round(p.support_bound, 6), p.z0, round(p.decay_rate, 6)
    (0.942809, 1.125, -0.117783)
    """

    rho: float
    support_bound: float = field(init=False)
    z0: float = field(init=False)
    decay_rate: float = field(init=False)

    def __post_init__(self) -> None:
        rho = self.rho
        if not (isinstance(rho, (int, float)) and math.isfinite(rho) and 0.0 < rho < 1.0):
            raise ParameterError(f"load must satisfy 0 < rho < 1, got {rho}")
        object.__setattr__(self, "rho", float(rho))
        object.__setattr__(self, "support_bound", 2.0 * math.sqrt(rho) / (1.0 + rho))
        object.__setattr__(self, "z0", (1.0 + rho) ** 2 / (4.0 * rho))
        object.__setattr__(self, "decay_rate", math.log(4.0 * rho) - 2.0 * math.log1p(rho))

    @property
    def sqrt_rho(self) -> float:
        return math.sqrt(self.rho)


def validate_params(rho: float) -> QueueParameters:
    """
    >>> round(validate_params(0.2).z0, 12)
    1.8
    >>> validate_params(1.0)
    Traceback (most recent call last):
    ...
    psqueue.errors.ParameterError: load must satisfy 0 < rho < 1, got 1.0
    """
    return QueueParameters(rho)


@dataclass(frozen=True)
class TruncationConfig:
    """Tail-mass target for stationary mixtures, hard cap on the mixing index, and series tolerance."""

    epsilon: float = 1e-10
    n_cap: int = 200
    series_tol: float = 1e-14

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if self.n_cap < 1:
            raise ParameterError(f"n_cap must be at least 1, got {self.n_cap}")
        if not self.series_tol > 0:
            raise ParameterError(f"series_tol must be positive, got {self.series_tol}")


@dataclass(frozen=True, eq=False)
class Pmf:
    """
    Finite probability table over offset, offset+1, ... with the unresolved mass kept aside.

    >>> p = Pmf.from_array([0.5, 0.25, 0.125])
    >>> p[1], p[7], p.tail_mass
    (0.25, 0.0, 0.125)
    """

    offset: int
    probs: NDArray[np.float64]
    tail_mass: float

    def __post_init__(self) -> None:
        self.probs.setflags(write=False)

    @classmethod
    def from_array(
        cls,
        probs: ArrayLike,
        offset: int = 0,
        tail_mass: float | None = None,
        clip_tol: float = 1e-12,
    ) -> "Pmf":
        values = np.array(probs, dtype=np.float64)
        if values.ndim != 1:
            raise ParameterError(f"probabilities must form a flat sequence, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ParameterError("probabilities must be finite")
        lowest = values.min(initial=0.0)
        if lowest < -clip_tol or values.max(initial=0.0) > 1.0 + clip_tol:
            raise ParameterError(f"probabilities must lie in [0, 1], got range [{lowest}, {values.max()}]")
        if lowest < 0.0:
            logger.warning("clipping negative round-off down to %.3g in probability table", lowest)
        values = np.clip(values, 0.0, 1.0)
        if tail_mass is None:
            tail_mass = max(0.0, 1.0 - math.fsum(values))
        return cls(offset=offset, probs=values, tail_mass=float(tail_mass))

    def __getitem__(self, index: int) -> float:
        k = index - self.offset
        if 0 <= k < len(self.probs):
            return float(self.probs[k])
        return 0.0

    def __len__(self) -> int:
        return len(self.probs)

    @property
    def indices(self) -> NDArray[np.int64]:
        return np.arange(self.offset, self.offset + len(self.probs))

    @property
    def mass(self) -> float:
        return math.fsum(self.probs)

    @property
    def max_index(self) -> int:
        return self.offset + len(self.probs) - 1

    def check(self, tol: float) -> None:
        """Raise unless stored mass plus tail mass is within tol of one."""
        total = self.mass + self.tail_mass
        if abs(total - 1.0) > tol:
            raise ParameterError(f"mass plus tail must be 1 within {tol}, got {total}")


class MeanReport(NamedTuple):
    value: float
    unresolved_tail: float


def pmf_mean(p: Pmf) -> MeanReport:
    """
    Mean over the stored entries; the tail contributes at least unresolved_tail more.

    >>> pmf_mean(Pmf.from_array([1.0]))
    MeanReport(value=0.0, unresolved_tail=0.0)
    """
    value = math.fsum(p.indices * p.probs)
    return MeanReport(value, p.tail_mass * (p.max_index + 1))


def alpha_delta_from_path(n0: int, kappa: int, nu: int) -> tuple[int, int]:
    """
    Arrivals and departures seen by the tagged customer from its absorption data.

    >>> alpha_delta_from_path(2, 3, 0)
    (0, 2)
    >>> alpha_delta_from_path(0, 2, 0)
    Traceback (most recent call last):
    ...
    psqueue.errors.InconsistentPathError: kappa + nu - n0 - 1 must be even and nonnegative, got 1
    """
    if kappa < 1 or nu < 0 or n0 < 0:
        raise InconsistentPathError(f"need kappa >= 1, nu >= 0, n0 >= 0, got ({n0}, {kappa}, {nu})")
    twice_alpha = kappa + nu - n0 - 1
    twice_delta = kappa - nu + n0 - 1
    if twice_alpha < 0 or twice_alpha % 2:
        raise InconsistentPathError(f"kappa + nu - n0 - 1 must be even and nonnegative, got {twice_alpha}")
    if twice_delta < 0:
        raise InconsistentPathError(f"kappa - nu + n0 - 1 must be nonnegative, got {twice_delta}")
    return twice_alpha // 2, twice_delta // 2


def path_from_alpha_delta(n0: int, alpha: int, delta: int) -> tuple[int, int]:
    """
    >>> path_from_alpha_delta(0, 1, 1)
    (3, 0)
    """
    if n0 < 0 or alpha < 0 or delta < 0:
        raise InconsistentPathError(f"need n0, alpha, delta >= 0, got ({n0}, {alpha}, {delta})")
    nu = n0 + alpha - delta
    if nu < 0:
        raise InconsistentPathError(f"more departures ({delta}) than customers seen ({n0 + alpha})")
    return alpha + delta + 1, nu


def stationary_weights(params: QueueParameters, epsilon: float) -> tuple[NDArray[np.float64], int]:
    """
    Weights (1-rho) rho^n of the initial population for n <= N, with N minimal such that rho^(N+1) < epsilon.

    >>> w, N = stationary_weights(validate_params(0.5), 1e-3)
    >>> N, float(w.sum())
    (9, 0.9990234375)
    """
    if not 0.0 < epsilon < 1.0:
        raise ParameterError(f"epsilon must lie in (0, 1), got {epsilon}")
    N = max(0, math.ceil(math.log(epsilon) / math.log(params.rho)) - 1)
    while params.rho ** (N + 1) >= epsilon:
        N += 1
    n = np.arange(N + 1)
    return (1.0 - params.rho) * params.rho**n, N


def outer_truncation(params: QueueParameters, trunc: TruncationConfig) -> tuple[NDArray[np.float64], int]:
    """Stationary weights for trunc.epsilon, refusing to mix more than trunc.n_cap + 1 populations."""
    weights, N = stationary_weights(params, trunc.epsilon)
    if N > trunc.n_cap:
        achieved = params.rho ** (trunc.n_cap + 1)
        raise TruncationError(
            f"epsilon={trunc.epsilon:g} needs N={N} initial populations but n_cap={trunc.n_cap}; "
            f"achieved tail mass {achieved:.3g}",
            achieved,
        )
    logger.debug("outer truncation at N=%d for rho=%g, epsilon=%g", N, params.rho, trunc.epsilon)
    return weights, N
