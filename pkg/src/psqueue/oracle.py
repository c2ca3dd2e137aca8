"""
Brute-force ground truth: the absorbed chain of the tagged customer, truncated at M other customers.

Only elementary linear algebra is used here so that every spectral result can be checked against it.
"""

import logging
from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import solve_banded
from scipy.special import gammaincc

from psqueue.errors import ParameterError, StateSpaceError, TruncationError
from psqueue.model import Pmf, QueueParameters, TruncationConfig, outer_truncation

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

STATIONARY_TAIL = 1e-14
MAX_STEPS = 1_000_000
MAX_STATES = 1 << 16


@dataclass(frozen=True, eq=False)
class TruncatedChain:
    """
    Jump chain of the number of other customers while the tagged one is present, states 0..M.

    `up` is a_{n,n+1}, `down[n]` is a_{n,n-1} and `absorb[n]` the probability that the tagged customer leaves.
    The upward move out of M is dropped; `leak_bound` is the mass that escapes from M // 2, which bounds the
    escape from every start n0 <= M / 2.
    """

    rho: float
    M: int
    up: float
    down: FloatArray
    absorb: FloatArray
    leak_bound: float
    tol: float


class _AbsorptionWalk:
    """Row vectors ᵗe_{n0} A^k for several starts, advanced one tridiagonal product at a time."""

    def __init__(self, chain: TruncatedChain, starts: ArrayLike) -> None:
        self.chain = chain
        starts = np.atleast_1d(np.asarray(starts, dtype=np.int64))
        self.mass = np.zeros((starts.size, chain.M + 1))
        self.mass[np.arange(starts.size), starts] = 1.0
        self.leak = np.zeros(starts.size)
        self.steps = 0

    @property
    def residual(self) -> FloatArray:
        return self.mass.sum(axis=1)

    def advance(self) -> FloatArray:
        """Mass absorbed at the next event, per start and per final state; then move the survivors."""
        chain, v = self.chain, self.mass
        absorbed = v * chain.absorb
        moved = np.zeros_like(v)
        moved[:, 1:] += v[:, :-1] * chain.up
        moved[:, :-1] += v[:, 1:] * chain.down[1:]
        self.leak += v[:, -1] * chain.up
        self.mass = moved
        self.steps += 1
        return absorbed

    def run(self, max_steps: int = MAX_STEPS) -> Iterator[tuple[int, FloatArray]]:
        """Advance until the unabsorbed mass of every start falls below the chain tolerance."""
        while self.residual.max() >= self.chain.tol:
            if self.steps >= max_steps:
                residual = float(self.residual.max())
                raise TruncationError(f"{max_steps} steps left unabsorbed mass {residual:.3g}", residual)
            yield self.steps + 1, self.advance()


def _leak_from(chain: TruncatedChain, start: int) -> float:
    walk = _AbsorptionWalk(chain, [start])
    for _ in walk.run():
        pass
    return float(walk.leak[0])


def build_chain(params: QueueParameters, M: int, tol: float = 1e-13) -> TruncatedChain:
    """
    >>> from psqueue.model import validate_params
    >>> c = build_chain(validate_params(0.5), 8)
    >>> round(float(c.absorb[0]), 6), round(c.up, 6), float(c.down[0])
    (0.666667, 0.333333, 0.0)
    """
    if M < 1:
        raise ParameterError(f"state cap must be at least 1, got {M}")
    rho = params.rho
    n = np.arange(M + 1, dtype=np.float64)
    down = n / ((n + 1.0) * (1.0 + rho))
    absorb = 1.0 / ((n + 1.0) * (1.0 + rho))
    chain = TruncatedChain(rho, M, rho / (1.0 + rho), down, absorb, 0.0, tol)
    leak = _leak_from(chain, M // 2)
    logger.debug("chain rho=%g M=%d leaks %.3g from state %d", rho, M, leak, M // 2)
    return TruncatedChain(rho, M, chain.up, down, absorb, leak, tol)


def build_chain_for(
    params: QueueParameters, trunc: TruncationConfig, tol: float = 1e-13, min_states: int = 16
) -> TruncatedChain:
    """Smallest power-of-two cap holding the stationary mass and the mixed starts, doubled until it stops leaking."""
    _, N = outer_truncation(params, trunc)
    M = 16
    while M < min_states:
        M *= 2
    while params.rho**M >= STATIONARY_TAIL or M < 2 * N:
        M *= 2
    while True:
        chain = build_chain(params, M, tol)
        if chain.leak_bound < tol:
            return chain
        if 2 * M > MAX_STATES:
            raise StateSpaceError(f"state cap {M} still leaks {chain.leak_bound:.3g}", chain.leak_bound)
        logger.debug("doubling state cap to %d (leak %.3g)", 2 * M, chain.leak_bound)
        M *= 2


def _check_start(chain: TruncatedChain, n0: int) -> None:
    if not 0 <= n0 <= chain.M // 2:
        raise ParameterError(f"initial population must lie in [0, M/2] = [0, {chain.M // 2}], got {n0}")


def _check_leak(leak: float, chain: TruncatedChain) -> None:
    if leak > chain.tol:
        raise StateSpaceError(f"truncated chain at M={chain.M} leaked {leak:.3g}; enlarge M", leak)


@dataclass(frozen=True, eq=False)
class JointTable:
    """P(κ = k, ν = m | N0 = n0) stored at probs[k - 1, m]."""

    n0: int
    probs: FloatArray
    residual: float
    leak: float

    def __getitem__(self, key: tuple[int, int]) -> float:
        k, m = key
        if 1 <= k <= self.probs.shape[0] and 0 <= m < self.probs.shape[1]:
            return float(self.probs[k - 1, m])
        return 0.0

    def kappa(self) -> Pmf:
        return Pmf.from_array(self.probs.sum(axis=1), offset=1)

    def nu(self) -> Pmf:
        return Pmf.from_array(self.probs.sum(axis=0))


def oracle_joint(chain: TruncatedChain, n0: int, k_max: int | None = None) -> JointTable:
    """
    >>> from psqueue.model import validate_params
    >>> t = oracle_joint(build_chain(validate_params(0.5), 16), 0, 2)
    >>> round(t[1, 0], 12), round(t[2, 1], 12), t[2, 0]
    (0.666666666667, 0.111111111111, 0.0)
    """
    _check_start(chain, n0)
    walk = _AbsorptionWalk(chain, [n0])
    rows = []
    for k, absorbed in walk.run():
        rows.append(absorbed[0])
        if k_max is not None and k >= k_max:
            break
    leak = float(walk.leak[0])
    _check_leak(leak, chain)
    probs = np.array(rows) if rows else np.zeros((0, chain.M + 1))
    return JointTable(n0, probs, float(walk.residual[0]), leak)


def oracle_nu(chain: TruncatedChain, n0: int) -> Pmf:
    return oracle_joint(chain, n0).nu()


def oracle_kappa(chain: TruncatedChain, n0: int) -> Pmf:
    return oracle_joint(chain, n0).kappa()


def oracle_nu_resolvent(chain: TruncatedChain, n0: int) -> Pmf:
    """ν from ᵗe_{n0} (I - A)^{-1}, solved as a banded system, weighted by the absorption probabilities."""
    _check_start(chain, n0)
    size = chain.M + 1
    banded = np.zeros((3, size))
    banded[0, 1:] = -chain.down[1:]
    banded[1, :] = 1.0
    banded[2, :-1] = -chain.up
    rhs = np.zeros(size)
    rhs[n0] = 1.0
    visits = solve_banded((1, 1), banded, rhs)
    return Pmf.from_array(visits * chain.absorb)


def _pushforward(
    absorbed: FloatArray, starts: NDArray[np.int64], k: int, j_max: int, target: FloatArray, sign: int
) -> None:
    m = np.arange(absorbed.shape[1])[None, :]
    twice = k - 1 + sign * (m - starts[:, None])
    index = twice // 2
    mask = (absorbed > 0.0) & (twice % 2 == 0) & (index >= 0) & (index <= j_max)
    np.add.at(target, index[mask], absorbed[mask])


def oracle_alpha_delta(chain: TruncatedChain, j_max: int, trunc: TruncationConfig) -> tuple[Pmf, Pmf]:
    """
    Stationary laws of α = (κ + ν - n0 - 1) / 2 and δ = (κ - ν + n0 - 1) / 2, mixing n0 with weights (1-ρ)ρ^n0.
    """
    params = QueueParameters(chain.rho)
    weights, N = outer_truncation(params, trunc)
    if N > chain.M // 2:
        raise ParameterError(f"mixing {N + 1} initial populations needs M >= {2 * N}, got M={chain.M}")
    starts = np.arange(N + 1)
    walk = _AbsorptionWalk(chain, starts)
    alpha = np.zeros(j_max + 1)
    delta = np.zeros(j_max + 1)
    for k, absorbed in walk.run():
        weighted = absorbed * weights[:, None]
        _pushforward(weighted, starts, k, j_max, alpha, +1)
        _pushforward(weighted, starts, k, j_max, delta, -1)
    leak = float(walk.leak @ weights)
    _check_leak(leak, chain)
    logger.debug("oracle alpha/delta: %d steps, leak %.3g, residual %.3g", walk.steps, leak, walk.residual @ weights)
    return Pmf.from_array(alpha), Pmf.from_array(delta)


def oracle_stationary_marginals(chain: TruncatedChain, trunc: TruncationConfig) -> tuple[Pmf, Pmf]:
    """Laws of κ and ν under the stationary initial population."""
    params = QueueParameters(chain.rho)
    weights, N = outer_truncation(params, trunc)
    if N > chain.M // 2:
        raise ParameterError(f"mixing {N + 1} initial populations needs M >= {2 * N}, got M={chain.M}")
    walk = _AbsorptionWalk(chain, np.arange(N + 1))
    kappa = []
    nu = np.zeros(chain.M + 1)
    for _, absorbed in walk.run():
        weighted = weights @ absorbed
        kappa.append(weighted.sum())
        nu += weighted
    _check_leak(float(walk.leak @ weights), chain)
    return Pmf.from_array(kappa, offset=1), Pmf.from_array(nu)


def _erlang_mixture_tail(kappa: Pmf, rate: float, y: ArrayLike) -> float | FloatArray:
    y = np.asarray(y, dtype=np.float64)
    if np.any(y < 0.0):
        raise ParameterError("sojourn tail needs y >= 0")
    k = kappa.indices.astype(np.float64)
    tails = gammaincc(k[:, None], rate * np.atleast_1d(y)[None, :])
    values = kappa.probs @ tails
    return float(values[0]) if y.ndim == 0 else values


def oracle_sojourn_tail(chain: TruncatedChain, n0: int, y: ArrayLike) -> float | FloatArray:
    """
    P(W_{n0} > y) as a mixture of Erlang(k, 1+ρ) tails over the law of κ.

    >>> from psqueue.model import validate_params
    >>> round(oracle_sojourn_tail(build_chain(validate_params(0.5), 64), 0, 0.0), 12)
    1.0
    """
    return _erlang_mixture_tail(oracle_kappa(chain, n0), 1.0 + chain.rho, y)


def oracle_stationary_sojourn_tail(chain: TruncatedChain, y: ArrayLike, trunc: TruncationConfig) -> float | FloatArray:
    kappa, _ = oracle_stationary_marginals(chain, trunc)
    return _erlang_mixture_tail(kappa, 1.0 + chain.rho, y)


def oracle_sojourn_mean(chain: TruncatedChain, trunc: TruncationConfig) -> float:
    """E W = E κ / (1+ρ) under the stationary initial population."""
    kappa, _ = oracle_stationary_marginals(chain, trunc)
    return float(kappa.indices @ kappa.probs) / (1.0 + chain.rho)
