"""
Monte Carlo replications of a tagged customer in the M/M/1-PS queue, simulated on the embedded jump chain.

While the tagged customer is present with n others, the next event is an arrival with probability ρ/(1+ρ) and
otherwise a departure, the leaving customer being uniform among the n+1 present; holding times are Exp(1+ρ).
"""

import logging
import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from numpy.typing import NDArray
from scipy import stats

from psqueue.errors import ParameterError, SimulationInvariantError
from psqueue.model import Pmf, QueueParameters
from psqueue.workers import run_blocks

logger = logging.getLogger(__name__)

IntArray = NDArray[np.int64]

POPULATION_TAIL = 1e-15
BUFFER = 1024


@dataclass(frozen=True)
class TaggedRecord:
    """
    >>> TaggedRecord(n0=0, alpha=1, delta=1, kappa=3, nu=0, sojourn=1.5).kappa
    3
    >>> TaggedRecord(n0=0, alpha=1, delta=0, kappa=3, nu=1, sojourn=1.5)
    Traceback (most recent call last):
    ...
    psqueue.errors.SimulationInvariantError: kappa=3 but alpha + delta + 1 = 2
    """

    n0: int
    alpha: int
    delta: int
    kappa: int
    nu: int
    sojourn: float

    def __post_init__(self) -> None:
        if self.kappa != self.alpha + self.delta + 1:
            raise SimulationInvariantError(f"kappa={self.kappa} but alpha + delta + 1 = {self.alpha + self.delta + 1}")
        if self.nu < 0:
            raise SimulationInvariantError(f"nu={self.nu}: more departures than customers seen")
        if self.nu != self.n0 + self.alpha - self.delta:
            raise SimulationInvariantError(f"nu={self.nu} but n0 + alpha - delta = {self.n0 + self.alpha - self.delta}")
        if not self.sojourn > 0.0:
            raise SimulationInvariantError(f"sojourn must be positive, got {self.sojourn}")


class EventSource(Protocol):
    """The randomness consumed by one replication."""

    def initial_population(self) -> int: ...

    def arrival_first(self) -> bool: ...

    def tagged_departs(self, others: int) -> bool: ...

    def holding_time(self) -> float: ...


def population_cap(params: QueueParameters) -> int:
    """
    Smallest n with ρ^n < 1e-15; initial populations beyond it are lumped onto it.

    >>> from psqueue.model import validate_params
    >>> population_cap(validate_params(0.5))
    50
    """
    return math.floor(math.log(POPULATION_TAIL) / math.log(params.rho)) + 1


class GeneratorEvents:
    """EventSource drawing buffered uniforms and exponentials from a numpy Generator."""

    def __init__(self, params: QueueParameters, rng: np.random.Generator, buffer: int = BUFFER) -> None:
        self._params = params
        self._rng = rng
        self._buffer = buffer
        self._arrival = params.rho / (1.0 + params.rho)
        self._rate = 1.0 + params.rho
        self._cap = population_cap(params)
        self._log_rho = math.log(params.rho)
        self._uniforms = rng.random(buffer)
        self._u = 0
        self._exponentials = rng.standard_exponential(buffer)
        self._e = 0

    def _uniform(self) -> float:
        if self._u == self._buffer:
            self._uniforms = self._rng.random(self._buffer)
            self._u = 0
        value = self._uniforms[self._u]
        self._u += 1
        return float(value)

    def initial_population(self) -> int:
        # P(N0 >= n) = ρ^n; 1 - U lies in (0, 1]
        n0 = math.floor(math.log(1.0 - self._uniform()) / self._log_rho)
        return min(n0, self._cap)

    def arrival_first(self) -> bool:
        return self._uniform() < self._arrival

    def tagged_departs(self, others: int) -> bool:
        return self._uniform() * (others + 1) < 1.0

    def holding_time(self) -> float:
        if self._e == self._buffer:
            self._exponentials = self._rng.standard_exponential(self._buffer)
            self._e = 0
        value = self._exponentials[self._e]
        self._e += 1
        return float(value) / self._rate


def block_events(params: QueueParameters, seed: int, block: int) -> GeneratorEvents:
    """Counter-based Philox stream keyed by (seed, block)."""
    sequence = np.random.SeedSequence(seed, spawn_key=(block,))
    return GeneratorEvents(params, np.random.Generator(np.random.Philox(sequence)))


def simulate_tagged(params: QueueParameters, events: EventSource, n0: int | None = None) -> TaggedRecord:
    """Run one tagged customer from its arrival to its departure."""
    start = events.initial_population() if n0 is None else n0
    if start < 0:
        raise ParameterError(f"initial population must be nonnegative, got {start}")
    others = start
    alpha = delta = 0
    sojourn = 0.0
    while True:
        sojourn += events.holding_time()
        if events.arrival_first():
            alpha += 1
            others += 1
        elif events.tagged_departs(others):
            break
        else:
            delta += 1
            others -= 1
    return TaggedRecord(start, alpha, delta, alpha + delta + 1, others, sojourn)


@dataclass(frozen=True, eq=False)
class BlockResult:
    """Histograms and sojourn moments (count, mean, sum of squared deviations) of one block of replications."""

    alpha: IntArray
    delta: IntArray
    nu: IntArray
    kappa: IntArray
    count: int
    mean: float
    m2: float


def simulate_block(job: tuple[float, int, int, int]) -> BlockResult:
    rho, seed, block, size = job
    params = QueueParameters(rho)
    events = block_events(params, seed, block)
    records = [simulate_tagged(params, events) for _ in range(size)]
    names = ("alpha", "delta", "nu", "kappa")
    columns = {name: np.array([getattr(r, name) for r in records], dtype=np.int64) for name in names}
    sojourns = np.array([r.sojourn for r in records])
    mean = math.fsum(sojourns) / size
    m2 = math.fsum((sojourns - mean) ** 2)
    return BlockResult(
        alpha=np.bincount(columns["alpha"]),
        delta=np.bincount(columns["delta"]),
        nu=np.bincount(columns["nu"]),
        kappa=np.bincount(columns["kappa"]),
        count=size,
        mean=mean,
        m2=m2,
    )


@dataclass(frozen=True, eq=False)
class EmpiricalPmf:
    """Counts over 0, 1, ..., with probabilities p = count / R and standard errors √(p(1-p)/R)."""

    counts: IntArray
    replications: int

    @property
    def probs(self) -> NDArray[np.float64]:
        return self.counts / self.replications

    @property
    def stderr(self) -> NDArray[np.float64]:
        p = self.probs
        return np.sqrt(p * (1.0 - p) / self.replications)

    def __getitem__(self, index: int) -> float:
        return float(self.probs[index]) if 0 <= index < len(self.counts) else 0.0

    def to_pmf(self) -> Pmf:
        return Pmf.from_array(self.probs, tail_mass=0.0)


@dataclass(frozen=True)
class SojournSummary:
    mean: float
    variance: float
    stderr: float
    mean_ci: tuple[float, float]
    variance_ci: tuple[float, float]


@dataclass(frozen=True, eq=False)
class EstimateSet:
    replications: int
    seed: int
    block_size: int
    alpha: EmpiricalPmf
    delta: EmpiricalPmf
    nu: EmpiricalPmf
    kappa: EmpiricalPmf
    sojourn: SojournSummary


def _sum_counts(parts: list[IntArray]) -> IntArray:
    total = np.zeros(max(len(p) for p in parts), dtype=np.int64)
    for p in parts:
        total[: len(p)] += p
    return total


def _merge_moments(blocks: list[BlockResult]) -> tuple[int, float, float]:
    """Pairwise merge of (count, mean, m2) in block order."""
    count, mean, m2 = 0, 0.0, 0.0
    for b in blocks:
        total = count + b.count
        gap = b.mean - mean
        mean += gap * b.count / total
        m2 += b.m2 + gap * gap * count * b.count / total
        count = total
    return count, mean, m2


def _summarize_sojourn(blocks: list[BlockResult], level: float = 0.95) -> SojournSummary:
    count, mean, m2 = _merge_moments(blocks)
    variance = m2 / (count - 1) if count > 1 else 0.0
    stderr = math.sqrt(variance / count)
    z = float(stats.norm.ppf(0.5 + level / 2.0))
    if count > 1:
        df = count - 1
        upper_q = float(stats.chi2.ppf(0.5 + level / 2.0, df))
        lower_q = float(stats.chi2.ppf(0.5 - level / 2.0, df))
        variance_ci = (df * variance / upper_q, df * variance / lower_q)
    else:
        variance_ci = (0.0, math.inf)
    return SojournSummary(mean, variance, stderr, (mean - z * stderr, mean + z * stderr), variance_ci)


def estimate(
    params: QueueParameters, replications: int, seed: int, workers: int = 1, block_size: int = 4096
) -> EstimateSet:
    """
    Aggregate independent replications grouped in fixed-size blocks, each block with its own Philox stream.

    Blocks are merged in block order, so the result depends on (seed, replications, block_size) only.
    """
    if replications < 1:
        raise ParameterError(f"replications must be at least 1, got {replications}")
    if block_size < 1:
        raise ParameterError(f"block_size must be at least 1, got {block_size}")
    full, rest = divmod(replications, block_size)
    sizes = [block_size] * full + ([rest] if rest else [])
    jobs = [(params.rho, seed, b, size) for b, size in enumerate(sizes)]
    logger.debug("simulating %d replications in %d blocks (seed %d)", replications, len(jobs), seed)
    blocks = run_blocks(simulate_block, jobs, workers)
    return EstimateSet(
        replications=replications,
        seed=seed,
        block_size=block_size,
        alpha=EmpiricalPmf(_sum_counts([b.alpha for b in blocks]), replications),
        delta=EmpiricalPmf(_sum_counts([b.delta for b in blocks]), replications),
        nu=EmpiricalPmf(_sum_counts([b.nu for b in blocks]), replications),
        kappa=EmpiricalPmf(_sum_counts([b.kappa for b in blocks]), replications),
        sojourn=_summarize_sojourn(blocks),
    )
