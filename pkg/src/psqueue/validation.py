"""
The acceptance suite: oracle equivalence, closed forms, means, busy-period identities, orthogonality, asymptotic
bands and Monte Carlo concordance, evaluated per load.
"""

import logging
import math
from collections.abc import Callable, Iterable, Iterator, Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import stats

from psqueue.asymptotics import b_asymptote, decay_diagnostics, delta_asymptote
from psqueue.busy_period import BusyPeriodModel, b_pmf, btilde_gen, btilde_pmf
from psqueue.distributions import (
    SpectralEngine,
    build_engine,
    delta_pmf,
    delta_pmf_departure_form,
    delta_pmf_quadrature,
    normalization_integral,
    joint_table_given_n,
    kappa_gen,
    kappa_mean,
    stationary_nu_pmf,
    stationary_sojourn_mean,
)
from psqueue.errors import ParameterError
from psqueue.model import Pmf, QueueParameters, TruncationConfig, validate_params
from psqueue.oracle import TruncatedChain, build_chain_for, oracle_alpha_delta, oracle_joint
from psqueue.simulation import EstimateSet, estimate
from psqueue.spectral import (
    build_coefficient_table,
    pollaczek_matrix,
    pollaczek_weight,
    quadrature_moments,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Check:
    name: str
    rho: float
    passed: bool
    value: float
    tolerance: float
    detail: str = ""


@dataclass(frozen=True)
class SuiteConfig:
    """
    `quick` shrinks index ranges and replication counts; the tolerances stay the same.
    """

    reps: int = 1_000_000
    seed: int = 7
    workers: int = 1
    quick: bool = False
    epsilon: float = 1e-8


class SuiteContext:
    """Per-load fixtures shared by the checks, built on first use."""

    def __init__(self, params: QueueParameters, config: SuiteConfig) -> None:
        self.params = params
        self.config = config
        self.trunc = TruncationConfig(epsilon=config.epsilon)

    @property
    def rho(self) -> float:
        return self.params.rho

    @cached_property
    def engine(self) -> SpectralEngine:
        return build_engine(self.params, self.trunc, j_max=40)

    @cached_property
    def chain(self) -> TruncatedChain:
        return build_chain_for(self.params, self.trunc, min_states=128)

    @cached_property
    def busy(self) -> BusyPeriodModel:
        return BusyPeriodModel(self.params)

    @cached_property
    def delta(self) -> Pmf:
        return delta_pmf(self.engine, 40)

    @cached_property
    def simulation(self) -> EstimateSet:
        reps = min(self.config.reps, 20_000) if self.config.quick else self.config.reps
        return estimate(self.params, reps, self.config.seed, self.config.workers)

    def check(self, name: str, value: float, tolerance: float, detail: str = "") -> Check:
        return Check(name, self.rho, bool(value <= tolerance), float(value), tolerance, detail)


SuiteCheck = Callable[[SuiteContext], Iterable[Check]]

CHECKS: dict[str, SuiteCheck] = {}


def register(name: str) -> Callable[[SuiteCheck], SuiteCheck]:
    def decorator(fn: SuiteCheck) -> SuiteCheck:
        CHECKS[name] = fn
        return fn

    return decorator


def _max_gap(a: Iterable[float], b: Iterable[float]) -> float:
    return float(np.max(np.abs(np.asarray(list(a)) - np.asarray(list(b)))))


@register("oracle")
def _oracle_equivalence(ctx: SuiteContext) -> Iterator[Check]:
    n_top = 3 if ctx.config.quick else 10
    worst = 0.0
    for n0 in range(n_top + 1):
        exact = oracle_joint(ctx.chain, n0).probs
        spectral = joint_table_given_n(ctx.engine, n0, 40, 40)
        rows = min(40, exact.shape[0])
        gap = np.abs(spectral[:rows] - exact[:rows, :41]).max()
        worst = max(worst, float(gap), float(np.abs(spectral[rows:]).max(initial=0.0)))
    yield ctx.check("joint_vs_oracle", worst, 1e-7, f"n0 <= {n_top}, k <= 40, m <= 40")


@register("delta")
def _delta_paths(ctx: SuiteContext) -> Iterator[Check]:
    j = range(26)
    moment = [ctx.delta[i] for i in j]
    quadrature = delta_pmf_quadrature(ctx.engine, 25)
    departure = delta_pmf_departure_form(ctx.engine, 25)
    alpha, delta = oracle_alpha_delta(ctx.chain, 25, ctx.trunc)
    yield ctx.check("delta_moment_vs_quadrature", _max_gap(moment, [quadrature[i] for i in j]), 1e-7)
    yield ctx.check("delta_moment_vs_departure_form", _max_gap(moment, [departure[i] for i in j]), 1e-7)
    yield ctx.check("delta_moment_vs_oracle", _max_gap(moment, [delta[i] for i in j]), 1e-7)
    yield ctx.check("alpha_equals_delta_oracle", _max_gap(alpha.probs, delta.probs), 1e-9)


@register("closed_forms")
def _closed_forms(ctx: SuiteContext) -> Iterator[Check]:
    rho = ctx.rho
    nu = stationary_nu_pmf(ctx.engine, 40)
    geometric = [(1.0 - rho) * rho**m for m in range(41)]
    yield ctx.check("stationary_nu_geometric", _max_gap(nu.probs, geometric), 1e-8)
    gap = max(abs(normalization_integral(ctx.engine, n) - 1.0) for n in range(21))
    yield ctx.check("normalization_identity", gap, 1e-8)
    yield ctx.check("kappa_gen_at_one", abs(kappa_gen(ctx.engine, 1.0) - 1.0), 1e-8)


@register("means")
def _means(ctx: SuiteContext) -> Iterator[Check]:
    rho = ctx.rho
    mean_delta = (kappa_mean(ctx.engine) - 1.0) / 2.0
    yield ctx.check("mean_delta", abs(mean_delta - rho / (1.0 - rho)), 1e-4, "from E kappa = 1 + 2 E delta")
    yield ctx.check("mean_sojourn", abs(stationary_sojourn_mean(ctx.engine) - 1.0 / (1.0 - rho)), 1e-4)
    b = b_pmf(ctx.busy, _busy_horizon(ctx.params))
    mean_b = math.fsum(b.indices * b.probs)
    yield ctx.check("mean_busy_count", abs(mean_b - 1.0 / (1.0 - rho) ** 2), 1e-6)


def _busy_horizon(params: QueueParameters) -> int:
    """Index past which z0^{-l} has fallen below 1e-16."""
    return max(100, math.ceil(16.0 * math.log(10.0) / math.log(params.z0)) * 2)


@register("busy_period")
def _busy_period(ctx: SuiteContext) -> Iterator[Check]:
    rho = ctx.rho
    b = b_pmf(ctx.busy, _busy_horizon(ctx.params))
    yield ctx.check("b_at_one", abs(b[1] - (1.0 - rho) / (1.0 + rho)), 1e-10)
    yield ctx.check("b_normalization", abs(b.mass - 1.0), 1e-10)
    bt = btilde_pmf(ctx.busy, 60)
    for z in (0.0, 0.5):
        series = math.fsum(bt.probs * z ** bt.indices.astype(float))
        yield ctx.check(f"btilde_gen_z{z}", abs(btilde_gen(ctx.busy, z, 64) - series), 1e-6)


@register("orthogonality")
def _orthogonality(ctx: SuiteContext) -> Iterator[Check]:
    measure = ctx.engine.measure
    P = pollaczek_matrix(30, measure.cos_theta)
    gram = (P * measure.weights) @ P.T
    scale = np.sqrt(np.arange(1, 32, dtype=np.float64))
    residual = np.abs(scale[:, None] * gram * scale[None, :] - np.eye(31)).max()
    yield ctx.check("orthonormality", float(residual), 1e-9, "n, m <= 30")

    table = build_coefficient_table(40, ctx.params)
    quad = quadrature_moments(measure, 40)
    relative = max(abs(float(r) - q) / max(1.0, abs(float(r))) for r, q in zip(table.moments[:41], quad))
    yield ctx.check("moments_recursion_vs_quadrature", relative, 1e-10, "n <= 40")

    du = measure.raw_weights * np.sin(measure.theta)
    u = measure.cos_theta
    for a, b in ((1.0, 0.0), (2.0, 1.0)):
        rows = pollaczek_matrix(20, u, a, b)
        gram = (rows * (np.asarray(pollaczek_weight(u, a, b)) * du)) @ rows.T
        norms = 2.0 * np.arange(21) + 1.0 + a
        residual = np.abs(gram * np.sqrt(norms[:, None] * norms[None, :]) - np.eye(21)).max()
        yield ctx.check(f"pollaczek_normalization_a{a:g}_b{b:g}", float(residual), 1e-9, "n, m <= 20")


@register("asymptotics")
def _asymptotic_bands(ctx: SuiteContext) -> Iterator[Check]:
    rho, params = ctx.rho, ctx.params
    bands = {0.2: (40, 80), 0.5: (150, 300)}
    if rho in bands:
        lo, hi = bands[rho]
        b = b_pmf(ctx.busy, hi)
        ratios = [b[j] / b_asymptote(params, j) for j in range(lo, hi + 1)]
        yield ctx.check("b_asymptote_band", max(abs(r - 1.0) for r in ratios), 0.1, f"j in [{lo}, {hi}]")
    if rho == 0.2:
        ratios = [ctx.delta[j] / delta_asymptote(params, j) for j in range(20, 41)]
        yield ctx.check("delta_asymptote_band", max(abs(r - 1.0) for r in ratios), 0.5, "j in [20, 40]")
    if rho in (0.2, 0.5):
        btilde = btilde_pmf(ctx.busy, 40)
        diagnostics = decay_diagnostics(ctx.delta, btilde, params, (15, 40))
        yield ctx.check("delta_btilde_ratio_decreasing", 0.0 if diagnostics.ratio_decreasing else 1.0, 0.0)
        excess = max(ctx.delta[j] - btilde[j] for j in range(15, 41))
        yield ctx.check("delta_below_btilde", max(excess, 0.0), 0.0, "j in [15, 40]")


def _chi_square_geometric(nu: np.ndarray, reps: int, rho: float, m_max: int = 10) -> float:
    observed = np.zeros(m_max + 2)
    observed[: min(len(nu), m_max + 1)] = nu[: m_max + 1]
    observed[-1] = reps - observed[:-1].sum()
    expected = reps * np.array([(1.0 - rho) * rho**m for m in range(m_max + 1)] + [rho ** (m_max + 1)])
    return float(stats.chisquare(observed, expected).pvalue)


@register("monte_carlo")
def _monte_carlo(ctx: SuiteContext) -> Iterator[Check]:
    rho, sim = ctx.rho, ctx.simulation
    reps = sim.replications
    used = f"{reps} replications"
    p_nu = _chi_square_geometric(sim.nu.counts, reps, rho)
    yield Check("mc_nu_geometric", rho, p_nu > 0.01, p_nu, 0.01, f"chi-square p-value over m <= 10, {used}")

    probs, errors = sim.delta.probs, sim.delta.stderr
    z = max(abs(probs[j] - ctx.delta[j]) / errors[j] if errors[j] > 0 else 0.0 for j in range(min(16, len(probs))))
    yield ctx.check("mc_delta_within_4_sigma", float(z), 4.0, f"j <= 15, {used}")

    s = sim.sojourn
    z_sojourn = abs(s.mean - 1.0 / (1.0 - rho)) / s.stderr
    yield ctx.check("mc_sojourn_mean_within_3_sigma", z_sojourn, 3.0, used)

    width = min(len(sim.alpha.counts), len(sim.delta.counts), 16)
    table = np.vstack([sim.alpha.counts[:width], sim.delta.counts[:width]])
    table = table[:, table.min(axis=0) >= 5]
    p_same = float(stats.chi2_contingency(table).pvalue) if table.shape[1] > 1 else 1.0
    yield Check("mc_alpha_delta_same_law", rho, p_same > 0.01, p_same, 0.01, f"two-sample chi-square, {used}")

    small = min(reps, 8192)
    one = estimate(ctx.params, small, ctx.config.seed, workers=1, block_size=1024)
    two = estimate(ctx.params, small, ctx.config.seed, workers=2, block_size=1024)
    quantities = ("alpha", "delta", "nu", "kappa")
    same = all(np.array_equal(getattr(one, q).counts, getattr(two, q).counts) for q in quantities)
    same = same and one.sojourn == two.sojourn
    yield Check("mc_workers_identical", rho, same, 0.0 if same else 1.0, 0.0, f"workers 1 vs 2, {small} replications")


def run_suite(
    rhos: Sequence[float], config: SuiteConfig = SuiteConfig(), names: Sequence[str] | None = None
) -> list[Check]:
    """Run the registered checks (or the named subset) at every load, in registration order."""
    selected = list(CHECKS) if names is None else list(names)
    unknown = [n for n in selected if n not in CHECKS]
    if unknown:
        raise ParameterError(f"unknown checks {unknown}; known: {list(CHECKS)}")
    results = []
    for rho in rhos:
        ctx = SuiteContext(validate_params(rho), config)
        for name in selected:
            results.extend(CHECKS[name](ctx))
    failed = [c for c in results if not c.passed]
    logger.info("validation: %d checks, %d failed", len(results), len(failed))
    return results
