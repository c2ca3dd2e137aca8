"""
Machine-readable tables behind the command-line subcommands, rendered as CSV with a `# key=value` header or as JSON
with the same header under `meta`.
"""

import csv
import io
import json
import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass, field

from psqueue import __version__
from psqueue.asymptotics import btilde_asymptote, delta_asymptote
from psqueue.busy_period import BusyPeriodModel, b_pmf, btilde_pmf
from psqueue.distributions import build_engine, delta_pmf, delta_pmf_quadrature
from psqueue.errors import NumericalError, ParameterError
from psqueue.model import Pmf, TruncationConfig, validate_params
from psqueue.simulation import EmpiricalPmf, estimate

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

Cell = int | float | str | None


@dataclass(frozen=True)
class Table:
    """
    >>> t = Table("demo", ("j", "p"), ((0, 0.5), (1, None)), {"rho": 0.5})
    >>> print(t.to_csv(), end="")
    # schema=1
    # version=0.1.0
    # table=demo
    # rho=0.5
    j,p
    0,0.5
    1,
    """

    name: str
    columns: tuple[str, ...]
    rows: tuple[tuple[Cell, ...], ...]
    meta: Mapping[str, Cell] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ParameterError(f"row {row} does not match columns {self.columns}")
            for cell in row:
                if isinstance(cell, float) and not math.isfinite(cell):
                    raise NumericalError(f"non-finite cell {cell} in table {self.name}")

    @property
    def header(self) -> dict[str, Cell]:
        return {"schema": SCHEMA_VERSION, "version": __version__, "table": self.name, **self.meta}

    def column(self, name: str) -> list[Cell]:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def to_csv(self) -> str:
        out = io.StringIO()
        for key, value in self.header.items():
            out.write(f"# {key}={_text(value)}\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(self.columns)
        writer.writerows([_text(cell) for cell in row] for row in self.rows)
        return out.getvalue()

    def to_json(self) -> str:
        payload = {"meta": self.header, "columns": list(self.columns), "rows": [list(row) for row in self.rows]}
        return json.dumps(payload, indent=2, allow_nan=False) + "\n"

    def render(self, fmt: str) -> str:
        match fmt:
            case "csv":
                return self.to_csv()
            case "json":
                return self.to_json()
            case _:
                raise ParameterError(f"format must be csv or json, got {fmt!r}")


def _text(cell: Cell) -> str:
    match cell:
        case None:
            return ""
        case float():
            return repr(cell)
        case _:
            return str(cell)


def _slope(p: Pmf, j: int) -> float | None:
    """log P(j+1) - log P(j) when both entries are stored and positive."""
    a, b = p[j], p[j + 1]
    if j + 1 > p.max_index or a <= 0.0 or b <= 0.0:
        return None
    return math.log(b) - math.log(a)


def delta_table(
    rho: float, j_max: int = 40, epsilon: float = 1e-6, n_cap: int = 200, panels: int = 64, order: int = 20
) -> Table:
    """P(δ = j) by the moment path and by direct quadrature, against the asymptote."""
    params = validate_params(rho)
    engine = build_engine(params, TruncationConfig(epsilon=epsilon, n_cap=n_cap), j_max, panels, order)
    moment = delta_pmf(engine, j_max)
    quadrature = delta_pmf_quadrature(engine, j_max)
    rows = []
    for j in range(j_max + 1):
        asymptote = delta_asymptote(params, j) if j >= 1 else None
        ratio = moment[j] / asymptote if asymptote else None
        rows.append((j, moment[j], quadrature[j], asymptote, ratio))
    meta = {
        "rho": rho,
        "epsilon": epsilon,
        "epsilon_achieved": engine.achieved_epsilon,
        "n_cap": n_cap,
        "n_outer": engine.outer_index,
        "j_max": j_max,
        "panels": panels,
        "order": order,
        "digits": engine.table.dps,
        "tail_mass": moment.tail_mass,
    }
    return Table("delta", ("j", "p_delta", "p_delta_quadrature_path", "asymptote", "ratio"), tuple(rows), meta)


def btilde_table(rho: float, j_max: int = 40, series_tol: float = 1e-14, k_cap: int = 2_000_000) -> Table:
    params = validate_params(rho)
    model = BusyPeriodModel(params, series_tol, k_cap)
    b = b_pmf(model, max(j_max, 1))
    bt = btilde_pmf(model, j_max)
    rows = tuple((j, b[j], bt[j], btilde_asymptote(params, j) if j >= 1 else None) for j in range(j_max + 1))
    meta = {"rho": rho, "j_max": j_max, "series_tol": series_tol, "k_cap": k_cap, "tail_mass": bt.tail_mass}
    return Table("btilde", ("j", "p_b", "p_btilde", "btilde_asymptote"), rows, meta)


def compare_table(
    rho: float, j_max: int = 40, epsilon: float = 1e-6, n_cap: int = 200, panels: int = 64, order: int = 20
) -> Table:
    """δ against b̃: both tables, their ratio, both asymptotes and both log-slopes."""
    params = validate_params(rho)
    engine = build_engine(params, TruncationConfig(epsilon=epsilon, n_cap=n_cap), j_max, panels, order)
    delta = delta_pmf(engine, j_max)
    btilde = btilde_pmf(BusyPeriodModel(params), j_max)
    rows = []
    for j in range(j_max + 1):
        ratio = delta[j] / btilde[j] if btilde[j] > 0.0 else None
        rows.append(
            (
                j,
                delta[j],
                btilde[j],
                ratio,
                delta_asymptote(params, j) if j >= 1 else None,
                btilde_asymptote(params, j) if j >= 1 else None,
                _slope(delta, j),
                _slope(btilde, j),
            )
        )
    columns = (
        "j",
        "p_delta",
        "p_btilde",
        "ratio",
        "delta_asymptote",
        "btilde_asymptote",
        "log_slope_delta",
        "log_slope_btilde",
    )
    meta = {
        "rho": rho,
        "epsilon": epsilon,
        "epsilon_achieved": engine.achieved_epsilon,
        "n_cap": n_cap,
        "j_max": j_max,
        "decay_rate": params.decay_rate,
    }
    return Table("compare", columns, tuple(rows), meta)


def _pmf_rows(name: str, pmf: EmpiricalPmf) -> list[tuple[Cell, ...]]:
    probs, errors = pmf.probs, pmf.stderr
    return [(name, k, float(probs[k]), float(errors[k])) for k in range(len(pmf.counts))]


def simulate_table(rho: float, reps: int, seed: int, workers: int = 1, block_size: int = 4096) -> Table:
    """Empirical laws of α, δ, ν, κ and the sojourn summary; the worker count is not part of the output."""
    result = estimate(validate_params(rho), reps, seed, workers, block_size)
    rows: list[tuple[Cell, ...]] = []
    for name in ("alpha", "delta", "nu", "kappa"):
        rows.extend(_pmf_rows(name, getattr(result, name)))
    s = result.sojourn
    rows.append(("sojourn_mean", None, s.mean, s.stderr))
    rows.append(("sojourn_mean_ci_low", None, s.mean_ci[0], None))
    rows.append(("sojourn_mean_ci_high", None, s.mean_ci[1], None))
    rows.append(("sojourn_variance", None, s.variance, None))
    if math.isfinite(s.variance_ci[1]):
        rows.append(("sojourn_variance_ci_low", None, s.variance_ci[0], None))
        rows.append(("sojourn_variance_ci_high", None, s.variance_ci[1], None))
    meta = {"rho": rho, "reps": reps, "seed": seed, "block_size": block_size}
    return Table("simulate", ("quantity", "index", "estimate", "stderr"), tuple(rows), meta)
