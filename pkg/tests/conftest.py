from collections.abc import Iterable
from functools import lru_cache

import pytest

from psqueue.distributions import SpectralEngine, build_engine
from psqueue.model import TruncationConfig, validate_params
from psqueue.oracle import TruncatedChain, build_chain_for

LOADS = (0.2, 0.5, 0.8)


@lru_cache(maxsize=None)
def engine_at(rho: float, epsilon: float = 1e-10, j_max: int = 40) -> SpectralEngine:
    return build_engine(validate_params(rho), TruncationConfig(epsilon=epsilon), j_max=j_max)


@lru_cache(maxsize=None)
def chain_at(rho: float, epsilon: float = 1e-10, min_states: int = 128) -> TruncatedChain:
    return build_chain_for(validate_params(rho), TruncationConfig(epsilon=epsilon), min_states=min_states)


@pytest.fixture(scope="session", params=LOADS, ids=lambda rho: f"rho={rho}")
def rho(request: pytest.FixtureRequest) -> float:
    return request.param


@pytest.fixture(scope="session")
def engine(rho: float) -> SpectralEngine:
    return engine_at(rho)


@pytest.fixture(scope="session")
def chain(rho: float) -> TruncatedChain:
    return chain_at(rho)


class ScriptedEvents:
    """EventSource replaying a fixed script; holding times are all one unless given."""

    def __init__(self, n0: int, outcomes: Iterable[str], holding: Iterable[float] | None = None) -> None:
        self.n0 = n0
        self.outcomes = list(outcomes)
        self.holding = list(holding) if holding is not None else [1.0] * len(self.outcomes)
        self.consumed = 0

    def _next(self) -> str:
        outcome = self.outcomes[self.consumed]
        self.consumed += 1
        return outcome

    def initial_population(self) -> int:
        return self.n0

    def arrival_first(self) -> bool:
        if self.outcomes[self.consumed] == "arrival":
            self._next()
            return True
        return False

    def tagged_departs(self, others: int) -> bool:
        return self._next() == "tagged"

    def holding_time(self) -> float:
        return self.holding.pop(0)


@pytest.fixture
def scripted() -> type[ScriptedEvents]:
    return ScriptedEvents
