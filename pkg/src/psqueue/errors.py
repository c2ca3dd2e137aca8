from collections.abc import Callable
from typing import Generic, ParamSpec, TypeVar

T = TypeVar("T")
P = ParamSpec("P")
E = TypeVar("E", bound=BaseException)


class PSQueueError(Exception):
    """Base class for every error raised by psqueue."""


class ParameterError(PSQueueError, ValueError):
    """An argument lies outside the domain of the operation."""


class InconsistentPathError(ParameterError):
    """(n0, kappa, nu) or (n0, alpha, delta) violate the parity or sign constraints."""


class SingularityError(ParameterError):
    """A generating function was evaluated at or beyond a singularity."""

    def __init__(self, message: str, z: float) -> None:
        super().__init__(message)
        self.z = z


class NumericalError(PSQueueError, ArithmeticError):
    """A numerical target could not be met."""


class CapacityError(NumericalError):
    """A table or quadrature rule is too small for the requested index."""


class TruncationError(NumericalError):
    def __init__(self, message: str, achieved: float) -> None:
        super().__init__(message)
        self.achieved = achieved


class PrecisionEscalationError(NumericalError):
    def __init__(self, message: str, index: int) -> None:
        super().__init__(message)
        self.index = index


class QuadratureError(NumericalError):
    def __init__(self, message: str, residual: float) -> None:
        super().__init__(message)
        self.residual = residual


class StateSpaceError(NumericalError):
    """The truncated chain leaked more mass than allowed; the state cap must grow."""

    def __init__(self, message: str, leak: float) -> None:
        super().__init__(message)
        self.leak = leak


class DiagnosticsError(NumericalError):
    pass


class SimulationInvariantError(PSQueueError, AssertionError):
    pass


class catcher(Generic[P, T, E]):
    def __init__(self, _exc_type: type[E], fn: Callable[P, T], *args: P.args, **kwargs: P.kwargs) -> None:
        self.exc_type = _exc_type
        self.fn = fn
        self.args = args
        self.kwargs = kwargs

    def recover(self, handler: Callable[[E], T]) -> T:
        try:
            return self.fn(*self.args, **self.kwargs)
        except self.exc_type as e:
            return handler(e)


class attempt(Generic[P, T]):
    def __init__(self, fn: Callable[P, T], *args: P.args, **kwargs: P.kwargs) -> None:
        self.fn = fn
        self.args = args
        self.kwargs = kwargs

    def catch(self, exc_type: type[E]) -> catcher[P, T, E]:
        """
        Catch one exception family and turn it into a value.

        >>> from psqueue.model import validate_params
        >>> attempt(validate_params, 2.0).catch(PSQueueError).recover(lambda e: type(e).__name__)
        'ParameterError'
        """
        return catcher(exc_type, self.fn, *self.args, **self.kwargs)
