"""Exception types shared across the package."""

from __future__ import annotations


class ReslabError(Exception):
    """Base class for all package errors."""


class GiveUp(ReslabError):
    """A seeded construction exhausted its retry budget."""


class DegenerateScaling(ReslabError):
    """The perturbation size of the reduced model vanishes."""


class KindMismatch(ReslabError):
    """An operation was called with an equation kind it does not support."""


class StepFailure(ReslabError):
    """The integrator could not advance (step size underflow or chart failure)."""

    def __init__(self, message: str, t: float | None = None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class EnergyOutOfRange(ReslabError):
    """Requested energy level has no periodic orbit."""


class OffManifold(ReslabError):
    """A state does not lie on the invariant manifold required by the reduction."""

    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class ZeroMode(ReslabError):
    """A mode amplitude vanishes where polar coordinates are needed."""


class NonDecaying(ReslabError):
    """An improper integral has a non-decaying integrand."""


class QuadratureFail(ReslabError):
    """Adaptive quadrature did not reach the requested tolerance."""


class NoConvergence(ReslabError):
    """An iterative solver did not converge."""


class DegenerateHessian(ReslabError):
    """A critical point was found but its Hessian is singular."""


class NoCrossing(ReslabError):
    """A shooting problem did not bracket a crossing."""


class ShadowingLost(ReslabError):
    """A shadowing construction failed on a specific leg."""

    def __init__(self, message: str, leg: int):
        super().__init__(message)
        self.leg = leg
