"""Exception types raised by the library."""


class RigidityError(Exception):
    """Base class for library errors."""


class ChartPoleError(RigidityError, ValueError):
    """Point lies on the boundary of every chart supplied by the profile."""


class PoleProximityError(RigidityError, ValueError):
    """Spherical coordinates requested too close to a coordinate pole."""


class StepTooLarge(RigidityError, ValueError):
    """Finite-difference step is too large relative to the evaluation point."""


class Infeasible(RigidityError):
    """No positive definite matrix annihilates the given Hessian."""


class ConditionExceeded(RigidityError):
    """An annihilating matrix exists but its condition number exceeds the cap."""

    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition


class SingularPoint(RigidityError, ValueError):
    """The Hessian vanishes (or the gradient map degenerates) at the point."""


class DegenerateCoefficient(RigidityError, ValueError):
    """A coefficient needed as a divisor is not positive."""


class NoVanishing(RigidityError):
    """The profile does not vanish to order at least three at the point."""


class FitAmbiguous(RigidityError):
    """Polynomial fit residuals do not decay as the annulus shrinks."""


class ConfigError(RigidityError, ValueError):
    """Invalid experiment configuration."""
