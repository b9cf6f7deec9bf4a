"""Exception hierarchy shared by all modules.

Numerical and statistical failures map to CLI exit code 3, configuration
problems to exit code 2.
"""

from __future__ import annotations


class MmiqError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(MmiqError, ValueError):
    """Invalid experiment configuration or inconsistent simulation grid."""


class InvalidGenerator(MmiqError, ValueError):
    """Rate matrix is not a valid irreducible generator."""


class DimensionMismatch(MmiqError, ValueError):
    """Operand shapes are incompatible."""


class NumericalError(MmiqError, ArithmeticError):
    """A numerical routine could not deliver a trustworthy result."""


class SingularSystem(NumericalError):
    """A linear system is numerically rank deficient."""


class QuadratureFailure(NumericalError):
    """Adaptive quadrature did not reach the requested tolerance."""


class OdeToleranceFailure(NumericalError):
    """The ODE integrator failed or the system is too stiff for it."""


class NotPSD(NumericalError):
    """A matrix that must be positive semidefinite has a negative eigenvalue."""


class StatisticalError(MmiqError):
    """Monte Carlo output is unusable for the requested diagnostic."""


class InsufficientReplications(StatisticalError):
    """Too few replications for meaningful standard errors."""


class SimulationOverflow(StatisticalError, OverflowError):
    """Simulated counts left the safe integer range."""
