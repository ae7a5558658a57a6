"""Exception hierarchy shared by the computational modules and the CLI."""


class JetError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(JetError, ValueError):
    """Operands have incompatible variable counts, orders or component counts."""


class SingularJetError(JetError):
    """A linear part that must be invertible is singular."""


class IntegrationError(JetError):
    """An ODE integration failed or drifted off its energy level."""


class ConvergenceError(JetError):
    """A Newton-type iteration did not reach its tolerance."""


class TransversalityError(JetError):
    """The flow is not transverse to the requested section."""


class ResonanceError(JetError):
    """A normal-form step hit a resonance within tolerance.

    ``index`` holds the violating integer vector when known.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class SupportError(JetError, ValueError):
    """A perturbation potential violates its support requirements."""


class CertificationError(JetError):
    """An exact certificate could not be produced."""


class ConfigError(JetError, ValueError):
    """A run configuration is malformed."""
