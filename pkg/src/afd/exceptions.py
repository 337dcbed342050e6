"""Exception hierarchy. The CLI maps these onto exit codes."""


class AfdError(Exception):
    """Base class for all package errors."""


class ConfigError(AfdError):
    """Invalid configuration document or CLI usage (exit code 2)."""


class NumericalError(AfdError):
    """Base for runtime numerical failures (exit code 3)."""


class DomainError(NumericalError):
    """Input outside an operation's domain (invalid outcome, bad bounds)."""


class PositivityError(NumericalError):
    """A prior predictive probability fell below the positivity floor.

    The spectral construction requires every outcome to have strictly
    positive probability under the prior; columns of the posterior
    predictive matrix are undefined otherwise.
    """


class BracketError(NumericalError):
    """A scalar root bracket did not enclose a sign change."""


class SingularJacobianError(NumericalError):
    """Moment Jacobian too close to zero for a sandwich variance."""


class DiagnosticsError(NumericalError):
    """An internal sanity check failed (spectrum out of range, degenerate data)."""
