"""Exception types shared across the package."""


class TruncationError(ValueError):
    """A Hermite index or moment lies outside the retained basis."""


class NonFiniteError(ValueError):
    """Input samples or outputs contain NaN or inf."""


class VacuumError(RuntimeError):
    """1 + rho fell below the vacuum guard threshold."""


class CFLError(RuntimeError):
    """The explicit part of a time step violates the CFL bound."""


class IntegrationError(RuntimeError):
    """A time integrator or linear solver failed to reach its tolerance."""


class NotPositiveDefiniteError(ValueError):
    """A weighted quadratic form lost positive definiteness."""


class ConfigError(ValueError):
    """Configuration failed validation."""
