"""Exception types shared across the package."""


class AnisoKppError(Exception):
    """Base class for all package-specific errors."""


class InvalidNormError(AnisoKppError):
    """A gauge function failed certification (Euler identity, positivity,
    or uniform convexity)."""


class InvalidDomainError(AnisoKppError):
    """Boundary labelling is unusable, e.g. no Dirichlet piece at all."""


class DegenerateInputError(AnisoKppError):
    """An input field is identically zero where a nontrivial one is required."""


class InfeasibleWeightError(AnisoKppError):
    """The weight has no positive part on the active nodes, so the weighted
    eigenvalue problem has an empty constraint set."""


class OracleFailureError(AnisoKppError):
    """The closed-form/shooting oracle could not bracket a root."""


class SolverError(AnisoKppError):
    """An inner linear or nonlinear solve failed to converge."""


class DegenerateBracketError(SolverError):
    """No sub-solution scale could be found in the admissible range."""


class ConfigError(AnisoKppError):
    """A run configuration is malformed or inconsistent."""


class TieOverflowWarning(UserWarning):
    """Level-set selection could not meet the measure budget within one node
    weight because too many nodes tie at the threshold."""
