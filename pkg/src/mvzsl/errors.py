"""Exception types raised across the package.

Every failure the library can signal deliberately derives from
:class:`MvzslError`, so callers (and the command line front end) can catch
one base class and still tell the cases apart by type.
"""


class MvzslError(Exception):
    """Base class for all deliberate failures in this package."""


class ParseFailure(MvzslError):
    """A file could not be read or did not contain what its format promises."""


class DimensionMismatch(MvzslError):
    """Row counts or dimensionalities disagree between related objects."""


class DisjointnessViolated(MvzslError):
    """Auxiliary and target label sets share a class identifier."""


class NonFiniteData(MvzslError):
    """A matrix contains NaN or infinite entries."""


class ConfigError(MvzslError):
    """A parameter value or combination of options is invalid."""


class SingularSystem(MvzslError):
    """A linear system or eigenproblem has no stable solution as posed."""


class DegenerateBandwidth(MvzslError):
    """The similarity bandwidth estimate collapsed to zero."""


class SingularPropagation(MvzslError):
    """The label propagation system matrix is singular."""


class NoSupervision(MvzslError):
    """Recognition was requested with neither prototypes nor labeled nodes."""


class MissingView(MvzslError):
    """A view identifier is absent from the model or data it is needed in."""


class MetricsError(MvzslError):
    """Evaluation was requested on empty or inconsistent ground truth."""
