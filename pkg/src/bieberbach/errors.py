"""Exception types raised by the library."""


class BieberbachError(ValueError):
    """Base class for domain errors."""


class NegativeMultiplicity(BieberbachError):
    """A spectrum subtraction removed more than was present."""


class InadmissibleSpin(BieberbachError):
    """The spin structure does not project to the requested quotient."""


class TruncationTooTight(BieberbachError):
    """The truncation radius leaves a tail above the accuracy target."""


class DivergentMoment(BieberbachError):
    """A cutoff-function moment could not be integrated to tolerance."""


class NonpositiveP(BieberbachError):
    """Heat-trace parameter must be strictly positive."""


class IllConditionedFit(BieberbachError):
    """The small-time fit design matrix is too ill-conditioned."""
