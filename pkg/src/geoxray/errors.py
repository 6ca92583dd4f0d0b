"""Exception hierarchy shared by all geoxray modules."""


class GeoXrayError(Exception):
    """Base class for every error raised by the package."""


class DomainError(GeoXrayError):
    """A point or geodesic left the region where the data is defined."""


class ConditioningError(GeoXrayError):
    """Metric (or another linear object) is numerically singular."""


class ConvexityError(GeoXrayError):
    """Boundary curvature is not strictly positive."""


class FoliationError(GeoXrayError):
    """The supplied function is not a strictly convex foliation.

    The offending geodesic index and the full report are attached.
    """

    def __init__(self, message, report=None, geodesic=None):
        super().__init__(message)
        self.report = report
        self.geodesic = geodesic


class TilingError(GeoXrayError):
    """Inconsistent tiling input (bad incidence, unknown ids, ...)."""


class DegenerateTileError(TilingError):
    """A tangent cone has (numerically) zero aperture."""


class TangencyError(GeoXrayError):
    """A geodesic touches an edge tangentially.

    ``edge`` names the offending edge when it is known.
    """

    def __init__(self, message, edge=None):
        super().__init__(message)
        self.edge = edge


class TangencyAmbiguityError(TangencyError):
    """A cone boundary is too close to the level-set tangent to classify."""


class PoleError(GeoXrayError):
    """The line family of a conical transform is parallel to a cone edge."""


class RegionError(GeoXrayError):
    """A restricted integral was requested over an ill-defined region."""


class ConjugacyError(GeoXrayError):
    """Two-point Jacobi problem is singular (conjugate points)."""


class DerivativeUnstableError(GeoXrayError):
    """Two derivative estimates on nested windows disagree."""

    def __init__(self, message, disagreement=None):
        super().__init__(message)
        self.disagreement = disagreement


class AsymptoticsError(GeoXrayError):
    """Measured ending times are incompatible with the asymptotic model."""


class EpsilonTooLargeError(GeoXrayError):
    """A probing geodesic left its tile before returning to the boundary."""


class ReconstructionError(GeoXrayError):
    """Hard failure during layer stripping; ``anchor`` names the culprit."""

    def __init__(self, message, anchor=None):
        super().__init__(message)
        self.anchor = anchor


class ScenarioParseError(GeoXrayError):
    """Scenario file could not be parsed. Carries line/column when known."""

    def __init__(self, message, line=None, column=None):
        loc = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + loc)
        self.line = line
        self.column = column


class IllConditionedWarning(UserWarning):
    """Corner system inverse exceeds the configured norm cap."""
