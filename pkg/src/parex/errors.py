"""Exceptions and warning categories raised across the package."""


class ParexError(Exception):
    """Base class for all package-specific errors."""


# -- geometry ---------------------------------------------------------------

class DegeneratePolygon(ParexError):
    """Polygon with zero area or otherwise invalid ring structure."""


class PointOutsideAllRegions(ParexError):
    """A station point does not fall inside any region (data/geometry mismatch)."""

    def __init__(self, station_id, point=None):
        self.station_id = station_id
        self.point = point
        msg = f"station {station_id!r} lies outside all regions"
        if point is not None:
            msg += f" (x={point[0]:.3f}, y={point[1]:.3f} miles)"
        super().__init__(msg)


class InvalidC(ParexError):
    """Within-region constant c is not below the smallest between-region distance."""


class NonPositiveEntry(ParexError):
    """Jittering drove a distance entry non-positive even after retries."""


class ZeroDistance(ParexError):
    """Distance matrix contains a non-positive entry; reciprocal undefined."""


# -- extremes ---------------------------------------------------------------

class TooFewExceedances(ParexError):
    """Not enough threshold exceedances to attempt a GPD fit."""


class NonConvergence(ParexError):
    """An optimizer failed to converge; diagnostics attached."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class SubAnnualReturn(ParexError):
    """Return period too short: N * days_per_year * rate must exceed 1."""


# -- pare -------------------------------------------------------------------

class RhoOutOfRange(ParexError):
    """Spatial-dependence parameter outside the positive-definite interval."""


class SingularGLS(ParexError):
    """Design matrix rank-deficient; GLS coefficients not identifiable."""


# -- kriging ----------------------------------------------------------------

class SingularCovariance(ParexError):
    """Observation covariance matrix not invertible (e.g. duplicate points, no nugget)."""


class InvalidLMC(ParexError):
    """A coregionalization coefficient matrix is not positive semidefinite."""


class NoInteriorPoints(ParexError):
    """Block averaging produced no sample points inside the region."""


# -- regionalmax / simulation ----------------------------------------------

class EmptyRegion(ParexError):
    """A region has no contributing stations."""


class EmptyGrid(ParexError):
    """Grid resolution yields no points inside any region."""


# -- ingestion / pipeline ---------------------------------------------------

class ParseError(ParexError):
    """Malformed input file; carries file path and 1-based line number."""

    def __init__(self, path, line, message):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class InsufficientData(ParexError):
    """Too few usable stations in a window for the named region."""


# -- warnings ---------------------------------------------------------------

class ParexWarning(UserWarning):
    """Base class for package warning categories."""


class BoundaryTieWarning(ParexWarning):
    """Station on a shared region boundary; assigned to the lowest region index."""


class HessianNotPDWarning(ParexWarning):
    """Observed information not positive definite; covariance flagged unusable."""


class BoundaryRhoWarning(ParexWarning):
    """Profile optimum within tolerance of the admissible rho interval edge."""


class DegenerateFitWarning(ParexWarning):
    """A fitted model collapsed to a boundary (zero sill, zero variance, ...)."""


class EmptyBinWarning(ParexWarning):
    """Empty distance bin dropped from an empirical variogram."""


class UnitSuspectWarning(ParexWarning):
    """Depth magnitudes suggest the input may not be in tenths of millimeters."""
