"""Exception types shared across the library."""


class GaussTrackError(Exception):
    """Base class for all library errors."""


class PointBehindCamera(GaussTrackError):
    """Camera-space depth at or below the near cutoff."""


class DegenerateCovariance(GaussTrackError):
    """2x2 covariance determinant below the invertibility floor."""


class DimensionMismatch(GaussTrackError):
    """Weight map and track field disagree on image size."""


class InsufficientViews(GaussTrackError):
    """Fewer observations than the operation can work with."""


class DegenerateGeometry(GaussTrackError):
    """Triangulation system has no unique solution (no baseline)."""


class RankDeficient(GaussTrackError):
    """Covariance linear system has numerical rank below 6."""


class NegativeEigenvalue(GaussTrackError):
    """Covariance decomposition hit an eigenvalue below the floor."""


class InvalidConfig(GaussTrackError):
    """Configuration value out of range or unknown key."""


class MalformedFile(GaussTrackError):
    """Input file failed to parse."""
