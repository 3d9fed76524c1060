"""Exception hierarchy shared by the anisolab modules."""


class AnisolabError(Exception):
    """Base class for all library errors."""


class SingularPointError(AnisolabError, ValueError):
    """A kernel was evaluated at its singular point."""


class InvalidLevelError(AnisolabError, ValueError):
    """Truncation level below 1."""


class UnderResolvedError(AnisolabError, ValueError):
    """Mollifier radius too small for the grid spacing."""


class SourceGeometryError(AnisolabError, ValueError):
    """Mollified supports overlap each other or leave the ball."""


class SolverError(AnisolabError, RuntimeError):
    """A linear or nonlinear solve did not converge."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class FitError(AnisolabError, ValueError):
    """Degenerate fit window, sign change, or a ray leaving the mask."""


class NoPositiveSolutionError(AnisolabError, RuntimeError):
    """The angular profile equation has no positive solution."""


class TestFunctionError(AnisolabError, ValueError):
    """A test function does not vanish on the unit sphere."""

    __test__ = False  # keep pytest from collecting it


class ConfigError(AnisolabError, ValueError):
    """Invalid experiment configuration."""


class AssertionFailure(AnisolabError):
    """A ladder invariant was violated beyond its tolerance."""
