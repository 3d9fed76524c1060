"""Numerical study of semilinear elliptic problems with dipole and Dirac sources in the unit ball."""
from .errors import (
    AnisolabError, ConfigError, FitError, InvalidLevelError, NoPositiveSolutionError,
    SingularPointError, SolverError, SourceGeometryError, TestFunctionError, UnderResolvedError,
)
from .grid import Grid, ScalarField
from .kernels import KernelConfig
from .nonlinearity import power, truncate, zero
from .sources import MeasureSource
from .solver import SolverSettings, solve_linear, solve_semilinear

__version__ = "0.1.0"
