"""Numerical verification of stability-driven estimates for semilinear elliptic equations.

Radial solutions of -Δu = λ f(u) on the unit ball, their linearised
stability, level-set geometry on grids, Hardy inequalities along level-set
foliations and on hypersurfaces, and the weighted Dirichlet, L-infinity and
Morrey-type estimates that stability implies.
"""
from .errors import (
    BeyondExtremalError,
    ConfigurationError,
    ConvergenceError,
    DivergenceError,
    PreconditionError,
    RangeError,
    UnstableSolutionError,
)
from .nonlinearity import NonlinearitySpec, classify, evaluate
from .radial import RadialSolution, fold, solve_minimal, trace_branch
from .spectrum import principal_eigenvalue

__version__ = "0.1.0"
