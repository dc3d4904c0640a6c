"""
Numerical laboratory for the Lagrangian phase operator and the deformed Hermitian-Yang-Mills equation.

This package provides:
- Pointwise phase algebra (phase, cone membership, Wang-Yuan checks, F0)
- Pointwise and grid C-subsolution tests
- A periodic torus solver (Newton-Krylov and parabolic flow)
- The two-stage method of continuity
- Cohomological stability checks from intersection numbers
"""

__version__ = "0.1.0"

from .errors import DhymLabError, InputError, PathAssertionError, SolverFailure, SubcriticalError

__all__ = [
    "__version__",
    "DhymLabError",
    "InputError",
    "PathAssertionError",
    "SolverFailure",
    "SubcriticalError",
]
