"""thinrod: dimension-reduction numerics for thin elastic rods.

Computes the limiting one-dimensional rod functionals of three-dimensional
nonlinear elasticity under body-force scalings h^alpha (bending/torsion
stiffnesses from a cross-section cell problem, regime-dependent stretching
terms), solves their equilibrium equations, minimizes the full rescaled 3D
energy at finite thickness, and verifies convergence and scaling statements
empirically.
"""

__version__ = "0.1.0"

from .errors import (
    ThinRodError,
    InputError,
    ConfigError,
    MeshError,
    NumericalError,
    ConvergenceError,
    InsufficientDataError,
)

__all__ = [
    "__version__",
    "ThinRodError",
    "InputError",
    "ConfigError",
    "MeshError",
    "NumericalError",
    "ConvergenceError",
    "InsufficientDataError",
]
