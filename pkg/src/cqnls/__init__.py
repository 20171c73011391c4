"""Radial spectral solvers for the cubic-quintic nonlinear Schroedinger equation.

Modules
-------
spectral
    Chebyshev collocation in ``s = r**2``: grids, differentiation,
    quadrature and interpolation.
groundstate
    Newton solver, alpha homotopy and omega continuation for ground states.
observables
    Mass, energy and related norms.
evolution
    Strang splitting with a Gauss-Legendre linear step.
experiments
    Perturbation experiments, classification and branch matching.
library, cli
    Persistence and the ``cqnls`` command.
"""

__version__ = "0.1.0"

from .errors import CQNLSError  # noqa: E402
from .spectral import RadialGrid, build_grid  # noqa: E402

__all__ = ["CQNLSError", "RadialGrid", "build_grid", "__version__"]
