"""Exact ground states and Hermite spectra of the planar Edwards-Anderson model.

The relative spin ``s_u s_v`` of the zero-temperature ground state is treated
as a function of i.i.d. Gaussian couplings.  The package provides exact
solvers, its Hermite-Fourier coefficients and subset masses, the
Ornstein-Uhlenbeck decorrelation curve, and the barrier / straight-column
combinatorics behind lower bounds on the size of the spectral sample.
"""

__version__ = "0.1.0"

from .lattice import (  # noqa: E402
    EdgeSet,
    GeometryError,
    GridGraph,
    SizingError,
    TerminalPair,
    build_grid,
    canonical_pair,
    line_L,
)
from .ground_state import CouplingField, SpinConfig, solve  # noqa: E402

__all__ = [
    "__version__",
    "CouplingField",
    "EdgeSet",
    "GeometryError",
    "GridGraph",
    "SizingError",
    "SpinConfig",
    "TerminalPair",
    "build_grid",
    "canonical_pair",
    "line_L",
    "solve",
]
