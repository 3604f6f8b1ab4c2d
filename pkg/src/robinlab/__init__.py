"""Robin masses, regularized traces and the logarithmic HLS functional on model surfaces."""

from .geometry import (QuadratureGrid, SurfaceSpec, build_sphere_grid, build_torus_grid,
                       chordal_distance, constants, geodesic_distance)
from .spectral import (apply_inverse_power, gjms_eigenvalue, sphere_model, torus_model,
                       zeta_finite_part, zeta_partial)

__version__ = "0.1.0"
