"""Numerical laboratory for radial fractional heat flow and semilinear
elliptic equations on real hyperbolic space.

Subpackages follow the pipeline: `spectral` (grids, eigenfunctions,
transform pair), `kernels` (heat, subordinated and resolvent kernels),
`fraclap` (fractional Laplacian and shifted norms), `fujita` (evolution
and blow-up/global classification), `elliptic` (ground states),
`inequalities` (Poincare-type quotients), `cli` (front end).
"""

from .spectral import (
    ModelParams,
    RadialFn,
    RadialGrid,
    SpectralFn,
    SpectralGrid,
    SphericalTransform,
    plancherel_density,
    radial_grid,
    spectral_grid,
    spherical_function,
)

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "RadialFn",
    "RadialGrid",
    "SpectralFn",
    "SpectralGrid",
    "SphericalTransform",
    "plancherel_density",
    "radial_grid",
    "spectral_grid",
    "spherical_function",
    "__version__",
]
