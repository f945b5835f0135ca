"""Spectral semi-Galerkin solver and verification lab for variable-density
incompressible flow on the 2*pi-periodic square."""

__version__ = "0.1.0"

from .basis import (  # noqa: E402,F401
    BOX_AREA,
    BOX_LENGTH,
    MODE_SCALE,
    RautmannReport,
    SpectralBasis,
    SpectralVelocity,
    VelocityNorms,
    WaveMode,
    build_basis,
    complement_k,
    count_modes_below,
    eigenvalue_after,
    norms,
    project_k,
    rautmann_check,
    write_basis_manifest,
)
from .csvio import RunManifest, read_csv, strip_version_line, write_csv  # noqa: F401
from .transform import (  # noqa: F401
    GridTransform,
    analyze,
    dealias,
    dealiased_product,
    gradient,
    grid_axes,
    leray_project,
    lp_norm,
    min_grid_size,
    read_grid_binary,
    synthesize,
    write_grid_binary,
    write_grid_csv,
)
