"""Named initial data. Runs pick fields from here, never from free-form code."""

from __future__ import annotations

import numpy as np

from .basis import MODE_SCALE, PHASE_SIN, SpectralBasis, SpectralVelocity, norms
from .transform import grid_axes
from .transport import DensityField

VELOCITY_KINDS = ("zero", "shear", "modes", "random_band")
DENSITY_KINDS = ("uniform", "blob", "stratified")


def shear_mode_index(basis: SpectralBasis) -> int:
    for j, m in enumerate(basis.modes):
        if m.k == (0, 1) and m.phase == PHASE_SIN:
            return j
    raise ValueError("basis has no (0, 1) sine mode")


def make_velocity(
    basis: SpectralBasis,
    kind: str,
    amplitude: float = 1.0,
    coefficients=None,
    seed: int = 0,
    band=None,
) -> SpectralVelocity:
    """Build a velocity state from the named catalog.

    zero         all coefficients zero
    shear        u = (amplitude sin y, 0)
    modes        explicit coefficient list, zero padded
    random_band  seeded normal draw on a mode-index range [lo, hi),
                 rescaled so the gradient norm equals amplitude
    """
    if kind not in VELOCITY_KINDS:
        raise ValueError(f"unknown velocity kind {kind!r}, expected one of {VELOCITY_KINDS}")
    if not np.isfinite(amplitude):
        raise ValueError("velocity amplitude must be finite")
    c = np.zeros(basis.size)
    if kind == "zero":
        pass
    elif kind == "shear":
        c[shear_mode_index(basis)] = amplitude / MODE_SCALE
    elif kind == "modes":
        if coefficients is None:
            raise ValueError("kind 'modes' needs a coefficient list")
        vals = np.asarray(coefficients, dtype=np.float64)
        if vals.ndim != 1 or vals.size > basis.size:
            raise ValueError(
                f"coefficient list of length {vals.size} does not fit a "
                f"basis of size {basis.size}"
            )
        c[: vals.size] = vals
    else:
        lo, hi = (0, basis.size) if band is None else band
        if not (0 <= lo < hi <= basis.size):
            raise ValueError(f"mode band ({lo}, {hi}) outside [0, {basis.size}]")
        rng = np.random.default_rng(seed)
        c[lo:hi] = rng.standard_normal(hi - lo)
        grad = norms(SpectralVelocity(basis, c)).dirichlet
        c *= amplitude / grad
    return SpectralVelocity(basis, c)


def make_density(
    n_grid: int,
    kind: str,
    alpha: float = 0.5,
    beta: float = 1.5,
    value=None,
    sharpness: float = 3.0,
) -> DensityField:
    """Build a density state from the named catalog.

    uniform      constant field (default: midpoint of the bounds)
    blob         smooth bump, alpha at the corners rising to beta at the
                 box center
    stratified   horizontal layers with tanh transitions, beta around
                 y = 0 and alpha around y = pi
    """
    if kind not in DENSITY_KINDS:
        raise ValueError(f"unknown density kind {kind!r}, expected one of {DENSITY_KINDS}")
    if not (np.isfinite(alpha) and np.isfinite(beta)):
        raise ValueError("density bounds must be finite")
    if alpha <= 0:
        raise ValueError(f"lower density bound must be positive, got {alpha}")
    if beta < alpha:
        raise ValueError(f"density bounds out of order: [{alpha}, {beta}]")
    x = grid_axes(n_grid)
    X, Y = np.meshgrid(x, x, indexing="ij")
    if kind == "uniform":
        v = 0.5 * (alpha + beta) if value is None else float(value)
        if not (alpha <= v <= beta):
            raise ValueError(f"uniform value {v} outside [{alpha}, {beta}]")
        vals = np.full((n_grid, n_grid), v)
    elif kind == "blob":
        shape = 0.25 * (1.0 + np.cos(X - np.pi)) * (1.0 + np.cos(Y - np.pi))
        vals = alpha + (beta - alpha) * shape
    else:
        if sharpness <= 0:
            raise ValueError(f"stratified sharpness must be positive, got {sharpness}")
        shape = 0.5 * (1.0 + np.tanh(sharpness * np.cos(Y)))
        vals = alpha + (beta - alpha) * shape
    return DensityField(vals, alpha, beta)
