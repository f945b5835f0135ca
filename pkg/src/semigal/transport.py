"""Semi-Lagrangian transport of the density field.

Density is never truncated: it is carried as grid values and advected by
tracing characteristics backward from every node, then interpolating the
old field at the departure points.  Tracing uses one fourth-order step
with the velocity interpolated linearly in time between the two supplied
states.  Interpolation is bicubic (prefiltered cubic spline) and the
result is clipped to the min and max of the local 4 x 4 stencil, which
preserves the transport maximum principle exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .basis import BOX_AREA, SpectralVelocity
from .transform import GridTransform, synthesize

VelocityPair = tuple[SpectralVelocity, SpectralVelocity]


@dataclass
class DensityField:
    """Grid density with its invariant transport bounds."""

    values: np.ndarray
    alpha: float
    beta: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ValueError(f"density must be square, got {self.values.shape}")
        if not (0.0 < self.alpha <= self.beta):
            raise ValueError(
                f"need 0 < alpha <= beta, got alpha={self.alpha} beta={self.beta}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("density contains non-finite values")
        lo, hi = float(self.values.min()), float(self.values.max())
        if lo < self.alpha or hi > self.beta:
            raise ValueError(
                f"density range [{lo}, {hi}] escapes bounds [{self.alpha}, {self.beta}]"
            )

    @property
    def n_grid(self) -> int:
        return self.values.shape[0]

    def mass(self) -> float:
        return float(np.mean(self.values) * BOX_AREA)

    def copy(self) -> "DensityField":
        return DensityField(self.values.copy(), self.alpha, self.beta)


def _spline_coeffs(field: np.ndarray) -> np.ndarray:
    return ndimage.spline_filter(field, order=3, mode="grid-wrap")


def _sample(coeffs: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    # px, py in grid-index units
    return ndimage.map_coordinates(
        coeffs, [px, py], order=3, mode="grid-wrap", prefilter=False
    )


class _VelocitySampler:
    """Bicubic space sampling of a velocity pair, linear in time."""

    def __init__(
        self,
        pair: VelocityPair,
        transform: GridTransform,
        drift: tuple[float, float] = (0.0, 0.0),
    ):
        v0, v1 = pair
        g0 = synthesize(v0, transform)
        g1 = synthesize(v1, transform)
        self.c0 = [_spline_coeffs(g0[0]), _spline_coeffs(g0[1])]
        self.c1 = [_spline_coeffs(g1[0]), _spline_coeffs(g1[1])]
        self.h = 2.0 * math.pi / transform.n_grid
        self.drift = (float(drift[0]), float(drift[1]))

    def __call__(self, px, py, theta):
        """Velocity in grid-index units per unit time at time fraction theta."""
        w0, w1 = 1.0 - theta, theta
        vx = w0 * _sample(self.c0[0], px, py) + w1 * _sample(self.c1[0], px, py)
        vy = w0 * _sample(self.c0[1], px, py) + w1 * _sample(self.c1[1], px, py)
        return (vx + self.drift[0]) / self.h, (vy + self.drift[1]) / self.h


def _trace_grid_units(
    pair: VelocityPair,
    dt: float,
    transform: GridTransform,
    n_substeps: int = 1,
    drift: tuple[float, float] = (0.0, 0.0),
):
    if dt < 0:
        raise ValueError(f"dt must be nonnegative, got {dt}")
    if n_substeps < 1:
        raise ValueError(f"n_substeps must be positive, got {n_substeps}")
    n = transform.n_grid
    idx = np.arange(n, dtype=np.float64)
    px = np.repeat(idx[:, None], n, axis=1)
    py = np.repeat(idx[None, :], n, axis=0)
    if dt == 0.0:
        return px, py
    vel = _VelocitySampler(pair, transform, drift)
    sub = dt / n_substeps
    for step in range(n_substeps):
        # integrate backward over [theta_a, theta_b], arriving at theta_b
        theta_b = 1.0 - step / n_substeps
        theta_m = 1.0 - (step + 0.5) / n_substeps
        theta_a = 1.0 - (step + 1) / n_substeps
        k1x, k1y = vel(px, py, theta_b)
        k2x, k2y = vel(px - 0.5 * sub * k1x, py - 0.5 * sub * k1y, theta_m)
        k3x, k3y = vel(px - 0.5 * sub * k2x, py - 0.5 * sub * k2y, theta_m)
        k4x, k4y = vel(px - sub * k3x, py - sub * k3y, theta_a)
        px = px - sub / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        py = py - sub / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
    return px, py


def trace_back(
    pair: VelocityPair,
    dt: float,
    transform: GridTransform,
    n_substeps: int = 1,
    drift: tuple[float, float] = (0.0, 0.0),
) -> np.ndarray:
    """Departure points of backward characteristics from every grid node.

    The pair holds the velocity at the step start and step end; values in
    between are linear in time.  An optional constant drift adds a uniform
    background velocity, which the mean-free modes cannot carry.  Returns
    physical coordinates wrapped to [0, 2*pi), shaped (2, N, N).
    """
    px, py = _trace_grid_units(pair, dt, transform, n_substeps, drift)
    h = 2.0 * math.pi / transform.n_grid
    out = np.stack([np.mod(px * h, 2.0 * math.pi), np.mod(py * h, 2.0 * math.pi)])
    # np.mod of a tiny negative rounds up to 2*pi itself; keep the range half open
    out[out >= 2.0 * math.pi] = 0.0
    return out


def advect(
    rho: DensityField,
    pair: VelocityPair,
    dt: float,
    transform: GridTransform,
    drift: tuple[float, float] = (0.0, 0.0),
) -> DensityField:
    """One transport step of the density along traced characteristics.

    Interpolation at the departure points is bicubic; each value is then
    clipped to the range of its local 4 x 4 stencil, so the global bounds
    [alpha, beta] can never be violated.
    """
    n = rho.n_grid
    if transform.n_grid != n:
        raise ValueError(
            f"density grid {n} does not match transform grid {transform.n_grid}"
        )
    px, py = _trace_grid_units(pair, dt, transform, drift=drift)
    vals = _sample(_spline_coeffs(rho.values), px, py)

    ix = np.floor(px).astype(np.intp)
    iy = np.floor(py).astype(np.intp)
    lo = np.full(vals.shape, np.inf)
    hi = np.full(vals.shape, -np.inf)
    for a in range(-1, 3):
        rows = (ix + a) % n
        for b in range(-1, 3):
            stencil = rho.values[rows, (iy + b) % n]
            np.minimum(lo, stencil, out=lo)
            np.maximum(hi, stencil, out=hi)
    np.clip(vals, lo, hi, out=vals)
    return DensityField(vals, rho.alpha, rho.beta)
