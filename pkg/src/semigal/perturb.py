"""Perturbation experiments: inject admissible disturbances, evolve them
with the full solver, and estimate the decay envelope.

A perturbed run solves the same equations from the disturbed state.  The
disturbance evolution is then the exact difference of the two solutions,
so one solver serves both systems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .basis import SpectralBasis, SpectralVelocity, norms
from .solver import SolverConfig, Trajectory, solve
from .transform import gradient, grid_axes, lp_norm
from .transport import DensityField

_REDRAW_CAP = 200


@dataclass(frozen=True)
class PerturbationSpec:
    """Admissible disturbance of a base run at time t0.

    delta bounds the velocity disturbance's gradient norm, a_bound its
    Stokes-operator norm, b_bound the density disturbance's maximum.
    p_exponent picks the Lebesgue exponent for density-gradient
    monitoring and must be at least 6 (math.inf allowed).
    """

    t0: float
    xi0: SpectralVelocity
    eta0: np.ndarray
    delta: float
    a_bound: float
    b_bound: float
    p_exponent: float = 6.0

    def __post_init__(self):
        object.__setattr__(
            self, "eta0", np.asarray(self.eta0, dtype=np.float64)
        )
        for name, bound in (
            ("delta", self.delta),
            ("a_bound", self.a_bound),
            ("b_bound", self.b_bound),
        ):
            if not np.isfinite(bound) or bound <= 0:
                raise ValueError(f"{name} must be positive, got {bound}")
        if not (math.isinf(self.p_exponent) or self.p_exponent >= 6.0):
            raise ValueError(
                f"p_exponent must be at least 6 or inf, got {self.p_exponent}"
            )
        if not np.isfinite(self.t0) or self.t0 < 0:
            raise ValueError(f"t0 must be nonnegative, got {self.t0}")
        if self.eta0.ndim != 2 or self.eta0.shape[0] != self.eta0.shape[1]:
            raise ValueError(f"eta0 must be a square grid, got {self.eta0.shape}")
        if not np.all(np.isfinite(self.eta0)):
            raise ValueError("eta0 contains non-finite values")
        size = norms(self.xi0)
        if size.dirichlet >= self.delta:
            raise ValueError(
                f"velocity disturbance gradient {size.dirichlet:.6g} reaches "
                f"the bound delta = {self.delta:.6g}"
            )
        if size.stokes >= self.a_bound:
            raise ValueError(
                f"velocity disturbance roughness {size.stokes:.6g} reaches "
                f"the bound {self.a_bound:.6g}"
            )
        sup = float(np.abs(self.eta0).max())
        if sup >= self.b_bound:
            raise ValueError(
                f"density disturbance size {sup:.6g} reaches the bound "
                f"{self.b_bound:.6g}"
            )


def make_perturbation(
    basis: SpectralBasis,
    n_grid: int,
    delta: float,
    a_bound: float,
    b_bound: float,
    p_exponent: float = 6.0,
    seed: int = 0,
    t0: float = 0.0,
    band=None,
) -> PerturbationSpec:
    """Draw an admissible random disturbance, deterministic under seed.

    The velocity part is a normal draw on the mode band rescaled so its
    gradient norm is 0.9 delta; draws whose Stokes norm still reaches
    a_bound are rejected and redrawn.  The density part is a mean-free
    combination of the four lowest Fourier harmonics scaled to maximum
    0.9 b_bound.
    """
    lo, hi = (0, basis.size) if band is None else band
    if not (0 <= lo < hi <= basis.size):
        raise ValueError(f"mode band ({lo}, {hi}) outside [0, {basis.size}]")
    lam_low = float(basis.eigenvalues[lo:hi].min())
    target = 0.9 * delta
    if target * math.sqrt(lam_low) >= a_bound:
        raise ValueError(
            f"bounds unsatisfiable: gradient target {target:.6g} forces a "
            f"Stokes norm of at least {target * math.sqrt(lam_low):.6g}, "
            f"which reaches {a_bound:.6g}"
        )
    rng = np.random.default_rng(seed)
    for _ in range(_REDRAW_CAP):
        c = np.zeros(basis.size)
        c[lo:hi] = rng.standard_normal(hi - lo)
        xi = SpectralVelocity(basis, c)
        c *= target / norms(xi).dirichlet
        xi = SpectralVelocity(basis, c)
        if norms(xi).stokes < a_bound:
            break
    else:
        raise RuntimeError(
            f"no admissible velocity draw in {_REDRAW_CAP} attempts; "
            "narrow the mode band or raise the roughness bound"
        )

    x = grid_axes(n_grid)
    X, Y = np.meshgrid(x, x, indexing="ij")
    w = rng.standard_normal(4)
    eta = (
        w[0] * np.cos(X)
        + w[1] * np.sin(Y)
        + w[2] * np.sin(X + Y)
        + w[3] * np.cos(X - 2 * Y)
    )
    eta *= 0.9 * b_bound / np.abs(eta).max()
    return PerturbationSpec(
        t0=t0,
        xi0=xi,
        eta0=eta,
        delta=delta,
        a_bound=a_bound,
        b_bound=b_bound,
        p_exponent=p_exponent,
    )


@dataclass
class PerturbedRun:
    """Paired base and disturbed trajectories with their differences.

    offsets holds elapsed time since injection; xi_coeffs and
    xi_t_coeffs the velocity difference and its rate; eta_values the
    density difference per stored offset.
    """

    basis: SpectralBasis
    offsets: np.ndarray
    xi_coeffs: np.ndarray
    xi_t_coeffs: np.ndarray
    eta_values: list
    base: Trajectory
    disturbed: Trajectory

    def grad_norms(self) -> np.ndarray:
        return np.sqrt((self.xi_coeffs**2) @ self.basis.eigenvalues)


def _storage_aligned(value: float, unit: float, label: str) -> int:
    count = int(round(value / unit))
    if abs(count * unit - value) > 1e-9 * max(1.0, abs(value)):
        raise ValueError(
            f"{label} {value} is not a whole number of storage intervals "
            f"of {unit}"
        )
    return count


def run_perturbed(
    config: SolverConfig, spec: PerturbationSpec, horizon: float
) -> PerturbedRun:
    """Evolve base and disturbed states and return their differences.

    The base problem restarts from its own config; the disturbed run
    starts at t0 from the base state plus the disturbance.  Both use the
    same grid, step size and storage stride, so the stored times line up
    exactly.
    """
    if horizon <= 0 or not np.isfinite(horizon):
        raise ValueError(f"horizon must be positive, got {horizon}")
    unit = config.stride * config.dt
    k0 = _storage_aligned(spec.t0, unit, "t0")
    _storage_aligned(horizon, unit, "horizon")

    base_cfg = replace(config, t_start=0.0, t_end=spec.t0 + horizon)
    base = solve(base_cfg)

    n = config.basis_size
    if spec.xi0.basis.size < n:
        raise ValueError(
            f"velocity disturbance carries {spec.xi0.basis.size} modes, "
            f"fewer than basis_size {n}"
        )
    if spec.eta0.shape[0] != config.grid_size:
        raise ValueError(
            f"density disturbance grid {spec.eta0.shape[0]} does not match "
            f"grid_size {config.grid_size}"
        )

    rho0 = base.densities[k0]
    disturbed_vals = rho0.values + spec.eta0
    low = float(disturbed_vals.min())
    if low <= 0.0:
        raise ValueError(
            f"disturbed density reaches {low:.6g}; it must stay positive"
        )
    disturbed_rho = DensityField(
        disturbed_vals, low, float(disturbed_vals.max())
    )
    start_v = SpectralVelocity(
        base.basis, base.coeffs[k0] + spec.xi0.coeffs[:n]
    )
    disturbed_cfg = replace(
        config,
        t_start=spec.t0,
        t_end=spec.t0 + horizon,
        initial_velocity=start_v,
        initial_density=disturbed_rho,
    )
    disturbed = solve(disturbed_cfg)

    count = len(disturbed.times)
    xi = disturbed.coeffs - base.coeffs[k0 : k0 + count]
    xi_t = disturbed.ut_coeffs - base.ut_coeffs[k0 : k0 + count]
    eta = [
        d.values - b.values
        for d, b in zip(disturbed.densities, base.densities[k0 : k0 + count])
    ]
    return PerturbedRun(
        basis=base.basis,
        offsets=disturbed.times - spec.t0,
        xi_coeffs=xi,
        xi_t_coeffs=xi_t,
        eta_values=eta,
        base=base,
        disturbed=disturbed,
    )


@dataclass
class StabilityEstimate:
    """Sampled decay envelope and the two measured bound constants.

    envelope is the running maximum from the right of the normalized
    disturbance gradient, so it is non-increasing and starts at 1.
    peak_ratio is the raw overshoot before normalization and
    density_gradient_sup the largest monitored density-gradient norm,
    when supplied.
    """

    offsets: np.ndarray
    envelope: np.ndarray
    peak_ratio: float
    decayed: bool
    density_gradient_sup: float | None = None

    def __post_init__(self):
        if self.envelope[0] != 1.0:
            raise ValueError("envelope must start at 1")
        if np.any(np.diff(self.envelope) > 0):
            raise ValueError("envelope must be non-increasing")


DECAY_THRESHOLD = 0.1


def estimate_decay(
    offsets, grad_norms, eta_grad_norms=None
) -> StabilityEstimate:
    """Upper envelope of the disturbance gradient, normalized at onset.

    decayed reports whether the envelope ends below 0.1.  Raises for a
    zero initial disturbance, which has no meaningful ratio.
    """
    offsets = np.asarray(offsets, dtype=np.float64)
    grad_norms = np.asarray(grad_norms, dtype=np.float64)
    if offsets.shape != grad_norms.shape or offsets.ndim != 1:
        raise ValueError("offsets and gradient norms must match in shape")
    if grad_norms.size == 0:
        raise ValueError("empty disturbance series")
    if grad_norms[0] == 0.0:
        raise ValueError("initial disturbance gradient is zero")
    ratios = grad_norms / grad_norms[0]
    env = np.maximum.accumulate(ratios[::-1])[::-1]
    peak = float(env[0])
    sup = None
    if eta_grad_norms is not None:
        sup = float(np.asarray(eta_grad_norms).max())
    return StabilityEstimate(
        offsets=offsets.copy(),
        envelope=env / peak,
        peak_ratio=peak,
        decayed=bool(env[-1] / peak < DECAY_THRESHOLD),
        density_gradient_sup=sup,
    )


def eta_gradient_norm(eta_values, p_exponent: float) -> np.ndarray:
    """Density-disturbance gradient norms, one per stored field."""
    out = np.zeros(len(eta_values))
    for i, field in enumerate(eta_values):
        out[i] = lp_norm(gradient(np.asarray(field, dtype=np.float64)), p_exponent)
    return out
