"""Coupled time stepping: spectral velocity coefficients and grid density.

The velocity lives in the span of the first n eigenmodes and obeys the
weighted coefficient system

    M(rho) dC/dt + Lambda C + B(C, rho) = F(rho, t)

where M is the density-weighted Gram matrix of the modes, Lambda the
diagonal of eigenvalues (unit viscosity), B the projected momentum
advection and F the projected forcing.  The density rides along by
semi-Lagrangian transport.  One step is: implicit-Euler predictor for
the coefficients, transport of the density with the velocity pair
(start, predicted end), then a trapezoidal corrector built around the
midpoint mass matrix.  Diffusion is implicit in both stages, so dt is
not limited by the stiffest retained eigenvalue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from .basis import SpectralBasis, SpectralVelocity, build_basis
from .transform import GridTransform, analyze, dealias, gradient, synthesize
from .transport import DensityField, advect

FORCING_KINDS = ("zero", "steady", "periodic")


@dataclass(frozen=True)
class ForcingSpec:
    """Band-limited body force built from catalog modes.

    The force is amplitude * envelope(t) * sum of the named basis modes,
    with envelope 1 for the steady kind and cos(omega t) for the
    periodic kind.  Band-limited fields keep every norm the theory asks
    for finite, whatever the amplitude.
    """

    kind: str = "zero"
    amplitude: float = 0.0
    modes: tuple[int, ...] = ()
    omega: float = 0.0

    def __post_init__(self):
        if self.kind not in FORCING_KINDS:
            raise ValueError(
                f"forcing kind must be one of {FORCING_KINDS}, got {self.kind!r}"
            )
        object.__setattr__(self, "modes", tuple(int(m) for m in self.modes))
        if any(m < 0 for m in self.modes):
            raise ValueError(f"forcing mode indices must be nonnegative: {self.modes}")
        if not math.isfinite(self.amplitude):
            raise ValueError(f"forcing amplitude must be finite, got {self.amplitude}")
        if not math.isfinite(self.omega):
            raise ValueError(f"forcing omega must be finite, got {self.omega}")
        if self.kind != "zero" and not self.modes:
            raise ValueError(f"{self.kind} forcing needs at least one mode index")

    def envelope(self, t: float) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "steady":
            return 1.0
        return math.cos(self.omega * t)

    def coefficients(self, basis: SpectralBasis, t: float) -> np.ndarray:
        """Spectral coefficients of the force at time t."""
        out = np.zeros(basis.size)
        if self.kind == "zero":
            return out
        for m in self.modes:
            if m >= basis.size:
                raise ValueError(
                    f"forcing mode {m} outside basis of size {basis.size}"
                )
            out[m] = self.amplitude * self.envelope(t)
        return out


def _mode_tables(basis: SpectralBasis, n: int, n_grid: int):
    """Index and sign tables turning one FFT of rho into the Gram matrix.

    Products of two real modes split into mean terms at the difference
    and sum wavevectors, so every quadrature entry is a pair of reads
    from the density spectrum.
    """
    k = basis.wavevectors[:n]
    d = (k[:, None, :] - k[None, :, :]) % n_grid
    u = (k[:, None, :] + k[None, :, :]) % n_grid
    flat_d = d[..., 0] * n_grid + d[..., 1]
    flat_u = u[..., 0] * n_grid + u[..., 1]
    pol = basis.polarizations[:n]
    angle = pol @ pol.T
    is_sin = basis.phases[:n] == 1
    sin_j = is_sin[:, None]
    sin_k = is_sin[None, :]
    return flat_d, flat_u, angle, sin_j, sin_k


def assemble_mass_matrix(
    rho: DensityField, basis: SpectralBasis, n: int | None = None
) -> np.ndarray:
    """Density-weighted Gram matrix of the first n modes by grid quadrature.

    A discrete Fourier identity turns the full quadrature into a single
    FFT of the density plus one gather per entry, which is exact for the
    trigonometric integrands involved (including wrap-around aliasing of
    the grid sum itself).
    """
    if n is None:
        n = basis.size
    if not (1 <= n <= basis.size):
        raise ValueError(f"need 1 <= n <= {basis.size}, got {n}")
    n_grid = rho.n_grid
    tables = _mode_tables(basis, n, n_grid)
    rho_hat = (np.fft.fft2(rho.values) / (n_grid * n_grid)).ravel()
    return _assemble_from_spectrum(rho_hat, tables)


def _assemble_from_spectrum(rho_hat_flat: np.ndarray, tables) -> np.ndarray:
    flat_d, flat_u, angle, sin_j, sin_k = tables
    rd = rho_hat_flat[flat_d]
    ru = rho_hat_flat[flat_u]
    both_cos = ~sin_j & ~sin_k
    both_sin = sin_j & sin_k
    sin_cos = sin_j & ~sin_k
    trig = np.where(
        both_cos,
        rd.real + ru.real,
        np.where(
            both_sin,
            rd.real - ru.real,
            np.where(sin_cos, -rd.imag - ru.imag, rd.imag - ru.imag),
        ),
    )
    m = angle * trig
    return 0.5 * (m + m.T)


def nonlinear_term(
    v: SpectralVelocity, rho: DensityField, transform: GridTransform
) -> np.ndarray:
    """Projection of the weighted momentum advection rho (u . grad) u.

    The quadratic term and the density are each truncated at the 2/3
    cutoff before multiplying, so no aliased content reaches the
    retained band.
    """
    u = synthesize(v, transform)
    jac = gradient(u)
    adv = u[0] * jac[0] + u[1] * jac[1]
    weighted = dealias(rho.values) * dealias(adv)
    return analyze(weighted, transform).coeffs


def forcing_term(
    rho: DensityField, forcing: ForcingSpec, t: float, transform: GridTransform
) -> np.ndarray:
    """Projection of the weighted force rho f(x, t) by grid quadrature."""
    basis = transform.basis
    if forcing.kind == "zero":
        return np.zeros(basis.size)
    coeffs = forcing.coefficients(basis, t)
    f_grid = synthesize(SpectralVelocity(basis, coeffs), transform)
    return analyze(rho.values * f_grid, transform).coeffs


@dataclass
class SolverConfig:
    """Everything one run needs; validation happens on construction."""

    basis_size: int
    grid_size: int
    dt: float
    t_end: float
    forcing: ForcingSpec
    initial_velocity: SpectralVelocity
    initial_density: DensityField
    stride: int = 1
    viscosity: float = 1.0
    t_start: float = 0.0

    def __post_init__(self):
        if self.basis_size < 1:
            raise ValueError(f"basis_size must be positive, got {self.basis_size}")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not np.isfinite(self.t_start) or self.t_start < 0:
            raise ValueError(f"t_start must be nonnegative, got {self.t_start}")
        if self.t_end < self.t_start:
            raise ValueError(
                f"t_end {self.t_end} precedes t_start {self.t_start}"
            )
        if self.viscosity != 1.0:
            raise ValueError("viscosity is fixed at 1 in this model")
        if self.stride < 1:
            raise ValueError(f"stride must be positive, got {self.stride}")
        steps = self.n_steps
        if steps % self.stride != 0:
            raise ValueError(
                f"stride {self.stride} does not divide the {steps} steps"
            )
        span = self.t_end - self.t_start
        if abs(steps * self.dt - span) > 1e-9 * max(1.0, span):
            raise ValueError(
                f"time span {span} is not a whole number of dt = {self.dt} steps"
            )
        basis = build_basis(self.basis_size)
        k_max = basis.k_max
        if self.grid_size < 3 * k_max + 1:
            raise ValueError(
                f"grid_size {self.grid_size} too small for dealiased products of "
                f"modes up to |k| = {k_max}; need at least {3 * k_max + 1}"
            )
        if self.initial_density.n_grid != self.grid_size:
            raise ValueError(
                f"initial density grid {self.initial_density.n_grid} does not "
                f"match grid_size {self.grid_size}"
            )
        iv = self.initial_velocity
        if iv.basis.size < self.basis_size:
            raise ValueError(
                f"initial velocity carries {iv.basis.size} modes, fewer than "
                f"basis_size {self.basis_size}"
            )

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.t_start) / self.dt))


class Stepper:
    """One-step advance with reusable spectral tables and factorizations."""

    def __init__(self, basis: SpectralBasis, transform: GridTransform, forcing: ForcingSpec):
        self.basis = basis
        self.transform = transform
        self.forcing = forcing
        self.lam = basis.eigenvalues.copy()
        self._lam_diag = np.diag(self.lam)
        self._tables = _mode_tables(basis, basis.size, transform.n_grid)

    def force_vector(self, rho: DensityField, t: float) -> np.ndarray:
        if self.forcing.kind == "zero":
            return np.zeros(self.basis.size)
        return forcing_term(rho, self.forcing, t, self.transform)

    def mass_matrix(self, rho: DensityField) -> np.ndarray:
        n_grid = rho.n_grid
        rho_hat = (np.fft.fft2(rho.values) / (n_grid * n_grid)).ravel()
        return _assemble_from_spectrum(rho_hat, self._tables)

    def explicit_rhs(self, coeffs: np.ndarray, rho: DensityField, t: float) -> np.ndarray:
        v = SpectralVelocity(self.basis, coeffs)
        return self.force_vector(rho, t) - nonlinear_term(v, rho, self.transform)

    def _factor(self, matrix: np.ndarray):
        try:
            return linalg.cho_factor(matrix, lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise RuntimeError(
                "mass matrix lost positive definiteness during factorization; "
                "the grid is too coarse for this density"
            ) from exc

    def step(
        self,
        v: SpectralVelocity,
        rho: DensityField,
        t: float,
        dt: float,
        mass_start: np.ndarray | None = None,
    ):
        """Advance (v, rho) from t to t + dt.

        Returns (v_new, rho_new, info); info carries the end-of-step mass
        matrix for reuse plus the pieces of the discrete energy balance.
        """
        c0 = v.coeffs
        m0 = self.mass_matrix(rho) if mass_start is None else mass_start
        f0 = self.force_vector(rho, t)
        e0 = f0 - nonlinear_term(v, rho, self.transform)

        predictor = m0 + dt * self._lam_diag
        c_star = linalg.cho_solve(
            self._factor(predictor), m0 @ c0 + dt * e0, check_finite=False
        )
        v_star = SpectralVelocity(self.basis, c_star)

        rho1 = advect(rho, (v, v_star), dt, self.transform)
        m1 = self.mass_matrix(rho1)
        m_half = 0.5 * (m0 + m1)
        f1 = self.force_vector(rho1, t + dt)
        e1 = f1 - nonlinear_term(v_star, rho1, self.transform)

        half = 0.5 * dt
        corrector = m_half + half * self._lam_diag
        rhs = m_half @ c0 - half * (self.lam * c0) + half * (e0 + e1)
        c1 = linalg.cho_solve(self._factor(corrector), rhs, check_finite=False)
        v1 = SpectralVelocity(self.basis, c1)

        kinetic0 = 0.5 * float(c0 @ m0 @ c0)
        kinetic1 = 0.5 * float(c1 @ m1 @ c1)
        diss0 = float(self.lam @ c0**2)
        diss1 = float(self.lam @ c1**2)
        power0 = float(f0 @ c0)
        power1 = float(f1 @ c1)
        residual = (
            kinetic1 - kinetic0 + half * (diss0 + diss1) - half * (power0 + power1)
        )
        info = {
            "mass_end": m1,
            "predictor_coeffs": c_star,
            "kinetic": (kinetic0, kinetic1),
            "dissipation": (diss0, diss1),
            "power": (power0, power1),
            "energy_residual": residual,
        }
        return v1, rho1, info

    def time_derivative(
        self,
        v: SpectralVelocity,
        rho: DensityField,
        t: float,
        mass: np.ndarray | None = None,
    ) -> np.ndarray:
        """Coefficients of u_t from the system right-hand side."""
        m = self.mass_matrix(rho) if mass is None else mass
        rhs = -self.lam * v.coeffs + self.explicit_rhs(v.coeffs, rho, t)
        return linalg.cho_solve(self._factor(m), rhs, check_finite=False)


def step(
    v: SpectralVelocity,
    rho: DensityField,
    t: float,
    dt: float,
    transform: GridTransform,
    forcing: ForcingSpec | None = None,
):
    """Single coupled step; convenience wrapper over a transient Stepper."""
    stepper = Stepper(v.basis, transform, forcing or ForcingSpec())
    v1, rho1, info = stepper.step(v, rho, t, dt)
    return v1, rho1, info


@dataclass
class Trajectory:
    """Strided state history plus per-step scalar monitors.

    Stored states sit at times[i]; monitor series have one value per
    time level of the run (step ends plus the initial instant), keyed
    by name in `monitors` against `monitor_times`.
    """

    basis: SpectralBasis
    times: np.ndarray
    coeffs: np.ndarray
    ut_coeffs: np.ndarray
    densities: list[DensityField]
    monitor_times: np.ndarray
    monitors: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("stored times must be strictly increasing")

    @property
    def size(self) -> int:
        return len(self.times)

    def velocity_at(self, i: int) -> SpectralVelocity:
        return SpectralVelocity(self.basis, self.coeffs[i].copy())

    def ut_at(self, i: int) -> SpectralVelocity:
        return SpectralVelocity(self.basis, self.ut_coeffs[i].copy())


def solve(config: SolverConfig) -> Trajectory:
    """Run the coupled scheme to t_end and collect states and monitors."""
    basis = build_basis(config.basis_size)
    _check_prefix(config.initial_velocity.basis, basis)
    transform = GridTransform(basis, config.grid_size)
    stepper = Stepper(basis, transform, config.forcing)

    n = basis.size
    steps = config.n_steps
    dt = config.dt
    stride = config.stride
    stored = steps // stride + 1

    v = SpectralVelocity(basis, config.initial_velocity.coeffs[:n].copy())
    rho = config.initial_density.copy()

    times = np.zeros(stored)
    coeffs = np.zeros((stored, n))
    ut_coeffs = np.zeros((stored, n))
    densities: list[DensityField] = []
    monitor_times = config.t_start + np.arange(steps + 1) * dt
    series = {
        name: np.zeros(steps + 1)
        for name in (
            "kinetic_energy",
            "dissipation",
            "power_in",
            "energy_residual",
            "density_min",
            "density_max",
            "density_mass",
        )
    }

    mass = stepper.mass_matrix(rho)
    f0 = stepper.force_vector(rho, config.t_start)
    series["kinetic_energy"][0] = 0.5 * float(v.coeffs @ mass @ v.coeffs)
    series["dissipation"][0] = float(basis.eigenvalues @ v.coeffs**2)
    series["power_in"][0] = float(f0 @ v.coeffs)
    series["density_min"][0] = float(rho.values.min())
    series["density_max"][0] = float(rho.values.max())
    series["density_mass"][0] = rho.mass()

    def record(slot: int, t: float, mass_now: np.ndarray):
        times[slot] = t
        coeffs[slot] = v.coeffs
        ut_coeffs[slot] = stepper.time_derivative(v, rho, t, mass=mass_now)
        densities.append(rho.copy())

    record(0, config.t_start, mass)

    slot = 1
    for k in range(steps):
        t = config.t_start + k * dt
        v, rho, info = stepper.step(v, rho, t, dt, mass_start=mass)
        mass = info["mass_end"]
        series["kinetic_energy"][k + 1] = info["kinetic"][1]
        series["dissipation"][k + 1] = info["dissipation"][1]
        series["power_in"][k + 1] = info["power"][1]
        series["energy_residual"][k + 1] = info["energy_residual"]
        series["density_min"][k + 1] = float(rho.values.min())
        series["density_max"][k + 1] = float(rho.values.max())
        series["density_mass"][k + 1] = rho.mass()
        if (k + 1) % stride == 0:
            record(slot, config.t_start + (k + 1) * dt, mass)
            slot += 1

    return Trajectory(
        basis=basis,
        times=times,
        coeffs=coeffs,
        ut_coeffs=ut_coeffs,
        densities=densities,
        monitor_times=monitor_times,
        monitors=series,
    )


def reference_solve(config: SolverConfig, basis_size: int) -> Trajectory:
    """Same run with a larger velocity space on the same grid and clock."""
    if basis_size < config.basis_size:
        raise ValueError(
            f"reference basis {basis_size} is smaller than the run basis "
            f"{config.basis_size}"
        )
    return solve(replace(config, basis_size=basis_size))


def _check_prefix(given: SpectralBasis, target: SpectralBasis):
    n = target.size
    if not np.array_equal(given.wavevectors[:n], target.wavevectors) or not np.array_equal(
        given.phases[:n], target.phases
    ):
        raise ValueError(
            "initial velocity basis is not an extension of the run basis"
        )
