"""Post-processing: norm monitors, truncation-error decomposition, and the
exponential-memory integral bound.

Everything here consumes immutable trajectories.  Velocity norms come
straight from coefficients (the basis is orthonormal), density norms from
grid quadrature, time integrals from trapezoid sums at the storage stride.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .basis import SpectralVelocity, eigenvalue_after
from .solver import Trajectory
from .transform import GridTransform, dealias, gradient, lp_norm, synthesize

MEMORY_BOUND_FACTOR = math.e**2 / (math.e - 1.0)


def exp_weighted_integral(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Series J(t_k) = e^{-t_k} integral of e^tau h(tau) from t_0 to t_k.

    Trapezoid panels folded into the recursion
    J_k = J_{k-1} e^{-dt} + dt/2 (h_{k-1} e^{-dt} + h_k), which never
    exponentiates a large positive argument.
    """
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if times.shape != values.shape or times.ndim != 1:
        raise ValueError("times and values must be 1d arrays of equal length")
    out = np.zeros_like(values)
    for k in range(1, len(values)):
        dt = times[k] - times[k - 1]
        decay = math.exp(-dt)
        out[k] = out[k - 1] * decay + 0.5 * dt * (values[k - 1] * decay + values[k])
    return out


@dataclass
class MonitorSeries:
    """Named norm series at the trajectory's stored times.

    grad_u and stokes_u are the gradient and Stokes-operator norms of the
    velocity, ut_l2 and ut_grad the same for its time derivative.  The
    memory integrals apply exp_weighted_integral to the squared series.
    energy_residual holds per-step defect magnitudes resampled at the
    stored times.
    """

    times: np.ndarray
    grad_u: np.ndarray
    stokes_u: np.ndarray
    ut_l2: np.ndarray
    ut_grad: np.ndarray
    memory_ut2: np.ndarray
    memory_stokes2: np.ndarray
    energy_residual: np.ndarray

    def __post_init__(self):
        for name, series in self.named().items():
            if series.shape != self.times.shape:
                raise ValueError(f"monitor {name} has mismatched length")
            if not np.all(np.isfinite(series)):
                raise ValueError(f"monitor {name} contains non-finite entries")
            if series.size and series.min() < 0:
                raise ValueError(f"monitor {name} contains negative entries")

    def named(self) -> dict:
        return {
            "grad_u": self.grad_u,
            "stokes_u": self.stokes_u,
            "ut_l2": self.ut_l2,
            "ut_grad": self.ut_grad,
            "memory_ut2": self.memory_ut2,
            "memory_stokes2": self.memory_stokes2,
            "energy_residual": self.energy_residual,
        }


def attach_monitors(traj: Trajectory) -> MonitorSeries:
    lam = traj.basis.eigenvalues
    c2 = traj.coeffs**2
    d2 = traj.ut_coeffs**2
    grad_u = np.sqrt(c2 @ lam)
    stokes_u = np.sqrt(c2 @ lam**2)
    ut_l2 = np.sqrt(d2.sum(axis=1))
    ut_grad = np.sqrt(d2 @ lam)
    idx = np.searchsorted(traj.monitor_times, traj.times)
    residual = np.abs(traj.monitors["energy_residual"][idx])
    return MonitorSeries(
        times=traj.times.copy(),
        grad_u=grad_u,
        stokes_u=stokes_u,
        ut_l2=ut_l2,
        ut_grad=ut_grad,
        memory_ut2=exp_weighted_integral(traj.times, ut_l2**2),
        memory_stokes2=exp_weighted_integral(traj.times, stokes_u**2),
        energy_residual=residual,
    )


@dataclass
class ErrorDecomposition:
    """Reference-versus-truncation error split at stored times.

    e is the reference tail beyond the first n modes, psi the in-span
    mismatch between the truncated run and the truncated reference, and
    theta equals psi minus any injected perturbation's retained part.
    velocity_error is the gradient norm of the full difference.  The two
    ratio series restate the spectral tail inequalities and stay at or
    below 1 by construction.
    """

    times: np.ndarray
    cut: int
    lam_next: float
    e_coeffs: np.ndarray
    psi_coeffs: np.ndarray
    theta_coeffs: np.ndarray
    e_l2: np.ndarray
    e_grad: np.ndarray
    psi_grad: np.ndarray
    velocity_error: np.ndarray
    density_errors: dict = field(default_factory=dict)
    stokes_sup: float = 0.0
    ratio_tail_grad: np.ndarray = None
    ratio_tail_l2: np.ndarray = None


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValueError(message)


def decompose(
    ref: Trajectory,
    approx: Trajectory,
    n: int | None = None,
    r_list=(2, 3),
    xi_coeffs=None,
) -> ErrorDecomposition:
    """Split the truncation error of approx against the reference run.

    Both trajectories must come from the same grid, step size and stored
    times, with nested bases.  xi_coeffs, when given, holds perturbation
    coefficients per stored time in the reference basis and only shifts
    theta.
    """
    if n is None:
        n = approx.basis.size
    _require(n == approx.basis.size, f"cut {n} differs from approx basis size {approx.basis.size}")
    _require(ref.basis.size >= n, "reference basis smaller than the truncated one")
    _require(
        np.array_equal(ref.basis.wavevectors[:n], approx.basis.wavevectors)
        and np.array_equal(ref.basis.phases[:n], approx.basis.phases),
        "bases are not nested",
    )
    _require(np.array_equal(ref.times, approx.times), "stored times differ")
    _require(
        np.array_equal(ref.monitor_times, approx.monitor_times),
        "step sequences differ",
    )
    _require(
        len(ref.densities) == len(approx.densities)
        and all(
            a.n_grid == b.n_grid for a, b in zip(ref.densities, approx.densities)
        ),
        "density grids differ",
    )

    lam = ref.basis.eigenvalues
    lam_next = eigenvalue_after(n) if n == ref.basis.size else float(lam[n])
    e = ref.coeffs.copy()
    e[:, :n] = 0.0
    psi = approx.coeffs - ref.coeffs[:, :n]
    theta = psi.copy()
    if xi_coeffs is not None:
        xi_coeffs = np.asarray(xi_coeffs, dtype=np.float64)
        _require(
            xi_coeffs.shape[0] == len(ref.times),
            "perturbation series length differs from stored times",
        )
        theta = psi - xi_coeffs[:, :n]

    diff = ref.coeffs.copy()
    diff[:, :n] -= approx.coeffs
    e_l2 = np.sqrt((e**2).sum(axis=1))
    e_grad = np.sqrt((e**2) @ lam)
    psi_grad = np.sqrt((psi**2) @ lam[:n])
    velocity_error = np.sqrt((diff**2) @ lam)

    density_errors = {}
    for r in r_list:
        series = np.array(
            [
                lp_norm(a.values - b.values, r)
                for a, b in zip(ref.densities, approx.densities)
            ]
        )
        density_errors[float(r)] = series

    stokes2 = (ref.coeffs**2) @ lam**2
    stokes_sup = float(np.sqrt(stokes2.max())) if stokes2.size else 0.0
    grad_sup2 = float((e_grad**2).max()) if e_grad.size else 0.0

    def safe_ratio(num, den):
        if den == 0.0:
            return np.zeros_like(num)
        return num / den

    ratio_tail_grad = safe_ratio(e_grad**2 * lam_next, stokes_sup**2)
    ratio_tail_l2 = safe_ratio(e_l2**2 * lam_next, grad_sup2)

    return ErrorDecomposition(
        times=ref.times.copy(),
        cut=int(n),
        lam_next=lam_next,
        e_coeffs=e,
        psi_coeffs=psi,
        theta_coeffs=theta,
        e_l2=e_l2,
        e_grad=e_grad,
        psi_grad=psi_grad,
        velocity_error=velocity_error,
        density_errors=density_errors,
        stokes_sup=stokes_sup,
        ratio_tail_grad=ratio_tail_grad,
        ratio_tail_l2=ratio_tail_l2,
    )


def _advective(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    jac = gradient(b)
    return dealias(a[0] * jac[0] + a[1] * jac[1])


def residual_force_norm(
    ref: Trajectory,
    n: int,
    p: float,
    transform: GridTransform,
    forcing=None,
    xi_coeffs=None,
    xi_t_coeffs=None,
) -> np.ndarray:
    """L^p norm series of the momentum residual field.

    The field collects every term of the perturbed momentum balance that
    the error analysis treats as data: du/dt + (u.grad)u - f, plus the
    perturbation couplings d xi/dt + (u.grad) P_n xi + (P_n xi .grad) u
    + (xi.grad) xi when a perturbation series is supplied.  Products are
    dealiased exactly as in the solver.
    """
    basis = ref.basis
    if not 1 <= n <= basis.size:
        raise ValueError(f"cut {n} outside [1, {basis.size}]")
    if xi_coeffs is not None:
        xi_coeffs = np.asarray(xi_coeffs, dtype=np.float64)
        xi_t_coeffs = np.asarray(xi_t_coeffs, dtype=np.float64)
        if xi_coeffs.shape != (len(ref.times), basis.size):
            raise ValueError("perturbation series shape mismatch")
        if xi_t_coeffs.shape != xi_coeffs.shape:
            raise ValueError("perturbation rate series shape mismatch")
    out = np.zeros(len(ref.times))
    for i, t in enumerate(ref.times):
        u = synthesize(ref.velocity_at(i), transform)
        ut = synthesize(SpectralVelocity(basis, ref.ut_coeffs[i]), transform)
        g = ut + _advective(u, u)
        if forcing is not None and forcing.kind != "zero":
            g = g - synthesize(
                SpectralVelocity(basis, forcing.coefficients(basis, t)), transform
            )
        if xi_coeffs is not None:
            xi = synthesize(SpectralVelocity(basis, xi_coeffs[i]), transform)
            cut_c = xi_coeffs[i].copy()
            cut_c[n:] = 0.0
            xi_cut = synthesize(SpectralVelocity(basis, cut_c), transform)
            xi_t = synthesize(SpectralVelocity(basis, xi_t_coeffs[i]), transform)
            g = g + xi_t + _advective(u, xi_cut) + _advective(xi_cut, u)
            g = g + _advective(xi, xi)
        out[i] = lp_norm(g, p)
    return out


@dataclass(frozen=True)
class MemoryBoundCheck:
    """Outcome of the exponential-memory bound on one sampled function."""

    sup_value: float
    bound: float
    passed: bool
    a1: float
    a2: float


def check_memory_bound(times, values, a1: float, a2: float) -> MemoryBoundCheck:
    """Verify sup_t e^{-t} integral e^tau h dtau <= (a1+a2) e^2/(e-1).

    The premise, integral of h over [s, t] <= a1 (t-s) + a2 for every
    sample pair s <= t, is checked first with a running-minimum scan of
    the trapezoid prefix integral; a violating pair raises ValueError.
    """
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if times.ndim != 1 or times.shape != values.shape or times.size < 2:
        raise ValueError("need matching 1d arrays with at least two samples")
    if np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be strictly increasing")
    if not np.all(np.isfinite(values)) or values.min() < 0:
        raise ValueError("sampled function must be finite and nonnegative")
    for name, a in (("a1", a1), ("a2", a2)):
        if not np.isfinite(a) or a < 0:
            raise ValueError(f"{name} must be finite and nonnegative, got {a}")

    steps = np.diff(times)
    prefix = np.concatenate(
        [[0.0], np.cumsum(0.5 * steps * (values[:-1] + values[1:]))]
    )
    slack = prefix - a1 * (times - times[0])
    tol = 1e-12 * max(1.0, a1 * (times[-1] - times[0]) + a2)
    low = 0
    for j in range(1, len(times)):
        if slack[j - 1] < slack[low]:
            low = j - 1
        if slack[j] - slack[low] > a2 + tol:
            raise ValueError(
                "linear-growth premise fails on "
                f"[{times[low]:g}, {times[j]:g}]: integral "
                f"{prefix[j] - prefix[low]:.6g} exceeds "
                f"{a1 * (times[j] - times[low]) + a2:.6g}"
            )

    weighted = exp_weighted_integral(times, values)
    sup_value = float(weighted.max())
    bound = (a1 + a2) * MEMORY_BOUND_FACTOR
    return MemoryBoundCheck(
        sup_value=sup_value,
        bound=bound,
        passed=sup_value <= bound * (1.0 + 1e-6),
        a1=float(a1),
        a2=float(a2),
    )


def default_memory_suite(seed: int = 0) -> list:
    """Named sample functions exercising the memory bound.

    Returns (name, times, values, a1, a2) tuples: a zero function, a
    constant at the linear-growth slope, and jittered spike trains whose
    burst mass matches the a2 budget.
    """
    rng = np.random.default_rng(seed)
    horizon = 16.0
    dt = 0.002
    times = np.arange(0.0, horizon + 0.5 * dt, dt)
    suite = [
        ("zero", times, np.zeros_like(times), 1.0, 0.0),
        ("constant", times, np.ones_like(times), 1.0, 0.0),
    ]
    for case, width in (("spikes-wide", 0.2), ("spikes-narrow", 0.05)):
        strength = 0.8
        values = np.zeros_like(times)
        centers = np.arange(1.0, horizon, 1.0)
        centers = centers + rng.uniform(-0.1, 0.1, centers.size)
        # snap each burst to the sample grid so its trapezoid mass is
        # exactly strength, keeping the premise scan free of
        # discretization slop
        for c in centers:
            c = round(c / dt) * dt
            inside = (times >= c - 0.5 * width - 1e-9) & (
                times < c + 0.5 * width - 1e-9
            )
            values[inside] = strength / width
        suite.append((case, times, values, strength / 0.8, strength))
    return suite
