"""Truncation-convergence studies: one reference run, a ladder of smaller
bases, error curves against the next eigenvalue, and rate fits."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .basis import build_basis, eigenvalue_after
from .catalog import make_density, make_velocity
from .diagnostics import decompose
from .solver import ForcingSpec, SolverConfig, solve


def density_exponent_limit(p_exponent: float) -> float:
    """Largest admissible density-error exponent for a given p."""
    if math.isinf(p_exponent):
        return 6.0
    return 6.0 * p_exponent / (6.0 + p_exponent)


@dataclass
class StudyPlan:
    """Ladder description: which truncations to run and what to record.

    Truncation sizes must sit at eigenvalue jumps so the next eigenvalue
    actually grows along the ladder.  The reference size must be at
    least three times the largest truncation.  Checkpoints must land on
    stored times of the base configuration.
    """

    base: SolverConfig
    n_list: tuple
    n_ref: int
    checkpoints: tuple
    r_list: tuple = (2.0, 3.0)
    p_exponent: float = 6.0

    def __post_init__(self):
        self.n_list = tuple(int(n) for n in self.n_list)
        self.checkpoints = tuple(float(t) for t in self.checkpoints)
        self.r_list = tuple(float(r) for r in self.r_list)
        if len(self.n_list) == 0:
            raise ValueError("n_list is empty")
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ValueError(f"n_list must be strictly increasing, got {self.n_list}")
        if self.n_list[0] < 1:
            raise ValueError("truncation sizes must be positive")
        top = build_basis(max(self.n_list))
        for n in self.n_list:
            if eigenvalue_after(n) <= top.eigenvalues[n - 1]:
                raise ValueError(
                    f"truncation size {n} does not sit at an eigenvalue jump"
                )
        if self.n_ref < 3 * max(self.n_list):
            raise ValueError(
                f"reference size {self.n_ref} is below three times the "
                f"largest truncation {max(self.n_list)}"
            )
        if not (math.isinf(self.p_exponent) or self.p_exponent >= 6.0):
            raise ValueError(
                f"p_exponent must be at least 6 or inf, got {self.p_exponent}"
            )
        limit = density_exponent_limit(self.p_exponent)
        for r in self.r_list:
            if not 2.0 <= r <= limit:
                raise ValueError(
                    f"density exponent {r} outside [2, {limit:g}] for "
                    f"p_exponent {self.p_exponent}"
                )
        unit = self.base.stride * self.base.dt
        for t in self.checkpoints:
            if not self.base.t_start <= t <= self.base.t_end:
                raise ValueError(f"checkpoint {t} outside the run span")
            k = round((t - self.base.t_start) / unit)
            if abs(k * unit - (t - self.base.t_start)) > 1e-9 * max(1.0, t):
                raise ValueError(
                    f"checkpoint {t} does not land on a stored time"
                )
        iv = self.base.initial_velocity
        if iv.basis.size < self.n_ref:
            raise ValueError(
                f"initial velocity carries {iv.basis.size} modes, fewer than "
                f"the reference size {self.n_ref}"
            )
        modes = self.base.forcing.modes
        if modes and max(modes) >= min(self.n_list):
            raise ValueError(
                f"forcing mode {max(modes)} outside the smallest basis "
                f"{min(self.n_list)}"
            )


@dataclass
class ConvergenceReport:
    """Error curves of a ladder study at the requested checkpoints.

    velocity_errors has one row per completed truncation; density_errors
    maps each exponent to a like-shaped array.  Normalized curves carry
    the factor sqrt(next eigenvalue), with density curves divided by
    checkpoint time (zero column left at zero).  partial marks a study
    stopped by its time budget.
    """

    n_list: tuple
    lam_next: np.ndarray
    checkpoints: tuple
    r_list: tuple
    velocity_errors: np.ndarray
    density_errors: dict
    normalized_velocity: np.ndarray
    normalized_density: dict
    elapsed: float = 0.0
    partial: bool = False
    flags: dict = field(default_factory=dict)

    def summary_lines(self) -> list:
        lines = []
        for flag, value in sorted(self.flags.items()):
            lines.append(f"{flag}: {'pass' if value else 'FAIL'}")
        for j, t in enumerate(self.checkpoints):
            if (
                t <= 0
                or len(self.n_list) < 2
                or np.any(self.velocity_errors[:, j] <= 0)
            ):
                continue
            slope, constant = fit_rate(self.lam_next, self.velocity_errors[:, j])
            lines.append(
                f"velocity rate at t={t:g}: slope {slope:.3f}, "
                f"constant {constant:.6g}"
            )
        if self.partial:
            lines.append("partial: budget exhausted before the full ladder")
        return lines


def fit_rate(lam_next, errors):
    """Least-squares slope of log error against log eigenvalue.

    Also returns the largest error times sqrt(eigenvalue), the measured
    stand-in for the bound's constant.
    """
    lam_next = np.asarray(lam_next, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.float64)
    if lam_next.shape != errors.shape or lam_next.ndim != 1:
        raise ValueError("eigenvalues and errors must be 1d of equal length")
    if np.any(errors <= 0) or np.any(lam_next <= 0):
        raise ValueError("rate fit needs positive errors and eigenvalues")
    if errors.size < 2:
        raise ValueError("rate fit needs at least two ladder points")
    slope = float(np.polyfit(np.log(lam_next), np.log(errors), 1)[0])
    constant = float(np.max(errors * np.sqrt(lam_next)))
    return slope, constant


def check_density_growth(
    report: ConvergenceReport, r: float, factor: float = 3.0
) -> bool:
    """Linear-in-time envelope test for the density error curves.

    Calibrates the constant at the earliest positive checkpoint and
    accepts when every later checkpoint stays within factor times the
    implied envelope C t / sqrt(next eigenvalue).
    """
    r = float(r)
    if r not in report.density_errors:
        raise ValueError(f"report has no density errors for exponent {r}")
    errs = report.density_errors[r]
    times = np.asarray(report.checkpoints)
    positive = np.nonzero(times > 0)[0]
    if positive.size < 2:
        raise ValueError("need at least two positive checkpoints")
    j0 = positive[0]
    t0 = times[j0]
    c_fit = float(np.max(errs[:, j0] * np.sqrt(report.lam_next) / t0))
    if c_fit == 0.0:
        return bool(np.all(errs[:, positive] == 0.0))
    for j in positive[1:]:
        envelope = factor * c_fit * times[j] / np.sqrt(report.lam_next)
        if np.any(errs[:, j] > envelope):
            return False
    return True


def _checkpoint_indices(traj, checkpoints):
    idx = []
    for t in checkpoints:
        hits = np.nonzero(np.abs(traj.times - t) <= 1e-9 * max(1.0, t))[0]
        if hits.size != 1:
            raise ValueError(f"checkpoint {t} not found among stored times")
        idx.append(int(hits[0]))
    return np.array(idx)


def run_study(
    plan: StudyPlan, threads: int = 1, budget_seconds: float | None = None
) -> ConvergenceReport:
    """Run the reference and the ladder, then assemble the error curves.

    Runs are independent and execute on a thread pool.  When a time
    budget is given, ladder runs that would start after it is exhausted
    are dropped and the report is marked partial.
    """
    if threads < 1:
        raise ValueError(f"threads must be positive, got {threads}")
    start = time.monotonic()
    configs = [replace(plan.base, basis_size=n) for n in plan.n_list]
    ref_config = replace(plan.base, basis_size=plan.n_ref)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        ref_future = pool.submit(solve, ref_config)
        futures = []
        for cfg in configs:
            if (
                budget_seconds is not None
                and time.monotonic() - start > budget_seconds
            ):
                break
            futures.append(pool.submit(solve, cfg))
        ref = ref_future.result()
        runs = [f.result() for f in futures]

    completed = plan.n_list[: len(runs)]
    lam_next = np.array([eigenvalue_after(n) for n in completed])
    idx = _checkpoint_indices(ref, plan.checkpoints)
    times = np.asarray(plan.checkpoints)

    velocity = np.zeros((len(runs), len(times)))
    density = {r: np.zeros_like(velocity) for r in plan.r_list}
    for i, traj in enumerate(runs):
        dec = decompose(ref, traj, r_list=plan.r_list)
        velocity[i] = dec.velocity_error[idx]
        for r in plan.r_list:
            density[r][i] = dec.density_errors[r][idx]

    norm_v = velocity * np.sqrt(lam_next)[:, None]
    norm_d = {}
    for r in plan.r_list:
        scaled = np.zeros_like(density[r])
        mask = times > 0
        scaled[:, mask] = (
            density[r][:, mask] * np.sqrt(lam_next)[:, None] / times[mask]
        )
        norm_d[r] = scaled

    report = ConvergenceReport(
        n_list=completed,
        lam_next=lam_next,
        checkpoints=plan.checkpoints,
        r_list=plan.r_list,
        velocity_errors=velocity,
        density_errors=density,
        normalized_velocity=norm_v,
        normalized_density=norm_d,
        elapsed=time.monotonic() - start,
        partial=len(runs) < len(plan.n_list),
    )
    if len(runs) == len(plan.n_list) and len(runs) > 1:
        late = times > 0
        report.flags["velocity_monotone"] = bool(
            np.all(np.diff(velocity[:, late], axis=0) <= 1e-12)
        )
        base_row = norm_v[0]
        report.flags["normalized_bounded"] = bool(
            np.all(norm_v[:, late] <= 2.0 * base_row[late] + 1e-12)
        )
        for r in plan.r_list:
            report.flags[f"density_growth_r{r:g}"] = check_density_growth(
                report, r
            )
    return report


BENCHMARK_FORCING_AMPLITUDE = 1.0


def benchmark_plan(
    t_end: float = 2.0,
    dt: float = 1e-3,
    grid_size: int = 128,
    amplitude: float = BENCHMARK_FORCING_AMPLITUDE,
    stride: int = 500,
) -> StudyPlan:
    """The repository's fixed stirred-flow convergence benchmark.

    A steady two-mode force stirs a centered density blob between 0.5
    and 1.5.  The velocity starts at the steady linear response of the
    forced modes, so the flow is developed from the first step and error
    rates stay steady over the run.  Truncation sizes close the
    eigenvalue shells 4, 9, 16, 25 and 36; the reference closes the
    shell at 128.
    """
    n_ref = 404
    top = build_basis(n_ref)
    start = [0.0] * 6
    for m in (0, 5):
        start[m] = amplitude / float(top.eigenvalues[m])
    iv = make_velocity(top, "modes", coefficients=start)
    rho = make_density(grid_size, "blob", alpha=0.5, beta=1.5)
    base = SolverConfig(
        basis_size=n_ref,
        grid_size=grid_size,
        dt=dt,
        t_end=t_end,
        forcing=ForcingSpec("steady", amplitude, (0, 5)),
        initial_velocity=iv,
        initial_density=rho,
        stride=stride,
    )
    checkpoints = tuple(t for t in (0.0, 0.5, 1.0, 2.0) if t <= t_end)
    return StudyPlan(
        base=base,
        n_list=(8, 24, 44, 68, 108),
        n_ref=n_ref,
        checkpoints=checkpoints,
        r_list=(2.0, 3.0, 6.0),
        p_exponent=math.inf,
    )
