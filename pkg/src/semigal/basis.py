"""Divergence-free Fourier eigenbasis on the 2*pi-periodic square.

The mean-free solenoidal eigenfunctions of the Stokes operator on the
periodic box are plane waves.  For each integer wavevector k != 0 (one
representative per +/- pair) there is a single transverse polarization
direction, and a cosine and a sine phase.  Eigenvalues are |k|^2, so the
smallest one is 1.  All coefficients in this module are real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .csvio import RunManifest, write_csv

BOX_LENGTH = 2.0 * math.pi
BOX_AREA = BOX_LENGTH ** 2

# L2 norm of cos(k.x) or sin(k.x) over the box is sqrt(2) * pi, so unit
# modes carry this scale factor.
MODE_SCALE = 1.0 / (math.pi * math.sqrt(2.0))

PHASE_COS = "cos"
PHASE_SIN = "sin"


@dataclass(frozen=True)
class WaveMode:
    """One real basis mode: canonical wavevector, phase and polarization."""

    k: tuple[int, int]
    phase: str
    eigenvalue: float
    polarization: tuple[float, float]


class SpectralBasis:
    """Ordered collection of the first n Stokes eigenmodes.

    Ordering is by eigenvalue ascending, ties broken lexicographically by
    wavevector with the cosine phase before the sine phase.  Bases of
    different sizes are nested: the first m modes of a size-n basis equal
    the size-m basis.
    """

    def __init__(self, modes: Sequence[WaveMode]):
        if len(modes) == 0:
            raise ValueError("basis must contain at least one mode")
        self.modes = list(modes)
        self.size = len(self.modes)
        self.wavevectors = np.array([m.k for m in self.modes], dtype=np.int64)
        self.eigenvalues = np.array([m.eigenvalue for m in self.modes])
        self.polarizations = np.array([m.polarization for m in self.modes])
        self.phases = np.array(
            [0 if m.phase == PHASE_COS else 1 for m in self.modes], dtype=np.int8
        )

    @property
    def k_max(self) -> int:
        """Largest wavevector component magnitude over the active modes."""
        return int(np.max(np.abs(self.wavevectors)))

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        return f"SpectralBasis(size={self.size}, k_max={self.k_max})"


def _canonical_wavevectors(radius: int) -> list[tuple[int, int]]:
    """Canonical representatives (one per +/- pair) with |k| <= radius."""
    out = []
    for k1 in range(0, radius + 1):
        for k2 in range(-radius, radius + 1):
            if k1 == 0 and k2 <= 0:
                continue
            if k1 * k1 + k2 * k2 <= radius * radius:
                out.append((k1, k2))
    return out


def build_basis(n: int) -> SpectralBasis:
    """Construct the first n modes in canonical order.

    Args:
        n: number of modes, at least 1.

    Returns:
        SpectralBasis of size exactly n.
    """
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise ValueError(f"basis size must be an integer, got {n!r}")
    if n < 1:
        raise ValueError(f"basis size must be at least 1, got {n}")
    # Each radius-r disk holds ~pi*r^2 wavevector pairs and twice as many
    # modes, so this radius always covers n modes.
    radius = int(math.isqrt(n)) + 2
    while True:
        pairs = _canonical_wavevectors(radius)
        if 2 * len(pairs) >= n:
            break
        radius += 1
    keyed = sorted(
        (k[0] * k[0] + k[1] * k[1], k[0], k[1], phase)
        for k in pairs
        for phase in (0, 1)
    )
    modes = []
    for lam, k1, k2, phase in keyed[:n]:
        norm = math.sqrt(lam)
        pol = (k2 / norm, -k1 / norm)
        modes.append(
            WaveMode(
                k=(k1, k2),
                phase=PHASE_COS if phase == 0 else PHASE_SIN,
                eigenvalue=float(lam),
                polarization=pol,
            )
        )
    return SpectralBasis(modes)


def eigenvalue_after(n: int) -> float:
    """Eigenvalue of the first mode outside a size-n truncation."""
    return build_basis(n + 1).eigenvalues[-1]


def count_modes_below(eigenvalue: float) -> int:
    """Number of modes with eigenvalue strictly below the given cut.

    Cuts placed on an eigenvalue shell give truncations whose next
    eigenvalue jumps, which is what convergence ladders want.
    """
    if eigenvalue <= 1:
        return 0
    radius = int(math.sqrt(eigenvalue)) + 1
    pairs = _canonical_wavevectors(radius)
    return 2 * sum(1 for k in pairs if k[0] ** 2 + k[1] ** 2 < eigenvalue)


@dataclass
class SpectralVelocity:
    """Velocity state as real coefficients over a SpectralBasis."""

    basis: SpectralBasis
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.shape != (self.basis.size,):
            raise ValueError(
                f"coefficient vector has shape {self.coeffs.shape}, "
                f"expected ({self.basis.size},)"
            )
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("coefficient vector contains non-finite entries")

    def copy(self) -> "SpectralVelocity":
        return SpectralVelocity(self.basis, self.coeffs.copy())


class VelocityNorms(NamedTuple):
    l2: float
    dirichlet: float
    stokes: float


def norms(v: SpectralVelocity) -> VelocityNorms:
    """L2, gradient and Stokes-operator norms from the coefficients.

    With orthonormal modes these are plain weighted sums: the L2 norm is
    sqrt(sum c^2), the gradient norm weights by the eigenvalue and the
    Stokes norm by its square.
    """
    c2 = v.coeffs ** 2
    lam = v.basis.eigenvalues
    return VelocityNorms(
        l2=float(np.sqrt(np.sum(c2))),
        dirichlet=float(np.sqrt(np.sum(lam * c2))),
        stokes=float(np.sqrt(np.sum(lam ** 2 * c2))),
    )


def _check_cut(v: SpectralVelocity, k: int) -> None:
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
        raise ValueError(f"truncation index must be an integer, got {k!r}")
    if k < 0 or k > v.basis.size:
        raise ValueError(
            f"truncation index {k} outside [0, {v.basis.size}]"
        )


def project_k(v: SpectralVelocity, k: int) -> SpectralVelocity:
    """Truncation onto the first k modes (coefficients beyond k zeroed)."""
    _check_cut(v, k)
    out = v.coeffs.copy()
    out[k:] = 0.0
    return SpectralVelocity(v.basis, out)


def complement_k(v: SpectralVelocity, k: int) -> SpectralVelocity:
    """Tail v - P_k v (coefficients up to k zeroed)."""
    _check_cut(v, k)
    out = v.coeffs.copy()
    out[:k] = 0.0
    return SpectralVelocity(v.basis, out)


@dataclass
class RautmannReport:
    """Tail-decay ratios for one velocity state and truncation level.

    Each ratio compares a truncation-error norm against the next
    eigenvalue times a stronger norm of the full state.  All three are
    bounded by 1, with equality when the state is a single mode sitting
    just outside the truncation.
    """

    cut: int
    eigenvalue_next: float
    ratio_l2_dirichlet: float
    ratio_l2_stokes: float
    ratio_dirichlet_stokes: float

    @property
    def max_ratio(self) -> float:
        return max(
            self.ratio_l2_dirichlet,
            self.ratio_l2_stokes,
            self.ratio_dirichlet_stokes,
        )


def rautmann_check(v: SpectralVelocity, k: int) -> RautmannReport:
    """Evaluate the three tail-decay ratios at truncation level k.

    Requires k < basis size so that the next eigenvalue is known.  If the
    gradient norm vanishes the state is zero and the ratios are reported
    as 0 by convention.
    """
    _check_cut(v, k)
    if k >= v.basis.size:
        raise ValueError(
            f"truncation index {k} needs at least {k + 1} modes to expose "
            "the next eigenvalue"
        )
    lam = v.basis.eigenvalues
    lam_next = float(lam[k])
    c2 = v.coeffs ** 2
    tail2 = float(np.sum(c2[k:]))
    tail_grad2 = float(np.sum((lam * c2)[k:]))
    grad2 = float(np.sum(lam * c2))
    stokes2 = float(np.sum(lam ** 2 * c2))
    if grad2 == 0.0:
        r1 = r2 = r3 = 0.0
    else:
        r1 = tail2 * lam_next / grad2
        r2 = tail2 * lam_next ** 2 / stokes2
        r3 = tail_grad2 * lam_next / stokes2
    return RautmannReport(
        cut=int(k),
        eigenvalue_next=lam_next,
        ratio_l2_dirichlet=r1,
        ratio_l2_stokes=r2,
        ratio_dirichlet_stokes=r3,
    )


def write_basis_manifest(
    basis: SpectralBasis, path: str, manifest: RunManifest | None = None
) -> None:
    """Write the mode table (index, k1, k2, phase, eigenvalue) as CSV."""
    rows = [
        (i, m.k[0], m.k[1], m.phase, m.eigenvalue)
        for i, m in enumerate(basis.modes)
    ]
    write_csv(
        path,
        columns=("index", "k1", "k2", "phase", "eigenvalue"),
        units=("-", "-", "-", "-", "-"),
        rows=rows,
        manifest=manifest,
    )
