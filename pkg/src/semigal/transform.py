"""Bridge between spectral coefficients and uniform grid fields.

Fields live on an N x N uniform grid over the 2*pi-periodic square, with
nodes x_i = 2*pi*i/N and row-major (x, y) index order.  Scalars are shaped
(N, N), vector fields (2, N, N).  The bridge synthesizes coefficient
states onto the grid with an inverse FFT, and projects grid fields back
onto the solenoidal modes with a forward FFT.  Projection of a gradient
field is zero by construction, so `analyze` doubles as the discrete Leray
projector restricted to the active basis.

Grid quadrature uses the plain node mean times the box area, which is
exact for trigonometric polynomials the grid resolves.
"""

from __future__ import annotations

import math

import numpy as np

from .basis import BOX_AREA, MODE_SCALE, SpectralBasis, SpectralVelocity
from .csvio import RunManifest, write_csv


def grid_axes(n_grid: int) -> np.ndarray:
    """Node coordinates along one axis."""
    return np.arange(n_grid) * (2.0 * math.pi / n_grid)


def min_grid_size(basis: SpectralBasis) -> int:
    """Smallest grid the basis may be sampled on (dealiasing headroom)."""
    return max(4, math.ceil(1.5 * basis.k_max))


class GridTransform:
    """Cached scatter and gather tables for one (basis, grid) pair.

    Parameters
    ----------
    basis : SpectralBasis
        Active velocity modes.
    n_grid : int
        Nodes per axis.  Must be at least ``min_grid_size(basis)``.
        Exact coefficient round-trips additionally need
        ``n_grid > 2 * basis.k_max``; solver configurations use
        ``n_grid >= 3 * basis.k_max`` so quadratic products are clean.
    """

    def __init__(self, basis: SpectralBasis, n_grid: int):
        if not isinstance(n_grid, (int, np.integer)) or isinstance(n_grid, bool):
            raise ValueError(f"grid size must be an integer, got {n_grid!r}")
        floor = min_grid_size(basis)
        if n_grid < floor:
            raise ValueError(
                f"grid size {n_grid} too small for k_max={basis.k_max}, "
                f"need at least {floor}"
            )
        self.basis = basis
        self.n_grid = int(n_grid)
        self.cell_area = BOX_AREA / self.n_grid ** 2

        n = self.n_grid
        k1 = basis.wavevectors[:, 0] % n
        k2 = basis.wavevectors[:, 1] % n
        m1 = (-basis.wavevectors[:, 0]) % n
        m2 = (-basis.wavevectors[:, 1]) % n
        self._flat_plus = (k1 * n + k2).astype(np.intp)
        self._flat_minus = (m1 * n + m2).astype(np.intp)

        # spectral amplitude of a unit coefficient at +k, per component:
        # cos modes put q/2 there, sin modes -i q/2, times the mode scale
        phase_factor = np.where(basis.phases == 0, 0.5 + 0.0j, -0.5j)
        self._synth_weight = (
            MODE_SCALE * basis.polarizations * phase_factor[:, None]
        )  # (n_modes, 2) complex

        freqs = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
        self.kx = freqs[:, None] * np.ones((1, n), dtype=np.int64)
        self.ky = np.ones((n, 1), dtype=np.int64) * freqs[None, :]

        # strict 2/3-rule cutoff: aliases of products of kept modes land
        # strictly outside the kept band even when 3 divides n
        cut = (n - 1) // 3
        self.dealias_cut = cut
        self.dealias_keep = (np.abs(self.kx) <= cut) & (np.abs(self.ky) <= cut)

    def __repr__(self) -> str:
        return f"GridTransform(n_modes={self.basis.size}, n_grid={self.n_grid})"


def synthesize(v: SpectralVelocity, transform: GridTransform) -> np.ndarray:
    """Evaluate a coefficient state on the grid.

    Returns
    -------
    ndarray of shape (2, n_grid, n_grid)
    """
    if v.basis is not transform.basis and v.basis.size != transform.basis.size:
        raise ValueError("velocity basis does not match the transform basis")
    n = transform.n_grid
    out = np.empty((2, n, n))
    for comp in range(2):
        spec = np.zeros(n * n, dtype=np.complex128)
        amp = v.coeffs * transform._synth_weight[:, comp] * (n * n)
        np.add.at(spec, transform._flat_plus, amp)
        np.add.at(spec, transform._flat_minus, np.conj(amp))
        out[comp] = np.fft.ifft2(spec.reshape(n, n)).real
    return out


def analyze(field: np.ndarray, transform: GridTransform) -> SpectralVelocity:
    """Project a grid vector field onto the active solenoidal modes.

    This is the L2 inner product against each basis mode, evaluated by
    grid quadrature through the FFT.  Gradient fields and the mean mode
    project to zero, so the result is the Leray projection restricted to
    the basis.

    Parameters
    ----------
    field : ndarray of shape (2, n_grid, n_grid)
    transform : GridTransform

    Returns
    -------
    SpectralVelocity over ``transform.basis``
    """
    field = np.asarray(field, dtype=np.float64)
    n = transform.n_grid
    if field.shape != (2, n, n):
        raise ValueError(
            f"expected vector field of shape (2, {n}, {n}), got {field.shape}"
        )
    coeffs = np.zeros(transform.basis.size)
    # (field, w) picks twice the real part of fhat . conj(amplitude at +k)
    for comp in range(2):
        spec = np.fft.fft2(field[comp]).reshape(-1)[transform._flat_plus] / (n * n)
        coeffs += (
            2.0
            * BOX_AREA
            * (spec * np.conj(transform._synth_weight[:, comp])).real
        )
    return SpectralVelocity(transform.basis, coeffs)


def leray_project(field: np.ndarray, transform: GridTransform) -> SpectralVelocity:
    """Alias of `analyze`: grid field to solenoidal coefficients."""
    return analyze(field, transform)


def gradient(field: np.ndarray) -> np.ndarray:
    """Spectral gradient along the last two axes.

    For a scalar (N, N) field the result is (2, N, N) with the derivative
    direction first.  For a stacked field (..., N, N) each leading slot is
    differentiated independently, so a velocity (2, N, N) gives the full
    Jacobian (2, 2, N, N) indexed [direction, component].
    """
    field = np.asarray(field, dtype=np.float64)
    n = field.shape[-1]
    if field.shape[-2] != n:
        raise ValueError(f"expected square grid axes, got {field.shape}")
    freqs = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
    spec = np.fft.fft2(field, axes=(-2, -1))
    dx = np.fft.ifft2(1j * freqs[:, None] * spec, axes=(-2, -1)).real
    dy = np.fft.ifft2(1j * freqs[None, :] * spec, axes=(-2, -1)).real
    return np.stack([dx, dy])


def lp_norm(field: np.ndarray, p: float) -> float:
    """L^p norm by grid quadrature, with p = inf the grid maximum.

    Vector fields (2, N, N) use the pointwise Euclidean magnitude.
    """
    field = np.asarray(field, dtype=np.float64)
    if field.ndim == 3 and field.shape[0] == 2:
        mag = np.sqrt(field[0] ** 2 + field[1] ** 2)
    elif field.ndim == 2:
        mag = np.abs(field)
    else:
        raise ValueError(f"expected (N, N) or (2, N, N) field, got {field.shape}")
    if p == math.inf or p == np.inf:
        return float(np.max(mag))
    p = float(p)
    if p < 1.0:
        raise ValueError(f"p must be at least 1 or inf, got {p}")
    n = mag.shape[-1]
    cell = BOX_AREA / (n * n)
    return float(np.sum(mag ** p * cell) ** (1.0 / p))


def dealias(field: np.ndarray) -> np.ndarray:
    """Zero every mode above the 2/3-rule cutoff of the grid."""
    field = np.asarray(field, dtype=np.float64)
    n = field.shape[-1]
    freqs = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
    cut = (n - 1) // 3
    keep = (np.abs(freqs[:, None]) <= cut) & (np.abs(freqs[None, :]) <= cut)
    spec = np.fft.fft2(field, axes=(-2, -1))
    return np.fft.ifft2(spec * keep, axes=(-2, -1)).real


def dealiased_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pointwise product with 2/3-rule masking of inputs and output.

    For inputs already band-limited below the cutoff this equals the true
    convolution restricted to the retained band.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[-2:] != b.shape[-2:]:
        raise ValueError(
            f"operands live on different grids: {a.shape} vs {b.shape}"
        )
    return dealias(dealias(a) * dealias(b))


def write_grid_csv(
    fields: dict[str, np.ndarray],
    path: str,
    manifest: RunManifest | None = None,
) -> None:
    """Flat CSV dump of one or more grid fields: x, y, then one value
    column per named field (vector fields expand to _x and _y columns)."""
    if not fields:
        raise ValueError("no fields given")
    shapes = {np.asarray(f).shape[-1] for f in fields.values()}
    if len(shapes) != 1:
        raise ValueError("all fields must share one grid size")
    n = shapes.pop()
    x = grid_axes(n)
    columns = ["x", "y"]
    flat = []
    for name, f in fields.items():
        f = np.asarray(f, dtype=np.float64)
        if f.ndim == 2:
            columns.append(name)
            flat.append(f.reshape(-1))
        elif f.ndim == 3 and f.shape[0] == 2:
            columns.extend([f"{name}_x", f"{name}_y"])
            flat.append(f[0].reshape(-1))
            flat.append(f[1].reshape(-1))
        else:
            raise ValueError(f"field {name} has unsupported shape {f.shape}")
    X, Y = np.meshgrid(x, x, indexing="ij")
    data = np.column_stack([X.reshape(-1), Y.reshape(-1)] + flat)
    units = ["rad", "rad"] + ["-"] * (len(columns) - 2)
    write_csv(path, columns, units, data, manifest=manifest)


def write_grid_binary(field: np.ndarray, path: str) -> None:
    """Raw row-major little-endian float64 dump (no header)."""
    arr = np.ascontiguousarray(np.asarray(field, dtype="<f8"))
    with open(path, "wb") as fh:
        fh.write(arr.tobytes())


def read_grid_binary(path: str, shape: tuple[int, ...]) -> np.ndarray:
    with open(path, "rb") as fh:
        data = np.frombuffer(fh.read(), dtype="<f8")
    expected = int(np.prod(shape))
    if data.size != expected:
        raise ValueError(
            f"file holds {data.size} values, expected {expected} for {shape}"
        )
    return data.reshape(shape).astype(np.float64)
