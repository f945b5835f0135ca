import math

import numpy as np
import pytest

from semigal import (
    GridTransform,
    SpectralVelocity,
    analyze,
    build_basis,
    dealiased_product,
    gradient,
    grid_axes,
    leray_project,
    lp_norm,
    norms,
    read_grid_binary,
    synthesize,
    write_grid_binary,
    write_grid_csv,
)
from semigal.csvio import read_csv

SCALE = 1.0 / (np.pi * np.sqrt(2.0))


def mesh(n):
    x = grid_axes(n)
    return np.meshgrid(x, x, indexing="ij")


# ---------------------------------------------------------------------------
# synthesize / analyze round trips
# ---------------------------------------------------------------------------

def test_single_mode_closed_form():
    b = build_basis(4)
    t = GridTransform(b, 16)
    v = SpectralVelocity(b, np.array([1.0, 0.0, 0.0, 0.0]))
    field = synthesize(v, t)
    X, Y = mesh(16)
    assert np.allclose(field[0], SCALE * np.cos(Y), atol=1e-13)
    assert np.allclose(field[1], 0.0, atol=1e-13)


def test_round_trip_identity():
    rng = np.random.default_rng(11)
    b = build_basis(60)
    t = GridTransform(b, 48)
    c = rng.standard_normal(b.size)
    v = SpectralVelocity(b, c)
    back = analyze(synthesize(v, t), t)
    assert np.max(np.abs(back.coeffs - c)) < 1e-12


def test_parseval_on_grid():
    rng = np.random.default_rng(5)
    b = build_basis(40)
    t = GridTransform(b, 32)
    v = SpectralVelocity(b, rng.standard_normal(b.size))
    field = synthesize(v, t)
    assert lp_norm(field, 2) == pytest.approx(norms(v).l2, rel=1e-12)


def test_gradient_field_projects_to_zero():
    b = build_basis(30)
    t = GridTransform(b, 32)
    X, Y = mesh(32)
    # (sin x, 0) is the gradient of -cos x
    zero = leray_project(np.stack([np.sin(X), np.zeros_like(X)]), t)
    assert np.max(np.abs(zero.coeffs)) < 1e-12
    # a generic smooth gradient field
    phi = np.sin(2 * X + Y) + 0.3 * np.cos(X - 3 * Y)
    g = gradient(phi)
    zero2 = analyze(g, t)
    assert np.max(np.abs(zero2.coeffs)) < 1e-12


def test_constant_field_projects_to_zero():
    b = build_basis(8)
    t = GridTransform(b, 16)
    ones = np.ones((2, 16, 16))
    assert np.max(np.abs(analyze(ones, t).coeffs)) < 1e-13


def test_analyze_recovers_solenoidal_part():
    # mixed field: solenoidal single mode plus a gradient contaminant
    b = build_basis(12)
    t = GridTransform(b, 32)
    X, Y = mesh(32)
    c = np.zeros(b.size)
    c[5] = 0.8
    clean = synthesize(SpectralVelocity(b, c), t)
    dirty = clean + gradient(0.5 * np.sin(X + 2 * Y))
    got = analyze(dirty, t)
    assert np.max(np.abs(got.coeffs - c)) < 1e-12


def test_grid_size_validation():
    b = build_basis(48)  # k_max = 3
    with pytest.raises(ValueError):
        GridTransform(b, 4)
    with pytest.raises(ValueError):
        GridTransform(b, 16.0)
    GridTransform(b, 8)  # at the documented floor, constructible


def test_field_shape_validation():
    b = build_basis(4)
    t = GridTransform(b, 16)
    with pytest.raises(ValueError):
        analyze(np.zeros((16, 16)), t)
    with pytest.raises(ValueError):
        analyze(np.zeros((2, 8, 8)), t)


# ---------------------------------------------------------------------------
# gradient and norms
# ---------------------------------------------------------------------------

def test_gradient_matches_closed_form():
    n = 64
    X, Y = mesh(n)
    f = np.sin(2 * X) * np.cos(3 * Y)
    g = gradient(f)
    assert np.max(np.abs(g[0] - 2 * np.cos(2 * X) * np.cos(3 * Y))) < 1e-12
    assert np.max(np.abs(g[1] + 3 * np.sin(2 * X) * np.sin(3 * Y))) < 1e-12


def test_gradient_of_vector_gives_jacobian():
    n = 32
    X, Y = mesh(n)
    u = np.stack([np.sin(Y), np.cos(X)])
    jac = gradient(u)
    assert jac.shape == (2, 2, n, n)
    assert np.max(np.abs(jac[0, 0])) < 1e-12  # d/dx sin y
    assert np.max(np.abs(jac[1, 0] - np.cos(Y))) < 1e-12
    assert np.max(np.abs(jac[0, 1] + np.sin(X))) < 1e-12


def test_lp_norm_closed_forms():
    n = 64
    X, Y = mesh(n)
    f = np.sin(X)
    area = (2 * np.pi) ** 2
    assert lp_norm(f, 2) == pytest.approx(np.pi * np.sqrt(2), rel=1e-13)
    assert lp_norm(f, 4) == pytest.approx((0.375 * area) ** 0.25, rel=1e-13)
    assert lp_norm(f, math.inf) == pytest.approx(1.0, abs=1e-15)
    const = np.full((n, n), -2.5)
    assert lp_norm(const, 3) == pytest.approx(2.5 * area ** (1 / 3), rel=1e-13)
    vec = np.stack([3 * np.ones((n, n)), 4 * np.ones((n, n))])
    assert lp_norm(vec, math.inf) == pytest.approx(5.0, abs=1e-14)


def test_lp_norm_rejects_bad_p_and_shape():
    f = np.ones((8, 8))
    with pytest.raises(ValueError):
        lp_norm(f, 0.5)
    with pytest.raises(ValueError):
        lp_norm(np.ones((3, 8, 8)), 2)


# ---------------------------------------------------------------------------
# dealiased products against a direct convolution oracle
# ---------------------------------------------------------------------------

def direct_convolution(a, b):
    """O(N^4) convolution oracle on exact Fourier coefficients."""
    n = a.shape[-1]
    ah = np.fft.fft2(a) / n ** 2
    bh = np.fft.fft2(b) / n ** 2
    freqs = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    out = np.zeros((n, n), dtype=complex)
    for i1, k1 in enumerate(freqs):
        for j1, k2 in enumerate(freqs):
            acc = 0.0 + 0.0j
            for i2, p1 in enumerate(freqs):
                for j2, p2 in enumerate(freqs):
                    q1, q2 = k1 - p1, k2 - p2
                    if -n // 2 <= q1 < n - n // 2 and -n // 2 <= q2 < n - n // 2:
                        acc += ah[i2, j2] * bh[q1 % n, q2 % n]
            out[i1, j1] = acc
    return out


def test_dealiased_product_matches_convolution_on_band():
    rng = np.random.default_rng(3)
    n = 12
    cut = (n - 1) // 3
    freqs = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    keep = (np.abs(freqs[:, None]) <= cut) & (np.abs(freqs[None, :]) <= cut)

    def random_band_limited():
        spec = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        f = np.fft.ifft2(spec * keep).real
        return f

    a, b = random_band_limited(), random_band_limited()
    got = np.fft.fft2(dealiased_product(a, b)) / n ** 2
    want = direct_convolution(a, b)
    assert np.max(np.abs(got[keep] - want[keep])) < 1e-12
    # everything above the cutoff is masked away
    assert np.max(np.abs(got[~keep])) < 1e-13


def test_dealiased_product_shape_mismatch():
    with pytest.raises(ValueError):
        dealiased_product(np.ones((8, 8)), np.ones((16, 16)))


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------

def test_grid_csv_round_trip(tmp_path):
    n = 8
    X, Y = mesh(n)
    rho = 1.0 + 0.25 * np.cos(X)
    u = np.stack([np.sin(Y), np.zeros_like(Y)])
    path = tmp_path / "snap.csv"
    write_grid_csv({"rho": rho, "u": u}, str(path))
    _, columns, units, rows = read_csv(str(path))
    assert columns == ["x", "y", "rho", "u_x", "u_y"]
    assert units[0] == "rad"
    assert len(rows) == n * n
    # row order is row-major in (x, y)
    k = 3 * n + 5
    assert float(rows[k][2]) == pytest.approx(rho[3, 5], rel=1e-15)
    assert float(rows[k][3]) == pytest.approx(u[0, 3, 5], rel=1e-15)


def test_grid_binary_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    field = rng.standard_normal((2, 16, 16))
    path = tmp_path / "snap.bin"
    write_grid_binary(field, str(path))
    back = read_grid_binary(str(path), (2, 16, 16))
    assert np.array_equal(back, field)
    # layout is row-major little-endian float64
    raw = np.frombuffer(open(path, "rb").read(), dtype="<f8")
    assert raw[0] == field[0, 0, 0]
    assert raw[16] == field[0, 1, 0]
    with pytest.raises(ValueError):
        read_grid_binary(str(path), (16, 16))
