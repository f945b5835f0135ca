import numpy as np
import pytest

from semigal import GridTransform, build_basis, grid_axes, norms, synthesize
from semigal.catalog import make_density, make_velocity


def test_zero_velocity():
    b = build_basis(8)
    assert np.abs(make_velocity(b, "zero").coeffs).max() == 0.0


def test_shear_velocity_synthesizes_to_plane_shear():
    b = build_basis(8)
    t = GridTransform(b, 32)
    u = synthesize(make_velocity(b, "shear", 1.4), t)
    y = grid_axes(32)
    assert np.abs(u[0] - 1.4 * np.sin(y)[None, :]).max() < 1e-13
    assert np.abs(u[1]).max() < 1e-13


def test_modes_velocity_pads_with_zeros():
    b = build_basis(8)
    v = make_velocity(b, "modes", coefficients=[1.0, 2.0, 3.0])
    assert np.array_equal(v.coeffs, [1.0, 2.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0])


def test_random_band_is_deterministic_and_scaled():
    b = build_basis(20)
    v1 = make_velocity(b, "random_band", amplitude=2.5, seed=7, band=(4, 12))
    v2 = make_velocity(b, "random_band", amplitude=2.5, seed=7, band=(4, 12))
    assert np.array_equal(v1.coeffs, v2.coeffs)
    assert norms(v1).dirichlet == pytest.approx(2.5, rel=1e-12)
    assert np.abs(v1.coeffs[:4]).max() == 0.0
    assert np.abs(v1.coeffs[12:]).max() == 0.0
    v3 = make_velocity(b, "random_band", amplitude=2.5, seed=8, band=(4, 12))
    assert not np.array_equal(v1.coeffs, v3.coeffs)


def test_velocity_validation():
    b = build_basis(8)
    with pytest.raises(ValueError):
        make_velocity(b, "vortex")
    with pytest.raises(ValueError):
        make_velocity(b, "modes")
    with pytest.raises(ValueError):
        make_velocity(b, "modes", coefficients=np.zeros(9))
    with pytest.raises(ValueError):
        make_velocity(b, "random_band", band=(4, 4))
    with pytest.raises(ValueError):
        make_velocity(b, "shear", amplitude=np.nan)


def test_uniform_density_defaults_to_midpoint():
    rho = make_density(16, "uniform", alpha=0.5, beta=1.5)
    assert np.abs(rho.values - 1.0).max() == 0.0
    rho2 = make_density(16, "uniform", alpha=0.5, beta=1.5, value=1.2)
    assert np.abs(rho2.values - 1.2).max() == 0.0


def test_blob_density_spans_the_bounds():
    rho = make_density(64, "blob", alpha=0.5, beta=1.5)
    assert rho.values.min() == pytest.approx(0.5, abs=1e-12)
    assert rho.values.max() == pytest.approx(1.5, abs=1e-12)
    # peak sits at the box center
    assert rho.values[32, 32] == pytest.approx(1.5, abs=1e-12)


def test_stratified_density_has_flat_crest_and_trough():
    rho = make_density(64, "stratified", alpha=0.5, beta=1.5, sharpness=3.0)
    mid = 0.5 * (0.5 + 1.5)
    spread = 0.5 * np.tanh(3.0)
    assert np.abs(rho.values[:, 0] - (mid + spread)).max() < 1e-12
    assert np.abs(rho.values[:, 32] - (mid - spread)).max() < 1e-12
    # rows are constant in x
    assert np.abs(rho.values - rho.values[:1, :]).max() == 0.0


def test_density_validation():
    with pytest.raises(ValueError):
        make_density(16, "plume")
    with pytest.raises(ValueError):
        make_density(16, "uniform", alpha=0.0)
    with pytest.raises(ValueError):
        make_density(16, "uniform", alpha=1.5, beta=0.5)
    with pytest.raises(ValueError):
        make_density(16, "uniform", value=2.0)
    with pytest.raises(ValueError):
        make_density(16, "stratified", sharpness=0.0)
