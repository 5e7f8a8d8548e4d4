import numpy as np
import pytest
from pydantic import ValidationError

from nls_services.spectral_core import (
    ComplexField,
    Grid,
    IncompatibleGridError,
    SpaceTimeField,
    abs_derivative,
    apply_multiplier,
    dealias_mask,
    forward_dft,
    free_propagator,
    half_derivative,
    inner_product,
    inverse_dft,
    l2_norm,
    spectral_l2_norm,
    spectral_tail_ratio,
)


def plane_wave(grid, mode):
    k = 2 * np.pi * mode / grid.length
    return ComplexField(grid=grid, values=np.exp(1j * k * grid.x))


@pytest.mark.parametrize("n_points", [0, 4, 6, 100])
def test_grid_rejects_bad_sizes(n_points):
    with pytest.raises(ValidationError):
        Grid(n_points=n_points, length=1.0)


@pytest.mark.parametrize("length", [0.0, -1.0, float("inf")])
def test_grid_rejects_bad_length(length):
    with pytest.raises(ValidationError):
        Grid(n_points=8, length=length)


def test_grid_coordinates_and_wavenumbers():
    grid = Grid(n_points=8, length=2 * np.pi)
    assert grid.x[0] == pytest.approx(-np.pi)
    assert grid.dx == pytest.approx(np.pi / 4)
    np.testing.assert_allclose(grid.wavenumbers, [0, 1, 2, 3, -4, -3, -2, -1])


def test_field_rejects_nan_and_wrong_length(small_grid):
    with pytest.raises(ValidationError):
        ComplexField(grid=small_grid, values=np.full(64, np.nan))
    with pytest.raises(ValidationError):
        ComplexField(grid=small_grid, values=np.zeros(32))


@pytest.mark.parametrize("seed", range(5))
def test_dft_round_trip(small_grid, make_random_field, seed):
    u = make_random_field(small_grid, seed)
    back = inverse_dft(forward_dft(u))
    assert np.max(np.abs(back.values - u.values)) <= 1e-12


def test_forward_dft_of_constant_is_mean(small_grid):
    u = ComplexField(grid=small_grid, values=np.full(64, 2.5 + 1j))
    coeffs = forward_dft(u).values
    assert coeffs[0] == pytest.approx(2.5 + 1j)
    assert np.max(np.abs(coeffs[1:])) < 1e-14


def test_half_derivative_of_constant_vanishes(small_grid):
    u = ComplexField(grid=small_grid, values=np.ones(64))
    assert np.max(np.abs(half_derivative(u).values)) < 1e-14


@pytest.mark.parametrize("mode", [1, 3, -5])
def test_half_derivative_of_plane_wave(small_grid, mode):
    u = plane_wave(small_grid, mode)
    k = 2 * np.pi * mode / small_grid.length
    np.testing.assert_allclose(half_derivative(u).values, np.sqrt(abs(k)) * u.values, atol=1e-12)


def test_half_derivative_composes_to_abs_derivative(small_grid, make_random_field):
    u = make_random_field(small_grid, 3)
    twice = half_derivative(half_derivative(u))
    np.testing.assert_allclose(twice.values, abs_derivative(u).values, atol=1e-10)


def test_free_propagator_is_unitary_group(small_grid, make_random_field):
    u = make_random_field(small_grid, 7)
    assert l2_norm(free_propagator(u, 0.37)) == pytest.approx(l2_norm(u), rel=1e-13)
    combined = free_propagator(free_propagator(u, 0.2), 0.3)
    np.testing.assert_allclose(combined.values, free_propagator(u, 0.5).values, atol=1e-12)
    np.testing.assert_allclose(free_propagator(u, 0.0).values, u.values, atol=1e-14)


def test_free_propagator_phase_sign(small_grid):
    u = plane_wave(small_grid, 2)
    t = 0.1
    # u_t = -i u_xx 对 e^{ikx} 给出 e^{+ik²t}
    np.testing.assert_allclose(free_propagator(u, t).values, np.exp(4j * t) * u.values, atol=1e-12)


def test_inner_product_and_norms(small_grid, make_random_field):
    u = make_random_field(small_grid, 1)
    v = make_random_field(small_grid, 2)
    assert inner_product(u, v) == pytest.approx(np.conj(inner_product(v, u)))
    assert inner_product(u, u).real == pytest.approx(l2_norm(u) ** 2)
    assert spectral_l2_norm(u) == pytest.approx(l2_norm(u), rel=1e-12)


def test_plane_wave_norm_is_sqrt_length(small_grid):
    assert l2_norm(plane_wave(small_grid, 1)) == pytest.approx(np.sqrt(small_grid.length))


def test_mismatched_grids_raise(small_grid):
    other = Grid(n_points=32, length=2 * np.pi)
    with pytest.raises(IncompatibleGridError, match="incompatible grids"):
        inner_product(ComplexField.zeros(small_grid), ComplexField.zeros(other))


def test_apply_multiplier_identity(small_grid, make_random_field):
    u = make_random_field(small_grid, 4)
    np.testing.assert_allclose(apply_multiplier(u, np.ones(64)).values, u.values, atol=1e-14)


def test_spectral_tail_ratio(small_grid):
    assert spectral_tail_ratio(ComplexField.zeros(small_grid)) == 0.0
    assert spectral_tail_ratio(plane_wave(small_grid, 1)) < 1e-12
    assert spectral_tail_ratio(plane_wave(small_grid, 30)) == pytest.approx(1.0)


def test_dealias_mask_keeps_two_thirds():
    grid = Grid(n_points=64, length=1.0)
    mask = dealias_mask(grid)
    assert mask[0] == 1.0
    assert mask[grid.n_points // 3] == 1.0
    assert mask[grid.n_points // 3 + 1] == 0.0


def test_space_time_field_validation(small_grid):
    frame = ComplexField.zeros(small_grid)
    other = ComplexField.zeros(Grid(n_points=8, length=1.0))
    with pytest.raises(ValidationError):
        SpaceTimeField(grid=small_grid, dt_sample=0.1, frames=[])
    # 校验器内抛出的 ValueError 由 pydantic 包装
    with pytest.raises(ValidationError, match="incompatible grids"):
        SpaceTimeField(grid=small_grid, dt_sample=0.1, frames=[frame, other])
    traj = SpaceTimeField(grid=small_grid, dt_sample=0.5, frames=[frame, frame, frame], t0=1.0)
    np.testing.assert_allclose(traj.times, [1.0, 1.5, 2.0])
    assert traj.as_array().shape == (3, 64)


@pytest.mark.parametrize("t", [0.37, 2.0])
def test_half_derivative_commutes_with_free_propagator(small_grid, make_random_field, t):
    u = make_random_field(small_grid, 13)
    left = half_derivative(free_propagator(u, t))
    right = free_propagator(half_derivative(u), t)
    assert l2_norm(left.with_values(left.values - right.values)) <= 1e-11 * l2_norm(left)


@pytest.mark.parametrize("seed", range(10))
def test_cauchy_schwarz(small_grid, make_random_field, seed):
    u = make_random_field(small_grid, seed, amp=1.5)
    v = make_random_field(small_grid, seed + 100, amp=0.7)
    assert abs(inner_product(u, v)) <= l2_norm(u) * l2_norm(v) * (1 + 1e-12)
    assert abs(inner_product(u, u)) == pytest.approx(l2_norm(u) ** 2, rel=1e-12)
