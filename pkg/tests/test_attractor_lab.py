import numpy as np
import pytest

from lab_services.attractor_lab import (
    absorbing_entry,
    absorbing_radius,
    balance_convergence,
    ball_energy_identity,
    cross_distance,
    decay_envelope_check,
    kato_constant,
    omega_limit_sample,
    pairing_modulus,
    plane_wave_convergence,
    smoothing_ratio,
    weak_continuity_probe,
)
from nls_services.experiment_config import C_TOL_CALIBRATION, DEFAULT_C_TOL
from nls_services.field_factory import gaussian_field, random_field
from nls_services.solver import SolverParams, evolve, integrate
from nls_services.spectral_core import ComplexField, Grid, SpaceTimeField, l2_norm

from conftest import unit_gaussian, zero_forcing


def scaled(field, factor):
    return field.with_values(field.values * factor)


@pytest.fixture
def absorbing_setup():
    """γ = 1，高斯外力，‖u₀‖ = 10·M₀"""
    grid = Grid(n_points=256, length=64.0)
    gamma = 1.0
    forcing = gaussian_field(grid, 0.05, 0.0, 1.0)
    m0 = absorbing_radius(gamma, l2_norm(forcing))
    u0 = unit_gaussian(grid, width=1.0, norm=10.0 * m0)
    return grid, gamma, forcing, u0


# ==================== 收敛性 ====================

def test_plane_wave_convergence_is_second_order():
    grid = Grid(n_points=256, length=2 * np.pi * 8)
    rows = plane_wave_convergence(grid, 0.5, 1.0, 1, 1.0, [4e-3, 2e-3, 1e-3])
    assert rows[0].ratio is None
    for row in rows[1:]:
        assert 3.3 <= row.ratio <= 4.7


def test_balance_residual_is_second_order(box_grid):
    u0 = unit_gaussian(box_grid, width=1.0)
    forcing = scaled(unit_gaussian(box_grid, width=2.0), 0.5)
    rows, c_tol = balance_convergence(u0, forcing, 1.0, 0.5, [4e-3, 2e-3, 1e-3])
    for row in rows[1:]:
        assert 3.3 <= row.ratio <= 4.7
    assert np.isfinite(c_tol) and c_tol > 0


def test_default_tolerance_covers_calibration_run():
    setup = C_TOL_CALIBRATION
    grid = Grid(n_points=setup["n_points"], length=setup["length"])
    u0 = unit_gaussian(grid, width=setup["initial_width"], norm=setup["initial_norm"])
    forcing = unit_gaussian(grid, width=setup["forcing_width"], norm=setup["forcing_norm"])
    rows, c_tol = balance_convergence(u0, forcing, setup["gamma"], setup["t_final"], setup["dt_list"])
    assert all(3.3 <= row.ratio <= 4.7 for row in rows[1:])
    assert DEFAULT_C_TOL >= c_tol


# ==================== 衰减包络与吸收球 ====================

@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_decay_envelope_holds(seed):
    grid = Grid(n_points=64, length=16.0)
    gamma = np.random.default_rng(seed).uniform(0.2, 2.0)
    u0 = random_field(grid, amp=2.0, seed=seed)
    forcing = random_field(grid, amp=0.5, seed=seed + 1)
    params = SolverParams(gamma=gamma, forcing=forcing, dt=1e-3, t_final=20.0)
    _, diagnostics = evolve(u0, params)
    _, ok = decay_envelope_check(diagnostics, gamma, l2_norm(forcing), l2_norm(u0), dt=1e-3)
    assert ok


@pytest.mark.parametrize("seed", range(3))
def test_discrete_mass_stays_below_envelope(seed):
    # 每一步都是精确的线性阻尼流加保模相位旋转，包络逐步成立
    grid = Grid(n_points=64, length=16.0)
    gamma = 0.2 + 0.6 * seed
    u0 = random_field(grid, amp=2.0, seed=seed)
    forcing = random_field(grid, amp=0.5, seed=seed + 1)
    _, diagnostics = evolve(u0, SolverParams(gamma=gamma, forcing=forcing, dt=5e-2, t_final=5.0))
    max_violation, ok = decay_envelope_check(diagnostics, gamma, l2_norm(forcing), l2_norm(u0), dt=5e-2,
                                             c_tol=1e-9)
    assert ok
    assert max_violation <= 1e-12


def test_decay_envelope_flags_understated_initial_mass(small_grid, make_random_field):
    u0 = make_random_field(small_grid, 6)
    _, diagnostics = evolve(u0, SolverParams(gamma=1.0, forcing=zero_forcing(small_grid), dt=1e-2, t_final=0.5))
    max_violation, ok = decay_envelope_check(diagnostics, 1.0, 0.0, 0.5 * l2_norm(u0), dt=1e-2)
    assert not ok
    assert max_violation == pytest.approx(0.75 * l2_norm(u0) ** 2, rel=1e-9)


def test_decay_envelope_requires_damping(small_grid, make_random_field):
    params = SolverParams(gamma=0.0, forcing=zero_forcing(small_grid), dt=1e-2, t_final=0.1)
    u0 = make_random_field(small_grid, 0)
    _, diagnostics = evolve(u0, params)
    with pytest.raises(ValueError, match="envelope requires damping"):
        decay_envelope_check(diagnostics, 0.0, 0.0, l2_norm(u0))


@pytest.mark.slow
def test_absorbing_ball_entry_before_predicted_bound(absorbing_setup):
    grid, gamma, forcing, u0 = absorbing_setup
    dt = 5e-3
    _, diagnostics = evolve(u0, SolverParams(gamma=gamma, forcing=forcing, dt=dt, t_final=50.0))
    report = absorbing_entry(diagnostics, gamma, l2_norm(forcing))

    f_norm = l2_norm(forcing)
    assert report.m0 == pytest.approx(2 * f_norm / gamma)
    assert report.predicted_bound == pytest.approx(np.log(gamma ** 2 * l2_norm(u0) ** 2 / (3 * f_norm ** 2)) / gamma)
    assert report.entered
    assert report.entry_time <= report.predicted_bound + dt
    after = [norm for t, norm in report.mass_series if t >= report.entry_time]
    assert max(after) <= report.m0


def test_absorbing_ball_without_forcing_is_never_entered(small_grid, make_random_field):
    u0 = make_random_field(small_grid, 3)
    _, diagnostics = evolve(u0, SolverParams(gamma=1.0, forcing=zero_forcing(small_grid), dt=1e-2, t_final=1.0))
    report = absorbing_entry(diagnostics, 1.0, 0.0)
    assert report.m0 == 0.0
    assert not report.entered
    assert report.entry_label() == "never within T"
    assert report.predicted_bound == float("inf")


def test_absorbing_ball_starting_inside(box_grid):
    forcing = unit_gaussian(box_grid, width=2.0)
    u0 = ComplexField.zeros(box_grid)
    _, diagnostics = evolve(u0, SolverParams(gamma=1.0, forcing=forcing, dt=1e-2, t_final=2.0))
    report = absorbing_entry(diagnostics, 1.0, l2_norm(forcing))
    assert report.entry_time == 0.0
    assert report.predicted_bound == 0.0


# ==================== 光滑化 ====================

def test_kato_constant_is_stable_across_random_data(box_grid):
    constants = [kato_constant(random_field(box_grid, 1.0, seed), 1.0, 1e-2) for seed in range(10)]
    assert all(np.isfinite(c) and c > 0 for c in constants)
    assert max(constants) / min(constants) <= 3.0


def test_kato_constant_of_zero_data(box_grid):
    assert kato_constant(ComplexField.zeros(box_grid), 1.0, 1e-2) == 0.0


def test_smoothing_linear_limit_matches_kato_constant(box_grid):
    u0 = unit_gaussian(box_grid, width=1.0)
    rows = smoothing_ratio(u0, 1.0, [0.0, 1e-4], dt=1e-2)
    assert rows[0].norm == 0.0 and rows[0].fitted_c == 0.0
    assert rows[1].fitted_c == pytest.approx(kato_constant(u0, 1.0, 1e-2), rel=1e-5)


def test_smoothing_constant_is_stable_across_scales():
    grid = Grid(n_points=256, length=32.0)
    u0 = unit_gaussian(grid, width=1.0)
    rows = smoothing_ratio(u0, 1.0, [0.5, 1.0, 2.0], dt=1e-3, record_every=10)
    assert all(np.isfinite(row.fitted_c) and row.fitted_c > 0 for row in rows)
    normalized = [row.norm / row.scale for row in rows]
    assert max(normalized) / min(normalized) <= 3.0


# ==================== Ball 能量恒等式 ====================

@pytest.mark.slow
def test_ball_identity_residual_is_second_order_in_sampling(box_grid):
    gamma = 1.0
    forcing = scaled(unit_gaussian(box_grid, width=2.0), 0.5)
    u0 = unit_gaussian(box_grid, width=1.0)
    params = SolverParams(gamma=gamma, forcing=forcing, dt=1e-3, t_final=10.0, record_every=5)
    fine, _ = integrate(u0, params)
    coarse = SpaceTimeField(grid=box_grid, dt_sample=2 * fine.dt_sample, frames=fine.frames[::2])

    coarse_report = ball_energy_identity(coarse, gamma, forcing, 10.0, 2.0)
    fine_report = ball_energy_identity(fine, gamma, forcing, 10.0, 2.0)
    assert coarse_report.residual <= 1e-4
    assert 3.3 <= coarse_report.residual / fine_report.residual <= 4.7


def test_ball_identity_with_zero_window(box_grid, make_random_field):
    forcing = unit_gaussian(box_grid, width=2.0)
    params = SolverParams(gamma=1.0, forcing=forcing, dt=1e-2, t_final=1.0, record_every=10)
    traj, _ = integrate(make_random_field(box_grid, 2), params)
    report = ball_energy_identity(traj, 1.0, forcing, 1.0, 0.0)
    assert report.residual == 0.0
    assert report.lhs == report.rhs


def test_ball_identity_outside_window(box_grid, make_random_field):
    forcing = unit_gaussian(box_grid, width=2.0)
    params = SolverParams(gamma=1.0, forcing=forcing, dt=1e-2, t_final=1.0, record_every=10)
    traj, _ = integrate(make_random_field(box_grid, 2), params)
    with pytest.raises(ValueError):
        ball_energy_identity(traj, 1.0, forcing, 1.0, 2.0)
    with pytest.raises(ValueError):
        ball_energy_identity(traj, 1.0, forcing, 0.55, 0.1)


# ==================== 弱连续性 ====================

@pytest.mark.slow
def test_weak_but_not_strong_convergence():
    grid = Grid(n_points=256, length=32.0)
    u0 = gaussian_field(grid, 0.5, 8.0, 1.0)
    g = unit_gaussian(grid, width=1.0)
    phi = gaussian_field(grid, 1.0, 0.0, 1.0)
    params = SolverParams(gamma=0.0, forcing=zero_forcing(grid), dt=2e-3, t_final=2.0, record_every=5)

    report = weak_continuity_probe(u0, g, phi, params, [4, 8, 16, 32])
    gaps = report.pairing_gap
    assert all(later < earlier for earlier, later in zip(gaps, gaps[1:]))
    assert gaps[-1] <= 0.05 * gaps[0]
    assert all(gap >= 0.5 for gap in report.strong_gap)
    assert all(np.isfinite(value) for value in report.equicontinuity)


def test_weak_continuity_rejects_unresolved_modes(small_grid):
    g = unit_gaussian(small_grid, width=0.5)
    params = SolverParams(gamma=0.0, forcing=zero_forcing(small_grid), dt=1e-2, t_final=0.1)
    with pytest.raises(ValueError, match="unresolved modulation"):
        weak_continuity_probe(ComplexField.zeros(small_grid), g, g, params, [4, 16])


def test_pairing_modulus_of_static_trajectory(small_grid, make_random_field):
    u = make_random_field(small_grid, 1)
    traj = SpaceTimeField(grid=small_grid, dt_sample=0.1, frames=[u, u, u])
    assert pairing_modulus(traj, u) == 0.0


# ==================== ω-极限 ====================

def test_unforced_omega_limit_collapses(small_grid, make_random_field):
    params = SolverParams(gamma=1.0, forcing=zero_forcing(small_grid), dt=1e-2, t_final=1.0)
    sample = omega_limit_sample(make_random_field(small_grid, 4), params, 40.0, 5, 1.0)
    assert sample.diameter <= 1e-6
    assert sample.pairwise_dist.shape == (5, 5)
    assert sample.confined
    assert cross_distance(sample, sample) == 0.0


@pytest.mark.slow
def test_forced_omega_limit_is_confined(absorbing_setup):
    grid, gamma, forcing, u0 = absorbing_setup
    params = SolverParams(gamma=gamma, forcing=forcing, dt=5e-3, t_final=1.0)
    sample = omega_limit_sample(u0, params, 10.0, 20, 1.0)
    assert len(sample.snapshots.frames) == 20
    assert sample.confined
    masses = [l2_norm(frame) ** 2 for frame in sample.snapshots.frames]
    assert max(masses) <= sample.m0 ** 2
    np.testing.assert_allclose(sample.pairwise_dist, sample.pairwise_dist.T)
    assert np.all(np.diag(sample.pairwise_dist) == 0.0)


def test_sampling_before_absorption_is_refused(absorbing_setup):
    grid, gamma, forcing, u0 = absorbing_setup
    params = SolverParams(gamma=gamma, forcing=forcing, dt=1e-2, t_final=1.0)
    with pytest.raises(ValueError, match="sampling before absorption"):
        omega_limit_sample(u0, params, 0.5, 10, 1.0)
