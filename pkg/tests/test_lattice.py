import numpy as np
import pytest
from scipy import integrate

from cylinder_afc.solver.jets import JetConfig, JetState
from cylinder_afc.solver.lattice import (
    C,
    CYLINDER_LINK,
    FlowConfig,
    SolverDivergenceError,
    fluid_mass,
    init_field,
    inlet_profile,
    jet_mass_flux,
    step,
    wall_fractions,
)
from cylinder_afc.utils.config import ConfigurationError


def test_derived_lattice_parameters() -> None:
    config = FlowConfig()
    assert (config.nx, config.ny) == (440, 82)
    assert config.u_mean_lb == pytest.approx(0.1 * 2.0 / 3.0)
    assert config.tau == pytest.approx(3.0 * config.u_mean_lb * 20 / 100 + 0.5)
    assert config.time_scale == pytest.approx(300.0)


@pytest.mark.parametrize(
    "overrides",
    [{"reynolds": 0.0}, {"u_max_lb": 0.2}, {"diameter_lu": 3}, {"center_d": (0.2, 2.0)}],
)
def test_invalid_flow_config(overrides) -> None:
    with pytest.raises(ConfigurationError):
        FlowConfig(**overrides)


def test_rest_field_has_no_momentum() -> None:
    field = init_field(FlowConfig())
    fluid = ~field.obstacle_mask
    momentum = np.tensordot(C.T, field.f, axes=(1, 0))
    assert np.abs(momentum[:, fluid]).max() < 1e-15


def test_obstacle_area_matches_circle() -> None:
    config = FlowConfig(diameter_lu=20)
    field = init_field(config)
    assert field.obstacle_mask.sum() == pytest.approx(np.pi * config.radius_lu ** 2, rel=0.05)


def test_cylinder_links_join_fluid_to_solid() -> None:
    field = init_field(FlowConfig(diameter_lu=20))
    links = field.boundary_links
    cyl = links.kind == CYLINDER_LINK
    assert cyl.sum() > 0
    ys, xs, d = links.y[cyl], links.x[cyl], links.direction[cyl]
    assert not field.obstacle_mask[ys, xs].any()
    assert field.obstacle_mask[ys + C[d, 1], xs + C[d, 0]].all()


def test_inlet_profile_shape() -> None:
    config = FlowConfig()
    height = config.ny
    assert inlet_profile(height / 2.0, config)[0] == pytest.approx(config.u_max_lb)
    assert inlet_profile(0.0, config)[0] == 0.0
    mean, _ = integrate.quad(lambda y: float(inlet_profile(y, config)[0]), 0.0, height)
    assert mean / height == pytest.approx(config.u_mean_lb)


def test_inlet_profile_rejects_points_outside_channel() -> None:
    with pytest.raises(ValueError):
        inlet_profile(-1.0, FlowConfig())


def test_rest_state_is_a_fixed_point() -> None:
    config = FlowConfig(reynolds=20.0, diameter_lu=8, length_d=8.0, inflow=False)
    field = init_field(config)
    initial = field.f.copy()
    for _ in range(20):
        step(field, JetState(), config)
    assert np.abs(field.f - initial).max() < 1e-12
    assert field.step_index == 20


def test_channel_relaxes_to_poiseuille() -> None:
    config = FlowConfig(reynolds=10.0, diameter_lu=10, length_d=4.0, with_cylinder=False)
    field = init_field(config, at_rest=False)
    for _ in range(4000):
        step(field, None, config)

    y = np.arange(config.ny) + 0.5
    exact = inlet_profile(y, config)[0]
    column = field.u[0, :, config.nx // 2]
    assert np.linalg.norm(column - exact) / np.linalg.norm(exact) < 0.01


def test_symmetric_placement_gives_no_lift_asymmetry() -> None:
    from cylinder_afc.solver.forces import compute_forces

    config = FlowConfig(reynolds=20.0, diameter_lu=20, length_d=6.0, center_d=(2.0, 2.05))
    field = init_field(config, at_rest=False)
    for _ in range(200):
        step(field, None, config)
    np.testing.assert_allclose(field.u[0], field.u[0][::-1], atol=1e-10)
    sample = compute_forces(field, config)
    assert abs(sample.cl) < 1e-6
    assert sample.cd > 0


def test_jets_conserve_mass() -> None:
    config = FlowConfig(reynolds=20.0, diameter_lu=10)
    field = init_field(config, JetConfig())
    assert abs(jet_mass_flux(field, 0.05)) < 1e-12


def test_non_physical_state_raises_divergence() -> None:
    config = FlowConfig(reynolds=20.0, diameter_lu=8, length_d=8.0)
    field = init_field(config)
    field.f[:, 10, 40] = np.nan
    with pytest.raises(SolverDivergenceError) as excinfo:
        step(field, None, config)
    assert excinfo.value.step_index == 1


def test_wall_fractions_locate_the_circle() -> None:
    config = FlowConfig(diameter_lu=20)
    field = init_field(config)
    links = field.boundary_links
    cyl = links.cylinder
    q = links.q[cyl]
    assert np.all((q > 0.0) & (q <= 1.0))

    d = links.direction[cyl]
    cx, cy = config.center_lu
    px = links.x[cyl] + 0.5 + q * C[d, 0] - cx
    py = links.y[cyl] + 0.5 + q * C[d, 1] - cy
    exact = q == wall_fractions(links.y[cyl], links.x[cyl], d, config)
    np.testing.assert_allclose(np.hypot(px, py)[exact], config.radius_lu, rtol=1e-9)


def test_half_way_links_without_interpolation() -> None:
    field = init_field(FlowConfig(diameter_lu=20, interpolated_bounce_back=False))
    links = field.boundary_links
    assert np.all(links.q == 0.5)
    np.testing.assert_array_equal(links.far_y, links.y)
    np.testing.assert_array_equal(links.far_x, links.x)


@pytest.mark.parametrize("interpolated", [True, False])
def test_jets_have_no_net_flux_while_stepping(interpolated: bool) -> None:
    config = FlowConfig(reynolds=100.0, diameter_lu=20, length_d=8.0, interpolated_bounce_back=interpolated)
    field = init_field(config, JetConfig(), at_rest=False)
    jets = JetState(v_current=0.8)
    for _ in range(50):
        step(field, jets, config)
        assert abs(jet_mass_flux(field, field.jet_speed_lb)) < 1e-12
    assert field.jet_speed_lb == pytest.approx(0.8 * config.u_mean_lb)


def test_closed_channel_conserves_mass_with_jets_active() -> None:
    config = FlowConfig(
        reynolds=20.0, diameter_lu=20, length_d=6.0, periodic=True, interpolated_bounce_back=False
    )
    field = init_field(config, JetConfig(), at_rest=False)
    jets = JetState(v_current=1.0)
    initial = fluid_mass(field)
    for _ in range(1000):
        step(field, jets, config)
    assert abs(fluid_mass(field) - initial) / initial < 1e-6


@pytest.mark.slow
def test_open_channel_mass_drift_is_bounded(re100_baseline) -> None:
    config = FlowConfig.from_preset("re100")
    field = re100_baseline.field.copy()
    initial = fluid_mass(field)
    for _ in range(1000):
        step(field, None, config)
    assert abs(fluid_mass(field) - initial) / initial < 1e-3
