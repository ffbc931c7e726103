import numpy as np
import pytest
from scipy import integrate

from cylinder_afc.solver.jets import (
    JetConfig,
    JetState,
    azimuth_to_math,
    jet_velocity_profile,
    math_to_azimuth,
    normalized_flow_rate,
    signed_flow_rates,
    smooth_action,
)
from cylinder_afc.utils.config import ConfigurationError


def test_smoothing_fixed_point() -> None:
    config = JetConfig()
    state = JetState.create(config)
    state.v_current = 0.5
    smooth_action(state, 0.5, config)
    assert state.v_current == pytest.approx(0.5)


def test_smoothing_first_step() -> None:
    config = JetConfig()
    state = JetState.create(config)
    smooth_action(state, 1.0, config)
    assert state.v_current == pytest.approx(0.1)


def test_smoothing_converges_geometrically() -> None:
    config = JetConfig()
    state = JetState.create(config)
    for n in range(1, 40):
        smooth_action(state, 1.0, config)
        assert state.v_current == pytest.approx(1.0 - 0.9 ** n)


def test_out_of_range_action_is_clamped_and_counted() -> None:
    config = JetConfig()
    state = JetState.create(config)
    smooth_action(state, 2.0, config)
    smooth_action(state, 2.0, config, record=False)
    assert state.clamp_count == 1
    assert list(state.action_history) == [1.5]
    assert state.v_current <= config.max_amplitude


def test_non_finite_action_rejected() -> None:
    config = JetConfig()
    with pytest.raises(ValueError):
        smooth_action(JetState.create(config), float("nan"), config)


def test_overlapping_arcs_rejected() -> None:
    with pytest.raises(ConfigurationError):
        JetConfig(centers=(90.0, 95.0))


def test_azimuth_conversion() -> None:
    # Windward point faces -x; the top of the cylinder is +y
    assert math_to_azimuth(180.0) == pytest.approx(0.0)
    assert math_to_azimuth(90.0) == pytest.approx(90.0)
    assert azimuth_to_math(math_to_azimuth(37.0)) == pytest.approx(37.0)


def test_profile_vanishes_at_arc_edges() -> None:
    config = JetConfig()
    for s in (-5.0, 5.0):
        np.testing.assert_allclose(jet_velocity_profile(0, s, 1.0, config), 0.0, atol=1e-15)


def test_profile_peak_is_radial() -> None:
    config = JetConfig()
    top = jet_velocity_profile(0, 0.0, 1.0, config)
    bottom = jet_velocity_profile(1, 0.0, 1.0, config)
    np.testing.assert_allclose(top, [0.0, 1.0], atol=1e-12)
    # Bottom jet sucks while the top one blows
    np.testing.assert_allclose(bottom, [0.0, 1.0], atol=1e-12)
    assert np.linalg.norm(top) == pytest.approx(1.0)


def test_profile_rejects_positions_outside_arc() -> None:
    with pytest.raises(ValueError):
        jet_velocity_profile(0, 6.0, 1.0, JetConfig())
    with pytest.raises(ValueError):
        jet_velocity_profile(2, 0.0, 1.0, JetConfig())


def test_profile_integral_is_two_thirds_of_peak_times_width() -> None:
    config = JetConfig()
    total, _ = integrate.quad(lambda s: np.linalg.norm(jet_velocity_profile(0, s, 1.2, config)), -5.0, 5.0)
    assert total == pytest.approx((2.0 / 3.0) * 1.2 * config.width, rel=1e-8)


def test_flow_rate_values() -> None:
    config = JetConfig()
    state = JetState.create(config)
    assert normalized_flow_rate(state, config) == 0.0

    state.v_current = 1.5
    q_star = normalized_flow_rate(state, config)
    assert q_star == pytest.approx(0.0873, abs=5e-4)
    assert q_star <= config.q_star_cap
    assert sum(signed_flow_rates(state, config)) == 0.0


def test_flow_rate_cap_clamps_velocity() -> None:
    config = JetConfig(q_star_cap=0.05)
    state = JetState.create(config)
    state.v_current = 1.5
    assert normalized_flow_rate(state, config) == pytest.approx(0.05)
    assert state.v_current == pytest.approx(config.flux_speed_cap)
