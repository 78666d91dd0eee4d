import numpy as np
import pytest

from src.flow.flow_integrator import (
    IntegrationStalled, IntegratorConfig, TimeSMap, flowbox_check, integrate, time_s_map, trajectory,
)
from src.flow.slowed_field import SlowedLinearField
from src.systems.exact_vector import ExactVector, SymbolBasis
from src.torus.torus_geometry import torus_distance

CENTER = [0.5, 0.5]


@pytest.fixture
def gamma():
    basis = SymbolBasis.declare({"theta": "sqrt(2)"})
    return ExactVector.parse(["1", "@theta"], basis)


@pytest.fixture
def field(gamma):
    return SlowedLinearField(gamma, [CENTER], 0.1)


def test_field_vanishes_only_at_center(field, gamma):
    assert field.eval_field(np.array(CENTER)).norm() == 0.0
    far = field.eval_field(np.array([0.0, 0.0])).as_array()
    assert np.array_equal(far, gamma.numeric())


def test_exp_bump_at_half_radius(field, gamma):
    v = field.eval_field(np.array([0.55, 0.5])).as_array()
    assert v == pytest.approx(np.exp(-1.0 / 3.0) * gamma.numeric())


def test_smoothstep_profile(gamma):
    smooth = SlowedLinearField(gamma, [CENTER], 0.1, profile="smoothstep")
    assert smooth.phi(0.05) == pytest.approx(0.5)
    assert smooth.phi(0.0) == 0.0
    assert smooth.phi(0.2) == 1.0


def test_field_validation(gamma):
    with pytest.raises(ValueError):
        SlowedLinearField(gamma, [CENTER], 0.3)
    with pytest.raises(ValueError):
        SlowedLinearField(gamma, [CENTER], 0.1, profile="gauss")
    with pytest.raises(ValueError):
        SlowedLinearField(gamma, [[0.5, 0.5, 0.5]], 0.1)
    with pytest.raises(ValueError):
        SlowedLinearField(ExactVector.parse(["1"]), [], 0.1)


def test_integrate_without_centers_is_translation(gamma):
    free = SlowedLinearField(gamma, [], 0.1)
    x0 = np.array([0.2, 0.7])
    x1 = integrate(free, x0, 1.0)
    assert torus_distance(x1, x0 + gamma.numeric()) < 1e-12


def test_center_is_fixed(field):
    assert integrate(field, np.array(CENTER), 3.0) == pytest.approx(CENTER)


def test_integrate_forward_then_backward(field):
    x0 = np.array([0.46, 0.43])
    x1 = integrate(field, x0, 0.3)
    assert torus_distance(integrate(field, x1, -0.3), x0) < 1e-7


def test_integration_stall_carries_state(field):
    cfg = IntegratorConfig(max_wall_steps=1)
    with pytest.raises(IntegrationStalled) as info:
        integrate(field, np.array([0.55, 0.5]), 0.3, cfg)
    assert info.value.elapsed > 0.0
    assert info.value.state.shape == (2,)


def test_integrator_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(rtol=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(min_step=1.0, max_step=0.1)


def test_trajectory_rows(field):
    rows = trajectory(field, np.array([0.42, 0.45]), 0.2)
    assert rows.shape[1] == 3
    assert rows[0, 0] == 0.0
    assert rows[-1, 0] == pytest.approx(0.2)
    assert np.all(np.diff(rows[:, 0]) > 0)


def test_flowbox_small_s_found(field):
    result = flowbox_check(field, 0.05)
    assert result.ok
    assert result.crossing_time > 0.05


def test_flowbox_large_s_fails(field):
    assert not flowbox_check(field, 0.9).ok


def test_time_s_map_orbit_matches_steps(field):
    f = time_s_map(field, "1/20")
    assert isinstance(f, TimeSMap)
    x = np.array([0.31, 0.27])
    states = np.vstack(list(f.orbit(x, 60, chunk_size=16)))
    assert len(states) == 61
    y = x
    for k in range(1, 61):
        y = f.apply(y)
        assert torus_distance(states[k], y) < 1e-8


def test_time_s_map_inverse_near_center(field):
    f = time_s_map(field, "1/20")
    x = np.array([0.47, 0.52])
    assert torus_distance(f.apply_inverse(f.apply(x)), x) < 1e-8
    assert f.known_fixed_points()[0] == pytest.approx(CENTER)
    assert f.flow_speed(np.array(CENTER)) == 0.0


def test_time_s_map_rejects_nonpositive_s(field):
    with pytest.raises(ValueError):
        time_s_map(field, 0)
