import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from quori import base
from quori.config import default_config
from quori.errors import LimitViolation, SingularGeometryError
from dataclasses import replace

CFG = default_config()

angles = st.floats(-math.pi, math.pi)


def test_pure_drive_rates_move_straight():
    rates = base.ActuatorRates(omega_l=5.0, omega_r=5.0, omega_t=0.0)
    twist = base.forward_kinematics(rates, base.BaseState(), CFG)
    assert twist.ux == pytest.approx(0.25)
    assert twist.uy == 0.0
    assert twist.psi_dot == 0.0


def test_turret_only_spins_torso_in_place():
    rates = base.ActuatorRates(0.0, 0.0, 1.0)
    twist = base.forward_kinematics(rates, base.BaseState(theta_t=0.7), CFG)
    assert (twist.ux, twist.uy, twist.psi_dot) == (0.0, 0.0, 1.0)


def test_lateral_motion_uses_turret_offset():
    # pure sideways torso motion: base spins about the wheel axis, turret counter-rotates
    rates = base.inverse_kinematics(base.BodyTwist(0.0, 0.1, 0.0), base.BaseState(), CFG)
    w = 0.1 / CFG.turret_offset_a
    assert rates.omega_t == pytest.approx(-w)
    assert rates.omega_r == pytest.approx(CFG.half_track * w / CFG.wheel_radius)
    assert rates.omega_l == pytest.approx(-rates.omega_r)


@given(
    ux=st.floats(-0.3, 0.3), uy=st.floats(-0.03, 0.03), psi=st.floats(-2.0, 2.0), theta=angles
)
def test_ik_then_fk_is_identity(ux, uy, psi, theta):
    state = base.BaseState(theta_t=theta)
    twist = base.BodyTwist(ux, uy, psi)
    rates = base.inverse_kinematics(twist, state, CFG, check=False)
    back = base.forward_kinematics(rates, state, CFG)
    assert back.ux == pytest.approx(ux, abs=1e-12)
    assert back.uy == pytest.approx(uy, abs=1e-12)
    assert back.psi_dot == pytest.approx(psi, abs=1e-12)


def test_zero_offset_is_singular():
    cfg = replace(CFG, turret_offset_a=0.0)
    with pytest.raises(SingularGeometryError) as err:
        base.inverse_kinematics(base.BodyTwist(0.1, 0.0, 0.0), base.BaseState(), cfg)
    assert err.value.key == "turret_offset_a"


def test_limit_report_lists_every_violation():
    with pytest.raises(LimitViolation) as err:
        base.inverse_kinematics(base.BodyTwist(0.0, 0.0, 4.0), base.BaseState(), CFG)
    names = [v.name for v in err.value.violations]
    assert "omega_t" in names


def test_check_limits_tolerates_round_off_at_bound():
    # 0.05 * 12 rounds to 0.6000000000000001
    rates = base.ActuatorRates(12.0, 12.0, 0.0)
    assert base.check_limits(rates, CFG) == []


def test_odometry_straight_line_exact():
    state = base.BaseState()
    rates = base.ActuatorRates(4.0, 4.0, 0.0)
    for _ in range(100):
        state = base.integrate_odometry(state, rates, 0.01, CFG)
    assert state.x == pytest.approx(0.2, abs=1e-12)
    assert state.y == 0.0


def test_odometry_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        base.integrate_odometry(base.BaseState(), base.ActuatorRates(0, 0, 0), 0.0, CFG)


@given(angle=st.floats(-100.0, 100.0))
def test_wrap_angle_range(angle):
    wrapped = base.wrap_angle(angle)
    assert -math.pi <= wrapped < math.pi
    assert math.sin(wrapped) == pytest.approx(math.sin(angle), abs=1e-9)
    assert math.cos(wrapped) == pytest.approx(math.cos(angle), abs=1e-9)


def test_turret_reported_normalised():
    state = base.BaseState(theta_t=7.0).normalized()
    assert -math.pi <= state.theta_t < math.pi
