"""Wheel torque split, heading correction, and pitch-reference adaptation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wipsim import (
    AdaptationConfig,
    CommandSetpoint,
    DEFAULT_WHEEL_TORQUE_LIMIT,
    PendulumState,
    YawGain,
    adapt_theta_ref,
    control_torque,
    run_controller_tick,
    wheel_torques,
)


def test_heading_error_splits_differentially(gain):
    # psi behind target by 1 rad at K_psi=2: each wheel moves 2 N m apart
    yaw = YawGain(K_psi=2.0)
    s = PendulumState(psi=-1.0)
    u_l, u_r = wheel_torques(gain, yaw, s, CommandSetpoint(psi_ref=-0.5))
    assert u_r - u_l == pytest.approx(2.0 * 2.0 * 0.5, abs=1e-12)
    assert u_l + u_r == pytest.approx(0.0, abs=1e-12)


def test_torque_sum_unchanged_by_heading(gain):
    s = PendulumState(theta=0.02, phi=0.5, theta_dot=0.1, phi_dot=-0.2, psi=0.3)
    cmd = CommandSetpoint(phi_ref=0.1, psi_ref=-0.4)
    u = control_torque(gain, s, 0.0, cmd.phi_ref)
    for k_psi in (0.0, 1.0, 5.0, 12.0):
        u_l, u_r = wheel_torques(gain, YawGain(k_psi), s, cmd,
                                 u_max=math.inf)
        assert u_l + u_r == pytest.approx(u, rel=1e-12)


def test_wheels_saturate_independently(gain):
    # huge heading error: one wheel pins at +limit, the other at -limit
    s = PendulumState(psi=-100.0)
    u_l, u_r = wheel_torques(gain, YawGain(5.0), s, CommandSetpoint())
    assert u_l == -DEFAULT_WHEEL_TORQUE_LIMIT
    assert u_r == DEFAULT_WHEEL_TORQUE_LIMIT
    u_l, u_r = wheel_torques(gain, YawGain(5.0), s, CommandSetpoint(), u_max=7.5)
    assert (u_l, u_r) == (-7.5, 7.5)


def test_dead_zone_returns_bit_identical_reference(gain):
    cfg = AdaptationConfig()
    theta_ref = 0.123456789
    s = PendulumState(phi=cfg.dead_zone)  # boundary is inside the zone
    out = adapt_theta_ref(cfg, theta_ref, s, CommandSetpoint(), dt=0.002)
    assert out == theta_ref
    s = PendulumState(phi=-0.04)
    assert adapt_theta_ref(cfg, theta_ref, s, CommandSetpoint(), 0.002) == theta_ref


def test_adaptation_leans_against_creep():
    cfg = AdaptationConfig(K_adapt=0.02, dead_zone=0.05, rate_limit=0.05)
    cmd = CommandSetpoint()
    # creeping forward (phi above target): reference must move backward
    out = adapt_theta_ref(cfg, 0.0, PendulumState(phi=0.2), cmd, dt=0.002)
    assert out == pytest.approx(-0.02 * 0.2 * 0.002, rel=1e-12)
    out = adapt_theta_ref(cfg, 0.0, PendulumState(phi=-0.2), cmd, dt=0.002)
    assert out == pytest.approx(0.02 * 0.2 * 0.002, rel=1e-12)


def test_adaptation_rate_limit_is_exact():
    # error so large that the raw step would far exceed the cap
    cfg = AdaptationConfig(K_adapt=0.02, dead_zone=0.05, rate_limit=0.05)
    dt = 0.002
    out = adapt_theta_ref(cfg, 0.0, PendulumState(phi=-20.0), CommandSetpoint(), dt)
    assert out == cfg.rate_limit * dt
    out = adapt_theta_ref(cfg, 0.0, PendulumState(phi=20.0), CommandSetpoint(), dt)
    assert out == -cfg.rate_limit * dt


def test_adaptation_respects_reference_bound():
    cfg = AdaptationConfig(K_adapt=0.02, rate_limit=10.0, theta_ref_bound=0.3)
    out = adapt_theta_ref(cfg, 0.299, PendulumState(phi=-40.0), CommandSetpoint(), 1.0)
    assert out == cfg.theta_ref_bound
    out = adapt_theta_ref(cfg, -0.299, PendulumState(phi=40.0), CommandSetpoint(), 1.0)
    assert out == -cfg.theta_ref_bound


@settings(max_examples=60, deadline=None)
@given(
    phi=st.floats(-3.0, 3.0),
    phi_ref=st.floats(-3.0, 3.0),
    theta_ref=st.floats(-0.2, 0.2),
    dt=st.floats(1e-4, 0.01),
)
def test_adaptation_step_never_exceeds_caps(phi, phi_ref, theta_ref, dt):
    cfg = AdaptationConfig()
    out = adapt_theta_ref(cfg, theta_ref, PendulumState(phi=phi),
                          CommandSetpoint(phi_ref=phi_ref), dt)
    assert abs(out - theta_ref) <= cfg.rate_limit * dt + 1e-15
    assert abs(out) <= cfg.theta_ref_bound + 1e-15
    e = phi - phi_ref
    if abs(e) > cfg.dead_zone and abs(theta_ref) < cfg.theta_ref_bound:
        # outside the zone the reference moves opposite to the wheel error
        assert (out - theta_ref) * e <= 0.0


def test_adaptation_rejects_bad_dt():
    with pytest.raises(ValueError):
        adapt_theta_ref(AdaptationConfig(), 0.0, PendulumState(), CommandSetpoint(), 0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        YawGain(K_psi=-1.0)
    with pytest.raises(ValueError):
        YawGain(K_psi=math.nan)
    with pytest.raises(ValueError):
        AdaptationConfig(K_adapt=-0.01)
    with pytest.raises(ValueError):
        AdaptationConfig(theta_ref_bound=math.pi / 4)
    with pytest.raises(ValueError):
        CommandSetpoint(phi_ref=math.inf)


def test_tick_is_quiet_at_equilibrium(gain):
    u_l, u_r, theta_ref = run_controller_tick(
        gain, YawGain(), AdaptationConfig(), PendulumState(),
        CommandSetpoint(), theta_ref=0.0, dt=0.002)
    assert (u_l, u_r, theta_ref) == (0.0, 0.0, 0.0)


def test_tick_composes_adaptation_then_torques(gain):
    yaw = YawGain()
    adapt = AdaptationConfig()
    s = PendulumState(theta=0.01, phi=0.8, psi=0.1)
    cmd = CommandSetpoint(phi_ref=0.2, psi_ref=0.3)
    ref0 = 0.05
    u_l, u_r, ref1 = run_controller_tick(gain, yaw, adapt, s, cmd, ref0, 0.002)
    want_ref = adapt_theta_ref(adapt, ref0, s, cmd, 0.002)
    assert ref1 == want_ref
    assert (u_l, u_r) == wheel_torques(gain, yaw, s, cmd, want_ref)


def test_tick_is_pure(gain):
    s = PendulumState(theta=0.02, phi=1.0, psi=-0.2, phi_dot=0.5)
    cmd = CommandSetpoint(phi_ref=0.5, psi_ref=0.1)
    a = run_controller_tick(gain, YawGain(), AdaptationConfig(), s, cmd, 0.01, 0.002)
    b = run_controller_tick(gain, YawGain(), AdaptationConfig(), s, cmd, 0.01, 0.002)
    assert a == b
