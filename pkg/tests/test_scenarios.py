"""Scenario catalog and envelope data validation."""

import math

import pytest

from wipsim import (
    ArmModel,
    DeskParams,
    Disturbance,
    Envelope,
    PlantParams,
    ScenarioSpec,
    TimedArmPose,
    TimedCommand,
    builtin_scenarios,
    com_offset,
    scenario_by_name,
)
from wipsim.scenarios import ENVELOPE_KINDS, REACH_POSE, RAISED_POSE


def test_catalog_names_and_order():
    names = [s.name for s in builtin_scenarios()]
    assert names == ["translate_rotate", "arm_raise", "desk_push",
                     "kick", "arm_hit", "wall_collision"]


def test_scenario_by_name_round_trip():
    for spec in builtin_scenarios():
        assert scenario_by_name(spec.name) == spec
    with pytest.raises(KeyError):
        scenario_by_name("launch")


def test_every_builtin_has_envelopes():
    for spec in builtin_scenarios():
        assert spec.duration > 0
        assert len(spec.envelopes) >= 2
        assert spec.description


def test_timed_command_validation():
    with pytest.raises(ValueError):
        TimedCommand(t=-1.0, phi_ref=0.5)
    with pytest.raises(ValueError):
        TimedCommand(t=1.0)  # sets nothing
    c = TimedCommand(t=1.0, psi_ref=0.2)
    assert c.phi_ref is None


def test_timed_arm_pose_validation():
    with pytest.raises(ValueError):
        TimedArmPose(t=-0.5, xi=(0.1,))
    with pytest.raises(ValueError):
        TimedArmPose(t=0.5, xi=())


def test_desk_params_validation():
    with pytest.raises(ValueError):
        DeskParams(mass=0.0)
    with pytest.raises(ValueError):
        DeskParams(friction_mu=-0.1)
    with pytest.raises(ValueError):
        DeskParams(contact_stiffness=0.0)


def test_envelope_kind_and_params_checked():
    with pytest.raises(ValueError):
        Envelope(name="x", kind="settles", signal="theta")
    for kind in ENVELOPE_KINDS:
        with pytest.raises(ValueError):
            Envelope(name="x", kind=kind, signal="theta")  # params missing
    with pytest.raises(ValueError):
        # final_band needs tol or frac on top of target
        Envelope(name="x", kind="final_band", signal="theta", target=0.0)
    with pytest.raises(ValueError):
        Envelope(name="x", kind="max_abs", signal="theta", bound=1.0,
                 t0=5.0, t1=5.0)


def test_scenario_event_ordering_enforced():
    with pytest.raises(ValueError):
        ScenarioSpec(name="s", duration=10.0, commands=(
            TimedCommand(t=5.0, phi_ref=1.0),
            TimedCommand(t=2.0, phi_ref=2.0),
        ))
    with pytest.raises(ValueError):
        ScenarioSpec(name="s", duration=10.0, commands=(
            TimedCommand(t=12.0, phi_ref=1.0),
        ))
    with pytest.raises(ValueError):
        ScenarioSpec(name="s", duration=10.0, disturbances=(
            Disturbance(kind="impulse-force", magnitude=1.0, window=(8.0, 11.0)),
        ))
    with pytest.raises(ValueError):
        ScenarioSpec(name="s", duration=10.0, envelopes=(
            Envelope(name="late", kind="max_abs", signal="theta",
                     bound=1.0, t0=11.0),
        ))


def test_duration_positive():
    with pytest.raises(ValueError):
        ScenarioSpec(name="s", duration=0.0)


def test_lean_target_follows_the_model():
    # arm_raise embeds the static lean for the given models; a heavier arm
    # must deepen it
    spec = scenario_by_name("arm_raise")
    env = {e.name: e for e in spec.envelopes}["lean_matches_statics"]
    p = PlantParams()
    a = ArmModel().with_pose(RAISED_POSE, RAISED_POSE)
    dl_x, dl_z, _ = com_offset(p, a)
    want = -math.atan2(dl_x, p.l + dl_z)
    assert env.target == pytest.approx(want, rel=1e-12)

    heavy = ArmModel(link_masses=(3.0, 2.0))
    spec2 = scenario_by_name("arm_raise", arm=heavy)
    env2 = {e.name: e for e in spec2.envelopes}["lean_matches_statics"]
    assert env2.target < env.target < 0.0


def test_wall_sits_just_past_the_hands():
    spec = scenario_by_name("wall_collision")
    wall = next(d for d in spec.disturbances if d.kind == "wall-contact")
    hx, _ = ArmModel().hand_position(REACH_POSE)
    assert wall.wall_position == pytest.approx(hx + 0.03, abs=1e-12)


def test_builtin_scenarios_are_deterministic_values():
    a = builtin_scenarios()
    b = builtin_scenarios()
    assert a == b
