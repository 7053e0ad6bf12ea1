"""Scenario catalog for the balancing experiments.

A ScenarioSpec is a pure data script: timed wheel commands, timed arm poses,
timed disturbances, and the envelope assertions that decide pass/fail. The
runner executes it against a SimConfig; nothing in this module touches the
dynamics.

Envelope kinds and the parameters they read:

  max_abs        max |signal| <= bound over the window
  tracks_steps   signal stays within tol of ref_signal for the final dwell
                 seconds of every constant segment of ref_signal
  settle_within  after t0 the signal re-enters a band of frac * peak
                 deviation around the final ref_signal value; the settle
                 time (relative to t0) must land in [settle_min, settle_max]
  final_band     |mean(signal over window) - target| <= tol
                 (tol = frac * |target| when frac is given instead)
  final_min      mean(signal over window) >= bound
  peak_ratio     max(signal over window) >= bound * baseline mean
  return_band    |mean(signal over window) - baseline mean|
                 <= frac * baseline mean

Windows are (t0, t1) with t1 = None meaning end of run; baseline windows
are (base0, base1). Signals are trace column names plus the derived
theta_err, phi_err, psi_err and tension_max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from .plant import ArmModel, Disturbance, PlantParams, com_offset

ENVELOPE_KINDS = (
    "max_abs",
    "tracks_steps",
    "settle_within",
    "final_band",
    "final_min",
    "peak_ratio",
    "return_band",
)

# Parameters each kind must carry; validated at construction so a bad
# scenario fails before the simulation starts.
_REQUIRED_PARAMS = {
    "max_abs": ("bound",),
    "tracks_steps": ("ref_signal", "tol"),
    "settle_within": ("ref_signal", "frac", "settle_min", "settle_max"),
    "final_band": ("target",),
    "final_min": ("bound",),
    "peak_ratio": ("bound", "base0", "base1"),
    "return_band": ("frac", "base0", "base1"),
}


@dataclass(frozen=True)
class TimedCommand:
    """Wheel-level reference change applied at time t.

    Fields left as None keep the previous reference.
    """

    t: float
    phi_ref: Optional[float] = None
    psi_ref: Optional[float] = None

    def __post_init__(self):
        if self.t < 0.0:
            raise ValueError("command time must be >= 0")
        if self.phi_ref is None and self.psi_ref is None:
            raise ValueError("command must set phi_ref or psi_ref")


@dataclass(frozen=True)
class TimedArmPose:
    """Joint reference pose applied to both arms at time t."""

    t: float
    xi: Tuple[float, ...]

    def __post_init__(self):
        if self.t < 0.0:
            raise ValueError("arm pose time must be >= 0")
        if len(self.xi) == 0:
            raise ValueError("arm pose needs at least one joint value")


@dataclass(frozen=True)
class DeskParams:
    """Pushable mass coupled to the body through a one-sided stiff contact.

    The contact point is a bumper fixed to the body at contact_height
    (hand height in the pushing posture). The desk slides on the floor
    with Coulomb friction.
    """

    mass: float = 15.0
    friction_mu: float = 0.05
    start_gap: float = 0.02
    contact_height: float = 0.7
    contact_stiffness: float = 5000.0
    contact_damping: float = 100.0

    def __post_init__(self):
        if self.mass <= 0.0:
            raise ValueError("desk mass must be > 0")
        if self.friction_mu < 0.0:
            raise ValueError("friction_mu must be >= 0")
        if self.contact_stiffness <= 0.0 or self.contact_damping < 0.0:
            raise ValueError("contact parameters must be positive")


@dataclass(frozen=True)
class Envelope:
    """One pass/fail assertion evaluated on the logged trace."""

    name: str
    kind: str
    signal: str
    t0: float = 0.0
    t1: Optional[float] = None
    bound: Optional[float] = None
    target: Optional[float] = None
    tol: Optional[float] = None
    frac: Optional[float] = None
    dwell: float = 0.5
    settle_min: Optional[float] = None
    settle_max: Optional[float] = None
    ref_signal: Optional[str] = None
    base0: Optional[float] = None
    base1: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ENVELOPE_KINDS:
            raise ValueError(f"unknown envelope kind {self.kind!r}")
        for p in _REQUIRED_PARAMS[self.kind]:
            if getattr(self, p) is None:
                raise ValueError(f"envelope {self.name!r} ({self.kind}) needs {p}")
        if self.kind == "final_band" and self.tol is None and self.frac is None:
            raise ValueError(f"envelope {self.name!r} needs tol or frac")
        if self.t1 is not None and self.t1 <= self.t0:
            raise ValueError(f"envelope {self.name!r} window is empty")


@dataclass(frozen=True)
class ScenarioSpec:
    """Complete script for one closed-loop experiment."""

    name: str
    duration: float
    description: str = ""
    commands: Tuple[TimedCommand, ...] = ()
    arm_poses: Tuple[TimedArmPose, ...] = ()
    disturbances: Tuple[Disturbance, ...] = ()
    envelopes: Tuple[Envelope, ...] = ()
    desk: Optional[DeskParams] = None
    # Per-scenario config overrides, dotted config paths to values.
    overrides: Dict[str, float] = field(default_factory=dict)
    # Trace columns to export; empty means all.
    output_channels: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.duration <= 0.0:
            raise ValueError("duration must be > 0")
        for label, events in (("commands", self.commands), ("arm_poses", self.arm_poses)):
            last = -math.inf
            for i, ev in enumerate(events):
                if ev.t < last:
                    raise ValueError(f"{label}[{i}].t out of order")
                if ev.t >= self.duration:
                    raise ValueError(f"{label}[{i}].t beyond duration")
                last = ev.t
        for i, d in enumerate(self.disturbances):
            t0, t1 = d.window
            if d.kind != "wall-contact" and not (0.0 <= t0 < t1 <= self.duration):
                raise ValueError(f"disturbances[{i}].window outside run")
        for env in self.envelopes:
            if (env.t1 or 0.0) > self.duration or env.t0 >= self.duration:
                raise ValueError(f"envelope {env.name!r} window beyond duration")


def _raised_pose_lean(plant: PlantParams, arm: ArmModel, xi: Tuple[float, ...]) -> float:
    """Static-equilibrium pitch for a symmetric arm pose: puts the combined
    CoM over the contact point, theta_eq = -atan2(dl_x, l + dl_z)."""
    posed = arm.with_pose(xi_left=xi, xi_right=xi)
    dl_x, dl_z, _ = com_offset(plant, posed)
    return -math.atan2(dl_x, plant.l + dl_z)


def _hand_x_upright(arm: ArmModel, xi: Tuple[float, ...]) -> float:
    hx, _ = arm.hand_position(xi)
    return hx


RAISED_POSE = (math.pi / 2, 0.0)
REACH_POSE = (1.0, 0.3)


def builtin_scenarios(plant: Optional[PlantParams] = None,
                      arm: Optional[ArmModel] = None) -> Tuple[ScenarioSpec, ...]:
    """The six shipped experiments.

    Derived quantities (equilibrium lean targets, wall placement) are
    computed from the given plant/arm models so the scenarios stay
    consistent when defaults change.
    """
    p = plant if plant is not None else PlantParams()
    a = arm if arm is not None else ArmModel()

    pi_step = 3.14  # commanded wheel steps, one travel unit each

    translate_rotate = ScenarioSpec(
        name="translate_rotate",
        duration=50.0,
        description="Three forward wheel steps, half-turn, three steps back.",
        commands=(
            TimedCommand(t=1.0, phi_ref=1 * pi_step),
            TimedCommand(t=8.0, phi_ref=2 * pi_step),
            TimedCommand(t=15.0, phi_ref=3 * pi_step),
            TimedCommand(t=22.0, psi_ref=3.14),
            TimedCommand(t=29.0, phi_ref=4 * pi_step),
            TimedCommand(t=36.0, phi_ref=5 * pi_step),
            TimedCommand(t=43.0, phi_ref=6 * pi_step),
        ),
        envelopes=(
            Envelope(name="pitch_bounded", kind="max_abs", signal="theta", bound=0.05),
            Envelope(name="phi_settles", kind="tracks_steps", signal="phi",
                     ref_signal="phi_ref", tol=0.05),
            Envelope(name="psi_settles", kind="tracks_steps", signal="psi",
                     ref_signal="psi_ref", tol=0.05),
        ),
        # Arms stay home, so there is no CoM shift to estimate; leaving the
        # estimator active only lets large command transients drag theta_ref.
        overrides={"adaptation.K_adapt": 0.0},
    )

    lean_target = _raised_pose_lean(p, a, RAISED_POSE)
    arm_raise = ScenarioSpec(
        name="arm_raise",
        duration=40.0,
        description="Shoulder pitch steps to horizontal; CoM estimator leans the body.",
        arm_poses=(
            TimedArmPose(t=2.0, xi=(math.pi / 4, 0.0)),
            TimedArmPose(t=6.0, xi=RAISED_POSE),
        ),
        envelopes=(
            # The raised-arm equilibrium lean is about -0.148 rad, so the
            # pitch bound sits above it plus transient overshoot.
            Envelope(name="pitch_bounded", kind="max_abs", signal="theta", bound=0.25),
            Envelope(name="phi_offset_within_dead_zone", kind="final_band",
                     signal="phi_err", target=0.0, tol=0.05, t0=38.0),
            Envelope(name="lean_matches_statics", kind="final_band",
                     signal="theta_ref", target=lean_target, frac=0.10, t0=38.0),
        ),
    )

    desk_cmds = [TimedCommand(t=1.0 + 0.5 * k, phi_ref=0.3 * (k + 1)) for k in range(40)]
    desk_push = ScenarioSpec(
        name="desk_push",
        duration=24.0,
        description="Slow forward wheel ramp against a sliding 15 kg desk.",
        commands=tuple(desk_cmds),
        desk=DeskParams(),
        envelopes=(
            Envelope(name="pitch_bounded", kind="max_abs", signal="theta", bound=0.1),
            Envelope(name="leans_into_push", kind="final_min", signal="theta_ref",
                     bound=0.01, t0=18.0, t1=21.0),
        ),
    )

    kick = ScenarioSpec(
        name="kick",
        duration=12.0,
        description="150 N, 50 ms shove at chest height; recovery timing check.",
        disturbances=(
            Disturbance(kind="impulse-force", magnitude=150.0,
                        application_height=0.8, direction=1.0, window=(2.0, 2.05)),
        ),
        envelopes=(
            Envelope(name="pitch_recovers", kind="settle_within", signal="theta",
                     ref_signal="theta_ref", frac=0.05, t0=2.05,
                     settle_min=3.2, settle_max=4.8),
            Envelope(name="position_recovers", kind="settle_within", signal="phi",
                     ref_signal="phi_ref", frac=0.05, t0=2.05,
                     settle_min=3.2, settle_max=4.8),
        ),
        # Pure balance recovery: the CoM has not moved, so the estimator is
        # frozen to keep the settling-time measurement clean.
        overrides={"adaptation.K_adapt": 0.0},
    )

    arm_hit = ScenarioSpec(
        name="arm_hit",
        duration=34.0,
        description="Short and long force pulses on the raised hands.",
        arm_poses=(TimedArmPose(t=1.0, xi=REACH_POSE),),
        disturbances=(
            Disturbance(kind="impulse-force", magnitude=80.0, direction=-1.0,
                        window=(8.0, 8.1), at_hand=True),
            Disturbance(kind="constant-force", magnitude=25.0, direction=-1.0,
                        window=(16.0, 17.0), at_hand=True),
        ),
        envelopes=(
            # Reach-pose equilibrium lean is about -0.15 rad; see arm_raise.
            Envelope(name="pitch_bounded", kind="max_abs", signal="theta", bound=0.25),
            Envelope(name="position_recovers", kind="final_band", signal="phi_err",
                     target=0.0, tol=0.15, t0=31.0),
        ),
    )

    wall_x = _hand_x_upright(a, REACH_POSE) + 0.03
    wall_collision = ScenarioSpec(
        name="wall_collision",
        duration=24.0,
        description="Shove toward a wall just ahead of the raised hands.",
        arm_poses=(TimedArmPose(t=1.0, xi=REACH_POSE),),
        disturbances=(
            Disturbance(kind="impulse-force", magnitude=150.0,
                        application_height=0.8, direction=1.0, window=(8.0, 8.1)),
            Disturbance(kind="wall-contact", wall_position=wall_x,
                        wall_stiffness=5000.0, wall_damping=100.0,
                        window=(0.0, 24.0)),
        ),
        envelopes=(
            Envelope(name="tension_spike", kind="peak_ratio", signal="tension_max",
                     bound=2.0, t0=8.0, t1=12.0, base0=6.0, base1=7.9),
            Envelope(name="tension_returns", kind="return_band", signal="tension_max",
                     frac=0.20, t0=20.0, base0=6.0, base1=7.9),
        ),
    )

    return (translate_rotate, arm_raise, desk_push, kick, arm_hit, wall_collision)


def scenario_by_name(name: str, plant: Optional[PlantParams] = None,
                     arm: Optional[ArmModel] = None) -> ScenarioSpec:
    for spec in builtin_scenarios(plant, arm):
        if spec.name == name:
            return spec
    raise KeyError(f"no builtin scenario named {name!r}")
