"""Locomotion controller: LQR split across wheels, yaw superposition, CoM adaptation.

The total torque from the LQR is split evenly across the wheel pair, then a
proportional heading correction is superposed differentially:

    u_l = u/2 - K_psi (psi_ref - psi)
    u_r = u/2 + K_psi (psi_ref - psi)

so the sum is untouched by heading error and the difference steers. Both
wheels saturate independently at the motor limit.

The adaptation law trims the pitch reference so a shifted center of mass is
carried by lean instead of by perpetual wheel travel. Wheel-position error
e = phi - phi_ref outside the dead zone moves theta_ref opposite to e at a
rate-limited pace: a robot creeping forward (e growing positive) must lean
back, and vice versa. Inside the dead zone theta_ref is left bit-identical,
which is what leaves the documented small steady-state offset in phi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .plant import PendulumState
from .riccati import LqrGain, control_torque

__all__ = [
    "YawGain",
    "AdaptationConfig",
    "CommandSetpoint",
    "wheel_torques",
    "adapt_theta_ref",
    "run_controller_tick",
    "DEFAULT_WHEEL_TORQUE_LIMIT",
]

# Per-wheel motor saturation [N m].
DEFAULT_WHEEL_TORQUE_LIMIT = 40.0


@dataclass(frozen=True)
class YawGain:
    K_psi: float = 5.0  # N m per rad of heading error

    def __post_init__(self):
        if not (math.isfinite(self.K_psi) and self.K_psi >= 0):
            raise ValueError("K_psi must be finite and >= 0")


@dataclass(frozen=True)
class AdaptationConfig:
    K_adapt: float = 0.005      # rad/s of theta_ref per rad of wheel error
    dead_zone: float = 0.05     # no update while |phi - phi_ref| is below this [rad]
    rate_limit: float = 0.05    # max |d theta_ref/dt| [rad/s]
    theta_ref_bound: float = 0.3

    def __post_init__(self):
        for name in ("K_adapt", "dead_zone", "rate_limit", "theta_ref_bound"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"AdaptationConfig.{name} must be finite and >= 0")
        if self.theta_ref_bound >= math.pi / 4:
            raise ValueError("theta_ref_bound must stay below pi/4")


@dataclass(frozen=True)
class CommandSetpoint:
    phi_ref: float = 0.0
    psi_ref: float = 0.0
    timestamp: float = 0.0

    def __post_init__(self):
        for name in ("phi_ref", "psi_ref", "timestamp"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"CommandSetpoint.{name} must be finite")


def wheel_torques(gain: LqrGain, yaw: YawGain, s: PendulumState,
                  cmd: CommandSetpoint, theta_ref: float = 0.0,
                  u_max: float = DEFAULT_WHEEL_TORQUE_LIMIT) -> tuple:
    """Per-wheel torques: even LQR split plus differential heading term."""
    u = control_torque(gain, s, theta_ref, cmd.phi_ref)
    uy = yaw.K_psi * (cmd.psi_ref - s.psi)
    u_l = min(max(u / 2.0 - uy, -u_max), u_max)
    u_r = min(max(u / 2.0 + uy, -u_max), u_max)
    return u_l, u_r


def adapt_theta_ref(cfg: AdaptationConfig, theta_ref: float, s: PendulumState,
                    cmd: CommandSetpoint, dt: float) -> float:
    """One rate-limited adaptation update of the pitch reference."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    e = s.phi - cmd.phi_ref
    if abs(e) <= cfg.dead_zone:
        return theta_ref
    cap = cfg.rate_limit * dt
    step = min(max(-cfg.K_adapt * e * dt, -cap), cap)
    out = theta_ref + step
    return min(max(out, -cfg.theta_ref_bound), cfg.theta_ref_bound)


def run_controller_tick(gain: LqrGain, yaw: YawGain, adapt: AdaptationConfig,
                        s: PendulumState, cmd: CommandSetpoint, theta_ref: float,
                        dt: float, u_max: float = DEFAULT_WHEEL_TORQUE_LIMIT) -> tuple:
    """Adaptation update followed by torque computation, once per control period."""
    theta_ref = adapt_theta_ref(adapt, theta_ref, s, cmd, dt)
    u_l, u_r = wheel_torques(gain, yaw, s, cmd, theta_ref, u_max)
    return u_l, u_r, theta_ref
