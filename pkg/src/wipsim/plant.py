"""Planar wheeled-inverted-pendulum dynamics with yaw and arm-driven CoM shift.

The vehicle is a coaxial wheel pair plus an inverted body. Pitch/translation
uses generalized coordinates (theta, phi) where theta is body pitch from
upright and phi is mean wheel rotation relative to the body, so the absolute
wheel angle is theta + phi and the axle travels r_w * (theta + phi). Heading
psi is a separate DOF driven by differential wheel torque.

The linearized model is the descriptor system

    E xdot = A0 x + B0 u,   x = [theta, phi, theta_dot, phi_dot]

with

    E  = [[1, 0, 0,      0   ],          A0 = [[0, 0, 1, 0],
          [0, 1, 0,      0   ],                [0, 0, 0, 1],
          [0, 0, a+2b+c, a+b ],                [d, 0, 0, 0],
          [0, 0, a+b,    a   ]]                [0, 0, 0, 0]]

    B0 = [0, 0, 0, 1]^T
    a = (m_b + m_w) r_w^2 + I_w,   b = m_b r_w l,
    c = m_b l^2 + I_b,             d = m_b g l.

The nonlinear plant integrated here comes from the same planar Lagrangian
kept exact in theta:

    M(th) [th_dd, ph_dd]^T = f(th, th_d, tau)
    M(th) = [[a + 2 b cos th + c, a + b cos th],
             [a + b cos th,       a          ]]
    f = [d sin th + b th_d^2 sin th + Q_th,
         tau + b th_d^2 sin th + Q_ph]

where tau is the total wheel torque and (Q_th, Q_ph) are generalized forces
of an external horizontal force F applied at height h above the ground:
Q_th = F (r_w + (h - r_w) cos th), Q_ph = F r_w.

Arm motion does not change total mass, only the combined CoM and the pitch
inertia. m_b and l describe the complete upper body with arms hanging at the
reference pose; com_offset reports how the combined CoM and inertia move when
the arm joints leave that pose, and the dynamics swap (b, c, d, 0) for the
effective values (b_e, c_e, d_e, alpha) where alpha is the angle the CoM ray
makes with the body axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "PlantParams",
    "PendulumState",
    "LinearModel",
    "Disturbance",
    "ArmModel",
    "SingularPlantError",
    "IntegrationBlowUpError",
    "build_linear_model",
    "com_offset",
    "effective_pitch_coeffs",
    "step_nonlinear",
    "linearize_numerically",
    "mechanical_energy",
]

# Condition-number cap beyond which the descriptor mass block is treated as
# numerically singular.
_E_COND_CAP = 1e12


class SingularPlantError(ValueError):
    """The 2x2 descriptor mass block is numerically singular."""


class IntegrationBlowUpError(RuntimeError):
    """A step produced a non-finite state."""

    def __init__(self, time: float):
        self.time = time
        super().__init__(f"integration produced non-finite state at t={time:.6f} s")


@dataclass(frozen=True)
class PlantParams:
    """Physical constants of the wheel pair and body.

    m_b and l describe the complete upper body including arms at the
    reference (hanging) pose; arm motion is layered on via com_offset.
    yaw_damping is viscous tire-scrub resistance about the vertical axis,
    without which a proportional heading loop would never settle.
    """

    m_w: float = 2.0          # wheel-pair mass [kg]
    m_b: float = 20.0         # body mass incl. arms at reference pose [kg]
    I_w: float = 0.6          # wheel-pair spin inertia, reflected gearing incl. [kg m^2]
    I_b: float = 1.5          # body pitch inertia about its CoM [kg m^2]
    r_w: float = 0.1          # wheel radius [m]
    l: float = 0.5            # axle-to-CoM distance [m]
    g: float = 9.81           # gravity [m/s^2]
    track_width: float = 0.4  # lateral wheel separation [m]
    I_yaw: float = 0.8        # body yaw inertia [kg m^2]
    yaw_damping: float = 6.0  # viscous yaw resistance [N m s/rad]

    def __post_init__(self):
        for name in ("m_w", "m_b", "I_w", "I_b", "r_w", "l", "g",
                     "track_width", "I_yaw"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"PlantParams.{name} must be finite and > 0, got {v!r}")
        if not (math.isfinite(self.yaw_damping) and self.yaw_damping >= 0):
            raise ValueError("PlantParams.yaw_damping must be finite and >= 0")

    @property
    def a(self) -> float:
        return (self.m_b + self.m_w) * self.r_w ** 2 + self.I_w

    @property
    def b(self) -> float:
        return self.m_b * self.r_w * self.l

    @property
    def c(self) -> float:
        return self.m_b * self.l ** 2 + self.I_b

    @property
    def d(self) -> float:
        return self.m_b * self.g * self.l


@dataclass(frozen=True)
class PendulumState:
    theta: float = 0.0      # body pitch from upright [rad]
    phi: float = 0.0        # mean wheel rotation relative to body [rad]
    psi: float = 0.0        # heading [rad]
    theta_dot: float = 0.0
    phi_dot: float = 0.0
    psi_dot: float = 0.0

    def __post_init__(self):
        for name in ("theta", "phi", "psi", "theta_dot", "phi_dot", "psi_dot"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"PendulumState.{name} must be finite")

    @property
    def balanced(self) -> bool:
        return abs(self.theta) < math.pi / 2

    def as_vector(self) -> Tuple[float, float, float, float]:
        """Pitch/translation state [theta, phi, theta_dot, phi_dot]."""
        return (self.theta, self.phi, self.theta_dot, self.phi_dot)


@dataclass(frozen=True)
class LinearModel:
    A: np.ndarray
    B: np.ndarray
    E: np.ndarray
    A0: np.ndarray
    B0: np.ndarray


@dataclass(frozen=True)
class Disturbance:
    """External force event applied to the body.

    For impulse-force and constant-force the magnitude is a horizontal force
    [N] active inside the window; an impulse is simply a short window. For
    wall-contact the force is a one-sided spring-damper against a vertical
    wall at wall_position [m] in front of the start point, engaging whatever
    body point the scenario routes it to (the hand when arms are raised).
    """

    kind: Literal["impulse-force", "constant-force", "wall-contact"]
    magnitude: float = 0.0
    application_height: float = 0.8   # above ground [m]
    direction: float = 1.0
    window: Tuple[float, float] = (0.0, 0.0)
    # Force lands on the hands instead of the torso: it then loads the arm
    # joints as well as the body, and the height tracks the actual hands.
    at_hand: bool = False
    wall_position: float = 0.0
    wall_stiffness: float = 5000.0
    wall_damping: float = 100.0

    def __post_init__(self):
        if self.kind not in ("impulse-force", "constant-force", "wall-contact"):
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        if not self.window[0] <= self.window[1]:
            raise ValueError("disturbance window must be well-ordered")
        if self.wall_stiffness < 0 or self.wall_damping < 0:
            raise ValueError("wall stiffness/damping must be non-negative")

    def active(self, t: float) -> bool:
        return self.window[0] <= t < self.window[1]


@dataclass(frozen=True)
class ArmModel:
    """Point-mass chain arms hanging from a shoulder mount on the body axis.

    Each arm is a pitch-joint chain; link masses are concentrated at the
    distal end of each link (motor-at-joint construction). Angles are
    measured from straight down, positive swinging forward. The reference
    pose is all zeros (arms hanging), where the arms contribute nothing
    beyond what PlantParams already describes.
    """

    link_lengths: Tuple[float, ...] = (0.25, 0.25)
    link_masses: Tuple[float, ...] = (1.5, 1.0)
    mount_height: float = 0.4  # shoulder height above the axle [m]
    xi_left: Tuple[float, ...] = (0.0, 0.0)
    xi_right: Tuple[float, ...] = (0.0, 0.0)

    def __post_init__(self):
        n = len(self.link_lengths)
        if len(self.link_masses) != n:
            raise ValueError("link_lengths and link_masses must have equal length")
        if len(self.xi_left) != n or len(self.xi_right) != n:
            raise ValueError("per-arm joint angles must match the link count")
        if any(v < 0 for v in self.link_lengths) or any(v < 0 for v in self.link_masses):
            raise ValueError("link lengths and masses must be non-negative")

    @property
    def n_joints(self) -> int:
        return len(self.link_lengths)

    def with_pose(self, xi_left: Sequence[float], xi_right: Sequence[float]) -> "ArmModel":
        return replace(self, xi_left=tuple(xi_left), xi_right=tuple(xi_right))

    def link_points(self, xi: Sequence[float]) -> list:
        """Distal end of each link in the body frame (x forward, z up from axle)."""
        pts = []
        x, z, ang = 0.0, self.mount_height, 0.0
        for L, q in zip(self.link_lengths, xi):
            ang += q
            x += L * math.sin(ang)
            z -= L * math.cos(ang)
            pts.append((x, z))
        return pts

    def hand_position(self, xi: Sequence[float]) -> Tuple[float, float]:
        pts = self.link_points(xi)
        return pts[-1] if pts else (0.0, self.mount_height)

    def hand_jacobian_x(self, xi: Sequence[float]) -> Tuple[float, ...]:
        """d(hand x)/d(xi_j): maps a horizontal hand force to joint torques."""
        ang = 0.0
        angles = []
        for q in xi:
            ang += q
            angles.append(ang)
        n = len(angles)
        cols = []
        for j in range(n):
            s = 0.0
            for k in range(j, n):
                s += self.link_lengths[k] * math.cos(angles[k])
            cols.append(s)
        return tuple(cols)


def build_linear_model(p: PlantParams) -> LinearModel:
    """Assemble the descriptor factors and the state-space model.

    Raises SingularPlantError when the lower-right mass block of E is
    numerically singular (condition number above the internal cap).
    """
    a, b, c, d = p.a, p.b, p.c, p.d
    E = np.eye(4)
    E[2, 2] = a + 2 * b + c
    E[2, 3] = a + b
    E[3, 2] = a + b
    E[3, 3] = a
    A0 = np.zeros((4, 4))
    A0[0, 2] = 1.0
    A0[1, 3] = 1.0
    A0[2, 0] = d
    B0 = np.array([[0.0], [0.0], [0.0], [1.0]])

    E22 = E[2:, 2:]
    if np.linalg.cond(E22) > _E_COND_CAP:
        raise SingularPlantError(
            f"descriptor mass block is numerically singular (a={a:.3g}, b={b:.3g}, c={c:.3g})")
    A = np.zeros((4, 4))
    A[0, 2] = 1.0
    A[1, 3] = 1.0
    A[2:, 0] = np.linalg.solve(E22, [d, 0.0])
    B = np.zeros((4, 1))
    B[2:, 0] = np.linalg.solve(E22, [0.0, 1.0])
    return LinearModel(A=A, B=B, E=E, A0=A0, B0=B0)


def com_offset(p: PlantParams, arm: ArmModel) -> Tuple[float, float, float]:
    """Combined-CoM displacement and pitch-inertia change for the arm pose.

    Returns (dl_x, dl_z, dI_b): horizontal and vertical displacement of the
    combined body CoM relative to the reference (arms hanging) pose, and the
    change of pitch inertia about the combined CoM. Total mass is p.m_b and
    never changes; the lever rule moves the CoM by sum(m_i * dr_i) / m_b.
    """
    ref = arm.link_points([0.0] * arm.n_joints)
    dx = dz = 0.0
    I_now = I_ref = 0.0
    for xi in (arm.xi_left, arm.xi_right):
        pts = arm.link_points(xi)
        for m, (x, z), (x0, z0) in zip(arm.link_masses, pts, ref):
            dx += m * (x - x0)
            dz += m * (z - z0)
            I_now += m * (x * x + z * z)
            I_ref += m * (x0 * x0 + z0 * z0)
    dl_x = dx / p.m_b
    dl_z = dz / p.m_b
    # Inertia about the axle changes by (I_now - I_ref); converting to inertia
    # about the (moved) CoM subtracts the parallel-axis term of the CoM shift.
    l_ref_sq = p.l ** 2
    l_eff_sq = dl_x ** 2 + (p.l + dl_z) ** 2
    dI_axle = I_now - I_ref
    dI_b = dI_axle - p.m_b * (l_eff_sq - l_ref_sq)
    return dl_x, dl_z, dI_b


def effective_pitch_coeffs(p: PlantParams, arm: Optional[ArmModel]) -> Tuple[float, float, float, float]:
    """(b_e, c_e, d_e, alpha) for the current arm pose; alpha is the CoM ray angle."""
    if arm is None:
        return p.b, p.c, p.d, 0.0
    dl_x, dl_z, dI_b = com_offset(p, arm)
    if dl_x == 0.0 and dl_z == 0.0 and dI_b == 0.0:
        return p.b, p.c, p.d, 0.0
    l_eff = math.hypot(dl_x, p.l + dl_z)
    alpha = math.atan2(dl_x, p.l + dl_z)
    b_e = p.m_b * p.r_w * l_eff
    c_e = p.m_b * l_eff ** 2 + p.I_b + dI_b
    d_e = p.m_b * p.g * l_eff
    return b_e, c_e, d_e, alpha


def _pitch_accels(a: float, b_e: float, c_e: float, d_e: float, alpha: float,
                  th: float, th_d: float, tau: float,
                  forces, r_w: float) -> Tuple[float, float]:
    """Solve M(th) acc = f for the pitch/translation accelerations.

    forces is an iterable of (F, h) pairs: horizontal force F applied at
    height h above the ground.
    """
    ca = math.cos(th + alpha)
    sa = math.sin(th + alpha)
    m11 = a + 2.0 * b_e * ca + c_e
    m12 = a + b_e * ca
    det = m11 * a - m12 * m12
    q_th = q_ph = 0.0
    for F, h in forces:
        q_th += F * (r_w + (h - r_w) * math.cos(th))
        q_ph += F * r_w
    cent = b_e * th_d * th_d * sa
    f1 = d_e * sa + cent + q_th
    f2 = tau + cent + q_ph
    return (a * f1 - m12 * f2) / det, (m11 * f2 - m12 * f1) / det


def step_nonlinear(p: PlantParams, arm: Optional[ArmModel], s: PendulumState,
                   u_l: float, u_r: float, d: Optional[Disturbance] = None,
                   dt: float = 1e-3, *,
                   extra_forces: Optional[Sequence[Tuple[float, float]]] = None,
                   t: float = 0.0) -> PendulumState:
    """Advance the full state one RK4 step of size dt.

    Total torque u_l + u_r drives pitch/translation; differential torque
    drives yaw. A Disturbance (gated by its window via t) applies a
    horizontal force at its application height. extra_forces adds further
    (force, height) pairs, which the scenario runner uses for
    state-dependent contact forces; all are held constant over the step.
    """
    if not (0.0 < dt <= 0.01):
        raise ValueError("dt must be in (0, 0.01]")
    a = p.a
    b_e, c_e, d_e, alpha = effective_pitch_coeffs(p, arm)

    forces = []
    if d is not None and d.kind in ("impulse-force", "constant-force") and d.active(t):
        forces.append((d.direction * d.magnitude, d.application_height))
    if extra_forces:
        forces.extend(extra_forces)

    th, ph, th_d, ph_d = s.theta, s.phi, s.theta_dot, s.phi_dot

    def deriv(y):
        acc = _pitch_accels(a, b_e, c_e, d_e, alpha, y[0], y[2],
                            u_l + u_r, forces, p.r_w)
        return (y[2], y[3], acc[0], acc[1])

    y0 = (th, ph, th_d, ph_d)
    try:
        k1 = deriv(y0)
        y1 = tuple(y0[i] + 0.5 * dt * k1[i] for i in range(4))
        k2 = deriv(y1)
        y2 = tuple(y0[i] + 0.5 * dt * k2[i] for i in range(4))
        k3 = deriv(y2)
        y3 = tuple(y0[i] + dt * k3[i] for i in range(4))
        k4 = deriv(y3)
        out = [y0[i] + dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]) for i in range(4)]
    except (OverflowError, ValueError) as err:
        # evaluating the vector field on an overflowed intermediate state
        raise IntegrationBlowUpError(t) from err

    # Yaw: differential torque through the wheel radius, viscous scrub loss.
    def yaw_acc(psi_d):
        return ((u_r - u_l) * (p.track_width / 2.0) / p.r_w
                - p.yaw_damping * psi_d) / p.I_yaw

    pd = s.psi_dot
    k1p, k1d = pd, yaw_acc(pd)
    k2p, k2d = pd + 0.5 * dt * k1d, yaw_acc(pd + 0.5 * dt * k1d)
    k3p, k3d = pd + 0.5 * dt * k2d, yaw_acc(pd + 0.5 * dt * k2d)
    k4p, k4d = pd + dt * k3d, yaw_acc(pd + dt * k3d)
    psi = s.psi + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
    psi_dot = pd + dt / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d)

    vals = out + [psi, psi_dot]
    if not all(math.isfinite(v) for v in vals):
        raise IntegrationBlowUpError(t)
    return PendulumState(theta=out[0], phi=out[1], psi=psi,
                         theta_dot=out[2], phi_dot=out[3], psi_dot=psi_dot)


def linearize_numerically(p: PlantParams, arm: Optional[ArmModel] = None,
                          eps: float = 1e-6) -> LinearModel:
    """Central finite-difference Jacobian of the nonlinear dynamics at upright.

    With the arm at the reference pose this must coincide with
    build_linear_model; the analytic descriptor factors are attached so the
    result is a complete LinearModel.
    """
    a = p.a
    b_e, c_e, d_e, alpha = effective_pitch_coeffs(p, arm)

    def rhs(x, u):
        acc = _pitch_accels(a, b_e, c_e, d_e, alpha, x[0], x[2], u, (), p.r_w)
        return np.array([x[2], x[3], acc[0], acc[1]])

    x0 = np.zeros(4)
    A = np.zeros((4, 4))
    for j in range(4):
        hj = eps * max(1.0, abs(x0[j]))
        xp = x0.copy(); xp[j] += hj
        xm = x0.copy(); xm[j] -= hj
        A[:, j] = (rhs(xp, 0.0) - rhs(xm, 0.0)) / (2 * hj)
    B = ((rhs(x0, eps) - rhs(x0, -eps)) / (2 * eps)).reshape(4, 1)
    analytic = build_linear_model(p)
    return LinearModel(A=A, B=B, E=analytic.E, A0=analytic.A0, B0=analytic.B0)


def mechanical_energy(p: PlantParams, s: PendulumState,
                      arm: Optional[ArmModel] = None) -> float:
    """Total mechanical energy of the planar motion plus yaw spin."""
    a = p.a
    b_e, c_e, d_e, alpha = effective_pitch_coeffs(p, arm)
    sw = s.theta_dot + s.phi_dot  # absolute wheel rate
    kinetic = (0.5 * a * sw * sw
               + b_e * math.cos(s.theta + alpha) * sw * s.theta_dot
               + 0.5 * c_e * s.theta_dot ** 2
               + 0.5 * p.I_yaw * s.psi_dot ** 2)
    potential = d_e * math.cos(s.theta + alpha)
    return kinetic + potential
