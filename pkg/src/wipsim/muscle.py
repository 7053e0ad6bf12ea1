"""Tendon-driven arm layer: length mapping, joint torque law, tension QP.

The chain per control tick is

    tau_ref = K_j (xi_ref - xi) + tau_g(xi)          joint torque demand
    T_ref   = argmin x^T W x                         tension allocation
              s.t. -G^T x = tau_ref, T_min <= x <= T_max
    l_target = l0 + G xi_ref + T_ref / k_e           commanded muscle lengths

G holds d(length)/d(angle), so a muscle that lengthens under positive joint
motion pulls the joint negative: tau = -G^T T. The l_target term T/k_e adds
the elastic stretch the tendon will have under the allocated tension, i.e.
the command is the expected loaded length.

ElasticArm is the plant-side model used in simulation: each tendon is a
linear spring of rate k_e between its geometric path length and the wound
(motor-side) length. The drive realizes a commanded loaded length by winding
below the stretch-free length, which pre-tensions the antagonistic set; at
the target pose the spring forces reproduce exactly the allocated tensions,
and the resulting joint stiffness -G^T K_e G is negative definite, so the
pose is stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .plant import ArmModel
from .qp import QpInfeasibleError, solve_box_qp

__all__ = [
    "MuscleConfig",
    "ArmState",
    "TensionSolution",
    "target_muscle_lengths",
    "reference_torque",
    "allocate_tensions",
    "gravity_compensation",
    "make_gravity_model",
    "ElasticArm",
    "default_muscle_config",
]


@dataclass(frozen=True)
class MuscleConfig:
    """Muscle routing and control constants for one arm."""

    G: np.ndarray                      # M x J moment arms, d(length)/d(angle) [m/rad]
    W: np.ndarray                      # M diagonal objective weights
    T_min: np.ndarray                  # per-muscle lower tension [N]
    T_max: np.ndarray                  # per-muscle upper tension [N]
    l0: np.ndarray                     # rest lengths at xi = 0 [m]
    k_e: np.ndarray                    # tendon elastic constants [N/m]
    K_j: np.ndarray                    # J diagonal proportional gains [N m/rad]

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, float))
        object.__setattr__(self, "G", G)
        M, J = G.shape
        for name, size in (("W", M), ("T_min", M), ("T_max", M),
                           ("l0", M), ("k_e", M), ("K_j", J)):
            v = np.atleast_1d(np.asarray(getattr(self, name), float))
            if v.size == 1 and size > 1:
                v = np.full(size, float(v[0]))
            if v.shape != (size,):
                raise ValueError(f"MuscleConfig.{name} must have {size} entries")
            object.__setattr__(self, name, v)
        if np.linalg.matrix_rank(G) < J:
            raise ValueError("muscle jacobian must have full joint rank")
        if np.any(self.W <= 0):
            raise ValueError("W diagonal entries must be > 0")
        if np.any(self.T_min < 0) or np.any(self.T_min >= self.T_max):
            raise ValueError("need 0 <= T_min < T_max elementwise")
        if np.any(self.k_e <= 0):
            raise ValueError("k_e must be > 0")

    @property
    def n_muscles(self) -> int:
        return self.G.shape[0]

    @property
    def n_joints(self) -> int:
        return self.G.shape[1]


@dataclass(frozen=True)
class ArmState:
    xi: np.ndarray
    xi_ref: np.ndarray
    T: np.ndarray

    def __post_init__(self):
        xi = np.atleast_1d(np.asarray(self.xi, float))
        xi_ref = np.atleast_1d(np.asarray(self.xi_ref, float))
        T = np.atleast_1d(np.asarray(self.T, float))
        if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(xi_ref))
                and np.all(np.isfinite(T))):
            raise ValueError("ArmState entries must be finite")
        if np.any(T < 0):
            raise ValueError("tensions must be non-negative")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "xi_ref", xi_ref)
        object.__setattr__(self, "T", T)


@dataclass(frozen=True)
class TensionSolution:
    T_ref: np.ndarray
    objective: float
    active_set: Tuple[int, ...]      # indices pinned at a tension bound
    equality_residual: float


def target_muscle_lengths(cfg: MuscleConfig, xi_target, T) -> np.ndarray:
    """Commanded muscle lengths: geometric path plus elastic stretch under T."""
    xi_target = np.atleast_1d(np.asarray(xi_target, float))
    T = np.atleast_1d(np.asarray(T, float))
    if xi_target.shape != (cfg.n_joints,):
        raise ValueError(f"expected {cfg.n_joints} joint angles")
    if T.shape != (cfg.n_muscles,):
        raise ValueError(f"expected {cfg.n_muscles} tensions")
    return cfg.l0 + cfg.G @ xi_target + T / cfg.k_e


def reference_torque(cfg: MuscleConfig, arm: ArmState,
                     gravity_model: Optional[Callable] = None) -> np.ndarray:
    """Proportional joint torque plus gravity compensation."""
    tau = cfg.K_j * (arm.xi_ref - arm.xi)
    if gravity_model is not None:
        tau = tau + np.asarray(gravity_model(arm.xi), float)
    return tau


def allocate_tensions(cfg: MuscleConfig, tau_ref, warm_start=None) -> TensionSolution:
    """Minimum-weighted-norm tensions realizing tau_ref = -G^T T within bounds.

    warm_start may carry the previous tick's tensions; nearby solves then
    skip the feasibility phase.
    """
    tau_ref = np.atleast_1d(np.asarray(tau_ref, float))
    if tau_ref.shape != (cfg.n_joints,):
        raise ValueError(f"expected {cfg.n_joints} joint torques")
    sol = solve_box_qp(cfg.W, -cfg.G.T, tau_ref, cfg.T_min, cfg.T_max,
                       x0=warm_start)
    return TensionSolution(
        T_ref=sol.x,
        objective=sol.objective,
        active_set=tuple(sorted(sol.active_lower + sol.active_upper)),
        equality_residual=sol.equality_residual,
    )


def gravity_compensation(arm: ArmModel, xi: Sequence[float], g: float = 9.81) -> np.ndarray:
    """Joint torques that hold the arm static against gravity at pose xi.

    Point masses sit at the distal link ends; the holding torque at joint j
    is the weight moment of everything distal to it.
    """
    n = arm.n_joints
    ang = 0.0
    angles = []
    for q in xi:
        ang += q
        angles.append(ang)
    tau = np.zeros(n)
    for j in range(n):
        m_sum = 0.0
        for k in range(n - 1, j - 1, -1):
            # horizontal lever from joint j to the mass at the end of link k
            lever = sum(arm.link_lengths[i] * math.sin(angles[i]) for i in range(j, k + 1))
            tau[j] += arm.link_masses[k] * g * lever
    return tau


def make_gravity_model(arm: ArmModel, g: float = 9.81) -> Callable:
    return lambda xi: gravity_compensation(arm, xi, g)


def default_muscle_config() -> MuscleConfig:
    """Shipped 2-joint, 6-muscle routing (shoulder pitch, elbow pitch).

    Rows: shoulder antagonist pair, elbow antagonist pair, and a biarticular
    pair spanning both joints. Moment arms were drawn once from [0.02, 0.06]
    and are frozen here so every run allocates over the same geometry.
    """
    G = np.array([
        (0.050958, 0.000000),
        (-0.054344, 0.000000),
        (0.000000, 0.059025),
        (0.000000, -0.051443),
        (0.025125, 0.038015),
        (-0.034832, -0.057071),
    ])
    return MuscleConfig(
        G=G,
        W=np.ones(6),
        T_min=np.full(6, 10.0),
        T_max=np.full(6, 200.0),
        l0=np.full(6, 0.30),
        k_e=np.full(6, 10000.0),
        K_j=np.array([50.0, 50.0]),
    )


class ElasticArm:
    """Simulated tendon arm: springs between geometric and wound lengths.

    State is (xi, xi_dot, wound lengths). command() ingests the controller
    outputs; step() integrates the joint dynamics under spring tensions,
    gravity on the links, an optional horizontal hand force, and viscous
    joint damping. Internals run on plain floats: the arrays are tiny and
    this sits inside the 1 kHz simulation loop.
    """

    def __init__(self, cfg: MuscleConfig, arm: ArmModel,
                 joint_inertia: Optional[Sequence[float]] = None,
                 joint_damping: Optional[Sequence[float]] = None,
                 g: float = 9.81):
        if cfg.n_joints != arm.n_joints:
            raise ValueError("muscle config and arm model joint counts differ")
        self.cfg = cfg
        self.arm = arm
        self.g = g
        n = arm.n_joints
        if joint_inertia is None:
            # point masses at link ends, distal mass loads proximal joints
            joint_inertia = []
            for j in range(n):
                s = 0.0
                for k in range(j, n):
                    reach = sum(arm.link_lengths[j:k + 1])
                    s += arm.link_masses[k] * reach ** 2
                joint_inertia.append(s)
        if joint_damping is None:
            joint_damping = [6.0, 2.5][:n] if n <= 2 else [6.0] * n
        self.I_j = [float(v) for v in joint_inertia]
        self.c_j = [float(v) for v in joint_damping]
        self.xi = [0.0] * n
        self.xi_dot = [0.0] * n
        self._G = [tuple(float(v) for v in row) for row in cfg.G]
        self._l0 = [float(v) for v in cfg.l0]
        self._ke = [float(v) for v in cfg.k_e]
        self._wound = list(self._l0)
        self.T = [0.0] * cfg.n_muscles

    def command(self, l_target, T_ref) -> None:
        """Wind each tendon so the expected loaded length matches l_target.

        Winding sits one expected stretch below the stretch-free length:
        the first T/k_e removes the stretch embedded in the command, the
        second pre-tensions the spring so it carries T at the target pose.
        """
        for i in range(len(self._wound)):
            self._wound[i] = float(l_target[i]) - 2.0 * float(T_ref[i]) / self._ke[i]

    def geometric_lengths(self) -> list:
        out = []
        for i, row in enumerate(self._G):
            s = self._l0[i]
            for j, gij in enumerate(row):
                s += gij * self.xi[j]
            out.append(s)
        return out

    def step(self, dt: float, hand_force_x: float = 0.0, pitch: float = 0.0) -> None:
        n = len(self.xi)
        lg = self.geometric_lengths()
        T = [max(self._ke[i] * (lg[i] - self._wound[i]), 0.0)
             for i in range(len(lg))]
        self.T = T
        # gravity load on the links, tilted by body pitch
        ang = pitch
        angles = []
        for q in self.xi:
            ang += q
            angles.append(ang)
        tau = [0.0] * n
        for j in range(n):
            for k in range(j, n):
                lever = sum(self.arm.link_lengths[i] * math.sin(angles[i])
                            for i in range(j, k + 1))
                tau[j] -= self.arm.link_masses[k] * self.g * lever
        if hand_force_x != 0.0:
            jac = []
            for j in range(n):
                s = 0.0
                for k in range(j, n):
                    s += self.arm.link_lengths[k] * math.cos(angles[k])
                jac.append(s)
            for j in range(n):
                tau[j] += jac[j] * hand_force_x
        for j in range(n):
            for i, row in enumerate(self._G):
                tau[j] -= row[j] * T[i]
            tau[j] -= self.c_j[j] * self.xi_dot[j]
        # semi-implicit Euler; the tendon springs keep this well inside the
        # stable region at dt = 1e-3
        for j in range(n):
            self.xi_dot[j] += tau[j] / self.I_j[j] * dt
            self.xi[j] += self.xi_dot[j] * dt
