"""Closed-loop scenario execution.

Wires the pieces together at fixed rates: the plant integrates at dt
(1 kHz default), the controller and muscle allocation run every
control_every substeps (500 Hz), and the trace is sampled every log_every
substeps (100 Hz). Command and arm-pose events are applied on exact control
ticks; a scenario whose event times do not sit on the control grid is
rejected before anything runs.

Contact forces (desk bumper, wall on the hands, force pulses) are resolved
from the current state each substep and passed to the plant as horizontal
force/height pairs, so every force that tilts the body also loads the
wheels consistently.

The envelope report is a pure function of the logged trace: re-evaluating
an exported trace file reproduces it exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .balance import (
    DEFAULT_WHEEL_TORQUE_LIMIT,
    AdaptationConfig,
    CommandSetpoint,
    YawGain,
    run_controller_tick,
)
from .muscle import ElasticArm, MuscleConfig, allocate_tensions, default_muscle_config, gravity_compensation
from .qp import QpInfeasibleError
from .plant import (
    ArmModel,
    PendulumState,
    PlantParams,
    build_linear_model,
    com_offset,
    step_nonlinear,
)
from .riccati import LqrGain, LqrWeights, solve_care
from .scenarios import Envelope, ScenarioSpec

__all__ = [
    "SimConfig",
    "Trace",
    "EnvelopeResult",
    "ScenarioReport",
    "RunResult",
    "apply_overrides",
    "trace_columns",
    "run_scenario",
    "evaluate_envelopes",
    "export_trace",
    "read_trace",
]

_GRID_TOL = 1e-9


@dataclass(frozen=True)
class SimConfig:
    """Everything run_scenario needs besides the scenario script itself."""

    plant: PlantParams = field(default_factory=PlantParams)
    arm: ArmModel = field(default_factory=ArmModel)
    weights: LqrWeights = field(default_factory=LqrWeights)
    yaw: YawGain = field(default_factory=YawGain)
    adaptation: AdaptationConfig = field(default_factory=AdaptationConfig)
    muscle: MuscleConfig = field(default_factory=default_muscle_config)
    dt: float = 1e-3
    control_every: int = 2
    log_every: int = 10
    u_max: float = DEFAULT_WHEEL_TORQUE_LIMIT
    arm_slew: float = 1.0           # joint reference slew [rad/s]
    sensor_noise_std: float = 0.0   # additive Gaussian on measured state
    encoder_quantum: float = 0.0    # angle quantization step [rad], 0 = off

    def __post_init__(self):
        if not (0.0 < self.dt <= 0.01):
            raise ValueError("dt: must be in (0, 0.01]")
        if self.control_every < 1:
            raise ValueError("control_every: must be >= 1")
        if self.log_every < 1:
            raise ValueError("log_every: must be >= 1")
        if self.u_max <= 0:
            raise ValueError("u_max: must be > 0")
        if self.arm_slew <= 0:
            raise ValueError("arm_slew: must be > 0")
        if self.sensor_noise_std < 0 or self.encoder_quantum < 0:
            raise ValueError("sensor noise parameters must be >= 0")
        if self.muscle.n_joints != self.arm.n_joints:
            raise ValueError("muscle: joint count differs from arm model")

    @property
    def control_period(self) -> float:
        return self.dt * self.control_every

    @property
    def log_period(self) -> float:
        return self.dt * self.log_every


def apply_overrides(config: SimConfig, overrides: Dict[str, object]) -> SimConfig:
    """Return a copy of config with dotted-path fields replaced.

    Numeric leaf values are coerced to the type currently in place, so
    "control_every=4.0" stays an int; validation errors are re-raised with
    the offending path.
    """
    for path, value in overrides.items():
        parts = path.split(".")
        try:
            config = _replace_path(config, parts, value)
        except ValueError as err:
            raise ValueError(f"{path}: {err}") from err
    return config


def _replace_path(obj, parts: Sequence[str], value):
    name = parts[0]
    names = {f.name for f in fields(obj)} if hasattr(obj, "__dataclass_fields__") else set()
    if name not in names:
        raise ValueError("unknown config field")
    if len(parts) > 1:
        return replace(obj, **{name: _replace_path(getattr(obj, name), parts[1:], value)})
    cur = getattr(obj, name)
    if isinstance(cur, bool):
        value = bool(value)
    elif isinstance(cur, int) and isinstance(value, (int, float)):
        value = int(value)
    elif isinstance(cur, float) and isinstance(value, (int, float)):
        value = float(value)
    elif isinstance(cur, tuple) and isinstance(value, (list, tuple)):
        value = tuple(value)
    return replace(obj, **{name: value})


# ---------------------------------------------------------------------------
# Trace


@dataclass(frozen=True)
class Trace:
    """Uniformly sampled log of one run."""

    columns: Tuple[str, ...]
    data: np.ndarray  # shape (n_rows, n_columns)

    def __post_init__(self):
        data = np.asarray(self.data, float)
        if data.ndim == 1:
            data = data.reshape(0, len(self.columns)) if data.size == 0 else data.reshape(1, -1)
        if data.shape[1] != len(self.columns):
            raise ValueError("trace data width does not match columns")
        object.__setattr__(self, "data", data)

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    def column(self, name: str) -> np.ndarray:
        try:
            idx = self.columns.index(name)
        except ValueError:
            raise ValueError(f"unknown trace column {name!r}") from None
        return self.data[:, idx]

    def signal(self, name: str) -> np.ndarray:
        """Column or derived signal (theta_err, phi_err, psi_err, tension_max)."""
        if name in self.columns:
            return self.column(name)
        if name in ("theta_err", "phi_err", "psi_err"):
            base = name.split("_")[0]
            return self.column(base) - self.column(base + "_ref")
        if name == "tension_max":
            cols = [i for i, c in enumerate(self.columns) if c.startswith("T_")]
            if not cols:
                raise ValueError("trace has no tension columns")
            return self.data[:, cols].max(axis=1)
        raise ValueError(f"unknown signal {name!r}")

    def has_signal(self, name: str) -> bool:
        try:
            self.signal(name)
            return True
        except ValueError:
            return False


def trace_columns(config: SimConfig) -> Tuple[str, ...]:
    """Column order of the trace; documented and stable."""
    cols = ["t", "theta", "phi", "psi", "theta_dot", "phi_dot", "psi_dot",
            "theta_ref", "phi_ref", "psi_ref", "u_l", "u_r"]
    m = config.muscle.n_muscles
    j = config.arm.n_joints
    cols += [f"T_l{i + 1}" for i in range(m)]
    cols += [f"T_r{i + 1}" for i in range(m)]
    cols += [f"xi_l{i + 1}" for i in range(j)]
    cols += [f"xi_r{i + 1}" for i in range(j)]
    cols += ["com_dx", "com_dz"]
    return tuple(cols)


def export_trace(trace: Trace, path, channels: Sequence[str] = ()) -> None:
    """Write the trace as comma-separated values, %.17g per entry.

    The format is locale-independent and round-trips losslessly; identical
    traces produce byte-identical files. channels selects a column subset
    (t always included); empty means all columns.
    """
    if channels:
        names = ["t"] + [c for c in channels if c != "t"]
        idx = []
        for c in names:
            if c not in trace.columns:
                raise ValueError(f"unknown trace column {c!r}")
            idx.append(trace.columns.index(c))
        data = trace.data[:, idx]
    else:
        names = list(trace.columns)
        data = trace.data
    lines = [",".join(names)]
    for row in data:
        lines.append(",".join("%.17g" % v for v in row))
    text = "\n".join(lines) + "\n"
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def read_trace(path) -> Trace:
    with open(path, "r") as fh:
        header = fh.readline().strip()
        if not header:
            raise ValueError(f"{path}: empty trace file")
        columns = tuple(header.split(","))
        rows = []
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split(",")])
    data = np.array(rows, float) if rows else np.zeros((0, len(columns)))
    return Trace(columns=columns, data=data)


# ---------------------------------------------------------------------------
# Envelope evaluation


@dataclass(frozen=True)
class EnvelopeResult:
    name: str
    kind: str
    signal: str
    passed: bool
    value: float
    threshold: float
    margin: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "signal": self.signal,
            "passed": bool(self.passed),
            "value": float(self.value),
            "threshold": float(self.threshold),
            "margin": float(self.margin),
            "detail": self.detail,
        }


@dataclass(frozen=True)
class ScenarioReport:
    scenario: str
    passed: bool
    results: Tuple[EnvelopeResult, ...]

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "passed": bool(self.passed),
            "envelopes": [r.to_dict() for r in self.results],
        }


def _window_mask(t: np.ndarray, t0: float, t1: Optional[float]) -> np.ndarray:
    hi = t1 if t1 is not None else math.inf
    return (t >= t0 - _GRID_TOL) & (t <= hi + _GRID_TOL)


def _eval_envelope(env: Envelope, trace: Trace, log_period: float) -> EnvelopeResult:
    t = trace.t
    sig = trace.signal(env.signal)
    mask = _window_mask(t, env.t0, env.t1)
    if not mask.any():
        return EnvelopeResult(env.name, env.kind, env.signal, False,
                              math.nan, math.nan, -math.inf, "empty window")

    if env.kind == "max_abs":
        v = float(np.abs(sig[mask]).max())
        return EnvelopeResult(env.name, env.kind, env.signal, v <= env.bound,
                              v, env.bound, env.bound - v)

    if env.kind == "tracks_steps":
        ref = trace.signal(env.ref_signal)
        changes = np.nonzero(np.diff(ref))[0] + 1
        bounds = [0] + list(changes) + [len(t)]
        worst, worst_seg = 0.0, 0
        for k in range(len(bounds) - 1):
            a, b = bounds[k], bounds[k + 1]
            seg_end = t[b - 1]
            dmask = (t >= seg_end - env.dwell + _GRID_TOL) & (t <= seg_end + _GRID_TOL)
            dmask[:a] = False
            dmask[b:] = False
            err = float(np.abs(sig[dmask] - ref[dmask]).max())
            if err > worst:
                worst, worst_seg = err, k
        detail = f"{len(bounds) - 1} segments, worst in segment {worst_seg}"
        return EnvelopeResult(env.name, env.kind, env.signal, worst <= env.tol,
                              worst, env.tol, env.tol - worst, detail)

    if env.kind == "settle_within":
        ref = trace.signal(env.ref_signal)
        idx = np.nonzero(mask)[0]
        center = float(ref[idx[-1]])
        dev = np.abs(sig[idx] - center)
        peak = float(dev.max())
        if peak == 0.0:
            settle = 0.0
        else:
            above = np.nonzero(dev > env.frac * peak)[0]
            if above.size == 0:
                settle = 0.0
            elif above[-1] == len(idx) - 1:
                settle = float(t[idx[-1]] - env.t0 + log_period)  # never re-enters
            else:
                settle = float(t[idx[above[-1]]] + log_period - env.t0)
        passed = env.settle_min <= settle <= env.settle_max
        margin = min(settle - env.settle_min, env.settle_max - settle)
        detail = f"peak deviation {peak:.4g}, band {env.frac * peak:.4g}"
        return EnvelopeResult(env.name, env.kind, env.signal, passed,
                              settle, env.settle_max, margin, detail)

    if env.kind == "final_band":
        m = float(sig[mask].mean())
        tol = env.tol if env.tol is not None else env.frac * abs(env.target)
        v = abs(m - env.target)
        return EnvelopeResult(env.name, env.kind, env.signal, v <= tol,
                              v, tol, tol - v, f"mean {m:.6g} vs target {env.target:.6g}")

    if env.kind == "final_min":
        m = float(sig[mask].mean())
        return EnvelopeResult(env.name, env.kind, env.signal, m >= env.bound,
                              m, env.bound, m - env.bound)

    if env.kind == "peak_ratio":
        bmask = _window_mask(t, env.base0, env.base1)
        base = float(sig[bmask].mean()) if bmask.any() else 0.0
        if base <= 0.0:
            return EnvelopeResult(env.name, env.kind, env.signal, False,
                                  math.nan, env.bound, -math.inf, "non-positive baseline")
        ratio = float(sig[mask].max()) / base
        return EnvelopeResult(env.name, env.kind, env.signal, ratio >= env.bound,
                              ratio, env.bound, ratio - env.bound,
                              f"baseline {base:.4g}")

    if env.kind == "return_band":
        bmask = _window_mask(t, env.base0, env.base1)
        base = float(sig[bmask].mean()) if bmask.any() else 0.0
        if base <= 0.0:
            return EnvelopeResult(env.name, env.kind, env.signal, False,
                                  math.nan, env.frac, -math.inf, "non-positive baseline")
        v = abs(float(sig[mask].mean()) - base) / base
        return EnvelopeResult(env.name, env.kind, env.signal, v <= env.frac,
                              v, env.frac, env.frac - v, f"baseline {base:.4g}")

    raise ValueError(f"unknown envelope kind {env.kind!r}")


def evaluate_envelopes(spec: ScenarioSpec, trace: Trace,
                       log_period: Optional[float] = None) -> ScenarioReport:
    """Evaluate every envelope of the scenario against a logged trace.

    Pure function of the trace: running it on a re-read exported file gives
    the same report.
    """
    if log_period is None:
        t = trace.t
        log_period = float(t[1] - t[0]) if len(trace) > 1 else 0.0
    results = tuple(_eval_envelope(env, trace, log_period) for env in spec.envelopes)
    return ScenarioReport(
        scenario=spec.name,
        passed=all(r.passed for r in results),
        results=results,
    )


# ---------------------------------------------------------------------------
# Scenario execution


@dataclass(frozen=True)
class RunResult:
    spec: ScenarioSpec
    config: SimConfig
    gain: LqrGain
    trace: Trace
    report: ScenarioReport
    events_applied: Dict[str, int]


def _grid_index(t: float, period: float, label: str) -> int:
    k = int(round(t / period))
    if abs(t - k * period) > _GRID_TOL:
        raise ValueError(f"{label}: {t!r} is not a multiple of {period!r}")
    return k


def _allocate_saturated(cfg: MuscleConfig, tau_ref, tau_fallback, warm_start):
    """Tension allocation with torque-demand saturation.

    A violent contact can ask for more joint torque than the tension box can
    produce. Rather than fault, shrink the demand toward the gravity-holding
    torque (always realizable) until it fits; the closed loop then simply
    does the best the muscles can.
    """
    try:
        return allocate_tensions(cfg, tau_ref, warm_start=warm_start)
    except QpInfeasibleError:
        pass
    lo, hi = 0.0, 1.0
    best = allocate_tensions(cfg, tau_fallback, warm_start=warm_start)
    for _ in range(20):
        mid = 0.5 * (lo + hi)
        tau_try = tuple(f + mid * (r - f) for f, r in zip(tau_fallback, tau_ref))
        try:
            best = allocate_tensions(cfg, tau_try, warm_start=warm_start)
            lo = mid
        except QpInfeasibleError:
            hi = mid
    return best


class _DeskBody:
    """Sliding desk: one-sided bumper contact, Coulomb friction on the floor."""

    def __init__(self, params, g: float):
        self.p = params
        self.x = params.start_gap  # desk face position; bumper starts at 0
        self.v = 0.0
        self.f_slide = params.friction_mu * params.mass * g

    def contact_force(self, bumper_x: float, bumper_v: float) -> float:
        pen = bumper_x - self.x
        if pen <= 0.0:
            return 0.0
        f = self.p.contact_stiffness * pen + self.p.contact_damping * (bumper_v - self.v)
        return max(f, 0.0)

    def step(self, f_contact: float, dt: float) -> None:
        if self.v == 0.0:
            if f_contact <= self.f_slide:
                return
            acc = (f_contact - self.f_slide) / self.p.mass
        else:
            acc = (f_contact - math.copysign(self.f_slide, self.v)) / self.p.mass
        v_new = self.v + acc * dt
        if self.v != 0.0 and (v_new * self.v) < 0.0:
            v_new = 0.0  # friction stops it inside the step
        self.v = v_new
        self.x += self.v * dt


def _hand_world(p: PlantParams, s: PendulumState, hx: float, hz: float,
                cth: float, sth: float) -> Tuple[float, float]:
    base_x = p.r_w * (s.theta + s.phi)
    x = base_x + hx * cth + hz * sth
    z = p.r_w + hz * cth - hx * sth
    return x, z


def run_scenario(spec: ScenarioSpec, config: Optional[SimConfig] = None,
                 seed: Optional[int] = None) -> RunResult:
    """Execute one scenario and evaluate its envelopes.

    Raises ValueError for scenario/config combinations that are invalid
    (off-grid event times, unknown envelope signals, bad override paths)
    and IntegrationBlowUpError if the plant state leaves the finite range.
    """
    cfg = config if config is not None else SimConfig()
    if spec.overrides:
        cfg = apply_overrides(cfg, dict(spec.overrides))

    p = cfg.plant
    dt = cfg.dt
    period = cfg.control_period
    n_steps = _grid_index(spec.duration, dt, "duration")
    columns = trace_columns(cfg)

    # Fail fast on anything the loop would only trip over later.
    cmd_events = [(_grid_index(c.t, period, f"commands[{i}].t"), c)
                  for i, c in enumerate(spec.commands)]
    pose_events = []
    for i, ev in enumerate(spec.arm_poses):
        if len(ev.xi) != cfg.arm.n_joints:
            raise ValueError(f"arm_poses[{i}].xi: expected {cfg.arm.n_joints} joints")
        pose_events.append((_grid_index(ev.t, period, f"arm_poses[{i}].t"), ev))
    pulses = []
    walls = []
    for i, d in enumerate(spec.disturbances):
        if d.kind == "wall-contact":
            walls.append(d)
        else:
            i0 = _grid_index(d.window[0], dt, f"disturbances[{i}].window[0]")
            i1 = _grid_index(d.window[1], dt, f"disturbances[{i}].window[1]")
            pulses.append((i0, i1, d))
    probe = Trace(columns=columns, data=np.zeros((1, len(columns))))
    for env in spec.envelopes:
        for name in (env.signal, env.ref_signal):
            if name is not None and not probe.has_signal(name):
                raise ValueError(f"envelope {env.name!r}: unknown signal {name!r}")
    for c in spec.output_channels:
        if c not in columns:
            raise ValueError(f"output_channels: unknown trace column {c!r}")

    gain = solve_care(build_linear_model(p), cfg.weights)

    rng = None
    if cfg.sensor_noise_std > 0.0 or cfg.encoder_quantum > 0.0:
        rng = np.random.default_rng(0 if seed is None else seed)

    n_joints = cfg.arm.n_joints
    left = ElasticArm(cfg.muscle, cfg.arm, g=p.g)
    right = ElasticArm(cfg.muscle, cfg.arm, g=p.g)
    arms = (left, right)
    kj = [float(v) for v in cfg.muscle.K_j]
    xi_target = [0.0] * n_joints
    xi_ref = [0.0] * n_joints
    # last (tau_ref, xi_ref, T_ref) per arm; reused while the demand is flat
    alloc_cache: List[Optional[tuple]] = [None, None]

    desk = _DeskBody(spec.desk, p.g) if spec.desk is not None else None

    s = PendulumState()
    cmd = CommandSetpoint()
    theta_ref = 0.0
    u_l = u_r = 0.0
    ci = pi = 0
    counts = {"commands": 0, "arm_poses": 0}
    rows = np.zeros(((n_steps + cfg.log_every - 1) // cfg.log_every, len(columns)))
    n_logged = 0
    posed = cfg.arm

    for i in range(n_steps):
        t = i * dt

        if i % cfg.control_every == 0:
            tick = i // cfg.control_every
            while ci < len(cmd_events) and cmd_events[ci][0] == tick:
                ev = cmd_events[ci][1]
                cmd = CommandSetpoint(
                    phi_ref=ev.phi_ref if ev.phi_ref is not None else cmd.phi_ref,
                    psi_ref=ev.psi_ref if ev.psi_ref is not None else cmd.psi_ref,
                    timestamp=t,
                )
                ci += 1
                counts["commands"] += 1
            while pi < len(pose_events) and pose_events[pi][0] == tick:
                xi_target = list(pose_events[pi][1].xi)
                pi += 1
                counts["arm_poses"] += 1

            meas = _measure(s, cfg, rng)
            u_l, u_r, theta_ref = run_controller_tick(
                gain, cfg.yaw, cfg.adaptation, meas, cmd, theta_ref, period, cfg.u_max)

            if n_joints:
                cap = cfg.arm_slew * period
                for j in range(n_joints):
                    d = xi_target[j] - xi_ref[j]
                    xi_ref[j] += min(max(d, -cap), cap)
                for a_idx, arm in enumerate(arms):
                    tau_g = gravity_compensation(cfg.arm, arm.xi, p.g)
                    tau_ref = tuple(kj[j] * (xi_ref[j] - arm.xi[j]) + tau_g[j]
                                    for j in range(n_joints))
                    cached = alloc_cache[a_idx]
                    if (cached is not None and cached[1] == tuple(xi_ref)
                            and max(abs(tau_ref[j] - cached[0][j])
                                    for j in range(n_joints)) <= 1e-9):
                        pass  # demand unchanged: keep the wound lengths
                    else:
                        warm = cached[2] if cached is not None else None
                        sol = _allocate_saturated(cfg.muscle, tau_ref, tuple(tau_g), warm)
                        l_tgt = cfg.muscle.l0 + cfg.muscle.G @ np.asarray(xi_ref) \
                            + sol.T_ref / cfg.muscle.k_e
                        arm.command(l_tgt, sol.T_ref)
                        alloc_cache[a_idx] = (tau_ref, tuple(xi_ref), sol.T_ref)

        posed = cfg.arm.with_pose(tuple(left.xi), tuple(right.xi))

        if i % cfg.log_every == 0:
            dl_x, dl_z, _ = com_offset(p, posed)
            row = rows[n_logged]
            row[0] = (i // cfg.log_every) * cfg.log_period
            row[1:7] = (s.theta, s.phi, s.psi, s.theta_dot, s.phi_dot, s.psi_dot)
            row[7:12] = (theta_ref, cmd.phi_ref, cmd.psi_ref, u_l, u_r)
            k = 12
            for arm in arms:
                for v in arm.T:
                    row[k] = v
                    k += 1
            for arm in arms:
                for v in arm.xi:
                    row[k] = v
                    k += 1
            row[k] = dl_x
            row[k + 1] = dl_z
            n_logged += 1

        # Contact and disturbance forces from the current state.
        forces = []
        hand_force = [0.0, 0.0]
        cth = math.cos(s.theta)
        sth = math.sin(s.theta)
        for (i0, i1, d) in pulses:
            if i0 <= i < i1:
                F = d.direction * d.magnitude
                if d.at_hand and n_joints:
                    for a_idx, arm in enumerate(arms):
                        hx, hz = posed.hand_position(arm.xi)
                        _, zw = _hand_world(p, s, hx, hz, cth, sth)
                        forces.append((F / 2.0, zw))
                        hand_force[a_idx] += F / 2.0
                else:
                    forces.append((F, d.application_height))
        for d in walls:
            if not (d.window[0] <= t <= d.window[1]):
                continue
            base_v = p.r_w * (s.theta_dot + s.phi_dot)
            for a_idx, arm in enumerate(arms):
                hx, hz = posed.hand_position(arm.xi)
                xw, zw = _hand_world(p, s, hx, hz, cth, sth)
                pen = xw - d.wall_position
                if pen <= 0.0:
                    continue
                jac = posed.hand_jacobian_x(arm.xi)
                vx = base_v + s.theta_dot * (hz * cth - hx * sth) \
                    + cth * sum(jac[j] * arm.xi_dot[j] for j in range(n_joints))
                F = -(d.wall_stiffness * pen + d.wall_damping * vx)
                F = min(F, 0.0)  # wall only pushes back
                if F != 0.0:
                    forces.append((F, zw))
                    hand_force[a_idx] += F
        if desk is not None:
            dp = spec.desk
            lever = dp.contact_height - p.r_w
            bumper_x = p.r_w * (s.theta + s.phi) + lever * sth
            bumper_v = p.r_w * (s.theta_dot + s.phi_dot) + lever * cth * s.theta_dot
            f_c = desk.contact_force(bumper_x, bumper_v)
            if f_c > 0.0:
                forces.append((-f_c, dp.contact_height))
            desk.step(f_c, dt)

        for a_idx, arm in enumerate(arms):
            arm.step(dt, hand_force_x=hand_force[a_idx], pitch=s.theta)
        s = step_nonlinear(p, posed, s, u_l, u_r, None, dt,
                           extra_forces=forces, t=t)

    if counts["commands"] != len(spec.commands) or counts["arm_poses"] != len(spec.arm_poses):
        raise RuntimeError(
            f"event accounting failed: applied {counts}, "
            f"expected {len(spec.commands)} commands, {len(spec.arm_poses)} arm poses")

    trace = Trace(columns=columns, data=rows[:n_logged])
    report = evaluate_envelopes(spec, trace, cfg.log_period)
    return RunResult(spec=spec, config=cfg, gain=gain, trace=trace,
                     report=report, events_applied=dict(counts))


def _measure(s: PendulumState, cfg: SimConfig, rng) -> PendulumState:
    if rng is None:
        return s
    vals = [s.theta, s.phi, s.psi, s.theta_dot, s.phi_dot, s.psi_dot]
    if cfg.sensor_noise_std > 0.0:
        noise = rng.normal(0.0, cfg.sensor_noise_std, 6)
        vals = [v + n for v, n in zip(vals, noise)]
    if cfg.encoder_quantum > 0.0:
        q = cfg.encoder_quantum
        vals[:3] = [round(v / q) * q for v in vals[:3]]
    return PendulumState(theta=vals[0], phi=vals[1], psi=vals[2],
                         theta_dot=vals[3], phi_dot=vals[4], psi_dot=vals[5])
