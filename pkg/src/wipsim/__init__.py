"""Two-wheel inverted pendulum simulator with tendon-driven arms.

Core layers:

- plant: nonlinear pitch/translation/yaw dynamics and the linearized
  descriptor model, arm-pose center-of-mass bookkeeping.
- riccati: continuous algebraic Riccati solver and LQR gain synthesis.
- balance: wheel torque split, heading control, pitch-reference adaptation.
- qp / muscle: box-constrained tension allocation and the elastic tendon
  arm used in simulation.
- scenarios / runner: scripted experiments, closed-loop execution, trace
  logging and envelope reports.
- service / cli: HTTP API wrapping the library and its command-line client.
"""

from .plant import (
    ArmModel,
    Disturbance,
    IntegrationBlowUpError,
    LinearModel,
    PendulumState,
    PlantParams,
    SingularPlantError,
    build_linear_model,
    com_offset,
    effective_pitch_coeffs,
    linearize_numerically,
    mechanical_energy,
    step_nonlinear,
)
from .riccati import (
    CareDivergenceError,
    LqrGain,
    LqrWeights,
    NotStabilizableError,
    care_residual,
    control_torque,
    solve_care,
    stabilizing_solution,
)
from .balance import (
    DEFAULT_WHEEL_TORQUE_LIMIT,
    AdaptationConfig,
    CommandSetpoint,
    YawGain,
    adapt_theta_ref,
    run_controller_tick,
    wheel_torques,
)
from .qp import QpInfeasibleError, QpSolution, solve_box_qp
from .muscle import (
    ArmState,
    ElasticArm,
    MuscleConfig,
    TensionSolution,
    allocate_tensions,
    default_muscle_config,
    gravity_compensation,
    make_gravity_model,
    reference_torque,
    target_muscle_lengths,
)
from .scenarios import (
    DeskParams,
    Envelope,
    ScenarioSpec,
    TimedArmPose,
    TimedCommand,
    builtin_scenarios,
    scenario_by_name,
)
from .runner import (
    EnvelopeResult,
    RunResult,
    ScenarioReport,
    SimConfig,
    Trace,
    apply_overrides,
    evaluate_envelopes,
    export_trace,
    read_trace,
    run_scenario,
    trace_columns,
)

__version__ = "0.1.0"

__all__ = [
    "ArmModel", "Disturbance", "IntegrationBlowUpError", "LinearModel",
    "PendulumState", "PlantParams", "SingularPlantError", "build_linear_model",
    "com_offset", "effective_pitch_coeffs", "linearize_numerically",
    "mechanical_energy", "step_nonlinear",
    "CareDivergenceError", "LqrGain", "LqrWeights", "NotStabilizableError",
    "care_residual", "control_torque", "solve_care", "stabilizing_solution",
    "DEFAULT_WHEEL_TORQUE_LIMIT", "AdaptationConfig", "CommandSetpoint",
    "YawGain", "adapt_theta_ref", "run_controller_tick", "wheel_torques",
    "QpInfeasibleError", "QpSolution", "solve_box_qp",
    "ArmState", "ElasticArm", "MuscleConfig", "TensionSolution",
    "allocate_tensions", "default_muscle_config", "gravity_compensation",
    "make_gravity_model", "reference_torque", "target_muscle_lengths",
    "DeskParams", "Envelope", "ScenarioSpec", "TimedArmPose", "TimedCommand",
    "builtin_scenarios", "scenario_by_name",
    "EnvelopeResult", "RunResult", "ScenarioReport", "SimConfig", "Trace",
    "apply_overrides", "evaluate_envelopes", "export_trace", "read_trace",
    "run_scenario", "trace_columns",
    "__version__",
]
