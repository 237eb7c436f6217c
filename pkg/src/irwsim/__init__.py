"""Simulation and integrated control of rail running gears with driven
independently rotating wheels: track geometry with preview, a reduced
Lagrangian control model, a contact-level plant, adhesion-seeking traction
control, predictive lateral guidance and a scenario harness."""

from .adhesion import (
    AdhesionConfig,
    AdhesionController,
    AdhesionCtrlState,
    adhesion_step,
    force_to_adhesion_setpoint,
    switching_function,
)
from .harness import (
    RunResult,
    ScenarioSpec,
    SignalSpec,
    TimingReport,
    bench_solvers,
    estimate_lag,
    metric_rmse,
    run_scenario,
    tune_pso,
)
from .integration import RateConfig, RateScheduler, TorqueLimits, integrate
from .model import (
    ControlInput,
    DependentGeometry,
    GearState,
    ModelTheta,
    VehicleParams,
    continuous_dynamics,
    dependent_geometry,
    discrete_step,
    generalized_forces,
    linearize,
    wheel_speeds,
)
from .mpc import (
    MpcConfig,
    MpcSolution,
    PreviewInputs,
    cost_eval,
    desired_sequence,
    solve_ltv_mpc,
    solve_nmpc,
)
from .plant import (
    ADHESION_PRESETS,
    AdhesionCurveParams,
    AdhesionSchedule,
    GOOD_ADHESION,
    Measurements,
    PlantState,
    POOR_ADHESION,
    adhesion_curve,
    initial_plant_state,
    measure,
    plant_step,
    slip,
)
from .track import (
    TrackGeometry,
    TrackSample,
    TrackSpec,
    build_track,
    car_body_yaw,
    frame_rotations,
    sample,
    standard_track_spec,
    superelevation_from_design,
)

__all__ = [
    "AdhesionConfig", "AdhesionController", "AdhesionCtrlState",
    "adhesion_step", "force_to_adhesion_setpoint", "switching_function",
    "RunResult", "ScenarioSpec", "SignalSpec", "TimingReport",
    "bench_solvers", "estimate_lag", "metric_rmse", "run_scenario",
    "tune_pso",
    "RateConfig", "RateScheduler", "TorqueLimits", "integrate",
    "ControlInput", "DependentGeometry", "GearState", "ModelTheta",
    "VehicleParams", "continuous_dynamics", "dependent_geometry",
    "discrete_step", "generalized_forces", "linearize", "wheel_speeds",
    "MpcConfig", "MpcSolution", "PreviewInputs", "cost_eval",
    "desired_sequence", "solve_ltv_mpc", "solve_nmpc",
    "ADHESION_PRESETS", "AdhesionCurveParams", "AdhesionSchedule",
    "GOOD_ADHESION", "Measurements", "PlantState", "POOR_ADHESION",
    "adhesion_curve", "initial_plant_state", "measure", "plant_step",
    "slip",
    "TrackGeometry", "TrackSample", "TrackSpec", "build_track",
    "car_body_yaw", "frame_rotations", "sample", "standard_track_spec",
    "superelevation_from_design",
]
