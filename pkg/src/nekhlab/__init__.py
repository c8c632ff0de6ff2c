"""Numerical lab for long-time action stability in near-integrable flows."""

from .hamcore import (
    Envelope,
    IntegrableH,
    MechanicalSystem,
    Mode,
    MultiPoly,
    Perturbation,
    PolynomialH,
    PowerLaw,
    QuadraticForm,
    SlowSystem,
    State,
    angle_distance,
    mechanical_from_dict,
    mechanical_to_dict,
    reduce_angles,
    stream_rng,
    system_dumps,
    system_from_dict,
    system_loads,
    system_to_dict,
)
from .autonomize import (
    AutonomizeCheck,
    ExtendedState,
    ExtendedSystem,
    autonomize_periodic,
    autonomize_quasiperiodic,
    autonomize_slow,
    diophantine_estimate,
    diophantine_scan,
    extend_state,
    verify_autonomization,
)
from .integrators import (
    ConvergenceError,
    StepperSpec,
    Trajectory,
    hamiltonian_series,
    integrate,
    step_implicit_midpoint,
    step_splitting,
    trajectory_to_binary,
    trajectory_to_csv,
    yoshida_gammas,
)
from .steepness import (
    CurveCheck,
    CurveSample,
    SteepnessRecord,
    SteepnessReport,
    SubspaceSample,
    check_curve,
    check_steepness,
    curve_to_csv,
    default_constants,
    project_gradient,
)
from .experiments import (
    DriftRecord,
    ExponentFit,
    HorizonRule,
    ScalingCheck,
    ScalingMap,
    ScanFamily,
    StabilityResult,
    Theorem2Result,
    drift_records_to_csv,
    drift_scan,
    fit_exponent,
    measure_drift,
    predicted_exponents,
    scale_mechanical,
    stability_time,
    theorem2_experiment,
    theorem2_to_csv,
    verify_scaling_conjugacy,
)
from .svgplot import emit_plot

__version__ = "0.1.0"
