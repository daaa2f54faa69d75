"""Feedback optimization of plant steady states under constraints.

A discrete-time controller that drives a plant's steady state to a
first-order optimal point of a constrained problem using only output
measurements and steady-state sensitivities: each step projects the scaled
negative reduced gradient onto a linearization of the feasible set and
applies it as an input update.  The package bundles the projection
subproblem solver, descent certificates with an explicit step-size bound, a
primal-dual baseline for comparison, tangent-cone limit diagnostics, and a
deterministic simulation harness with CSV logging.
"""

from .model import (
    DEFAULT_ACTIVE_TOL,
    MetricField,
    ObjectiveSpec,
    PlantModel,
    Polyhedron,
    ProblemSpec,
    active_set,
    eval_plant,
    eval_plant_jacobian,
    reduced_cost,
    reduced_gradient,
    violation,
)
from .qp import (
    Infeasible,
    MaxIterations,
    NotPositiveDefinite,
    QpProblem,
    QpSolution,
    RankDeficientActiveSet,
    enumerate_oracle,
    kkt_residual,
    solve_qp,
)
from .controller import (
    ControllerStep,
    LicqReport,
    LinearizedSetEmpty,
    assemble_projection_qp,
    check_licq,
    controller_step,
    feedback_step,
    kkt_point_residual,
    stationarity_residual,
)
from .certificates import (
    CertificateConstants,
    SamplerSpec,
    certified_step_size,
    estimate_constants,
    estimate_lipschitz_constants,
    estimate_multiplier_bound,
    lyapunov_value,
    sample_input_set,
    transient_violation_bound,
)
from .saddle import (
    SaddlePointState,
    augmented_lagrangian,
    augmented_lagrangian_gradients,
    project_polyhedron,
    saddle_point_step,
    saddle_residual,
)
from .tangent import (
    NotFeasible,
    TangentCone,
    finite_step_projection_qp,
    limit_consistency,
    project_tangent_cone,
    tangent_cone,
)
from .problems import builtin_example, get_problem, problem_names, register_problem
from .harness import (
    FiniteDifferenceReport,
    GridSpec,
    RunStatus,
    ScenarioConfig,
    TrajectoryLog,
    finite_difference_check,
    input_grid,
    load_scenario,
    read_csv,
    run_trajectory,
    sweep,
    write_csv,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_ACTIVE_TOL",
    "MetricField",
    "ObjectiveSpec",
    "PlantModel",
    "Polyhedron",
    "ProblemSpec",
    "active_set",
    "eval_plant",
    "eval_plant_jacobian",
    "reduced_cost",
    "reduced_gradient",
    "violation",
    "Infeasible",
    "MaxIterations",
    "NotPositiveDefinite",
    "QpProblem",
    "QpSolution",
    "RankDeficientActiveSet",
    "enumerate_oracle",
    "kkt_residual",
    "solve_qp",
    "ControllerStep",
    "LicqReport",
    "LinearizedSetEmpty",
    "assemble_projection_qp",
    "check_licq",
    "controller_step",
    "feedback_step",
    "kkt_point_residual",
    "stationarity_residual",
    "CertificateConstants",
    "SamplerSpec",
    "certified_step_size",
    "estimate_constants",
    "estimate_lipschitz_constants",
    "estimate_multiplier_bound",
    "lyapunov_value",
    "sample_input_set",
    "transient_violation_bound",
    "SaddlePointState",
    "augmented_lagrangian",
    "augmented_lagrangian_gradients",
    "project_polyhedron",
    "saddle_point_step",
    "saddle_residual",
    "NotFeasible",
    "TangentCone",
    "finite_step_projection_qp",
    "limit_consistency",
    "project_tangent_cone",
    "tangent_cone",
    "builtin_example",
    "get_problem",
    "problem_names",
    "register_problem",
    "FiniteDifferenceReport",
    "GridSpec",
    "RunStatus",
    "ScenarioConfig",
    "TrajectoryLog",
    "finite_difference_check",
    "input_grid",
    "load_scenario",
    "read_csv",
    "run_trajectory",
    "sweep",
    "write_csv",
    "__version__",
]
