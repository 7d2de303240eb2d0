"""CRAB and dressed-CRAB quantum optimal control for small spin systems."""

from .engine import (
    CrabConfig,
    OptimizationRecord,
    effort_metric,
    objective_value,
    run_crab,
    run_dcrab,
    save_record,
)
from .harness import (
    ExperimentConfig,
    SweepRow,
    SweepTable,
    bandwidth_bound,
    emit_csv,
    emit_plot,
    generate_basis_transfer_instance,
    generate_instance,
    read_csv,
    run_single,
    run_sweep,
)
from .landscape import (
    AdjointTrajectory,
    LinearDependenceError,
    PerturbativeRegimeError,
    TangentUpdateSet,
    adjoint_trajectory,
    directional_derivative,
    gradient_kernel,
    gram_schmidt,
    state_updates,
    tangent_rank,
)
from .pulses import (
    BasisFunction,
    DressedPulse,
    SuperIteration,
    clip,
    dress,
    load_pulse,
    max_abs,
    sample_basis,
    save_pulse,
)
from .quantum import (
    SpinProblem,
    build_hamiltonians,
    default_steps,
    fidelity,
    midpoint_grid,
    propagate,
    random_state,
)
from .simplex import MinimizeResult, SimplexConfig, minimize

__version__ = "0.1.0"

__all__ = [
    "AdjointTrajectory",
    "BasisFunction",
    "CrabConfig",
    "DressedPulse",
    "ExperimentConfig",
    "LinearDependenceError",
    "MinimizeResult",
    "OptimizationRecord",
    "PerturbativeRegimeError",
    "SimplexConfig",
    "SpinProblem",
    "SuperIteration",
    "SweepRow",
    "SweepTable",
    "TangentUpdateSet",
    "adjoint_trajectory",
    "bandwidth_bound",
    "build_hamiltonians",
    "clip",
    "default_steps",
    "directional_derivative",
    "dress",
    "effort_metric",
    "emit_csv",
    "emit_plot",
    "fidelity",
    "generate_basis_transfer_instance",
    "generate_instance",
    "gradient_kernel",
    "gram_schmidt",
    "load_pulse",
    "max_abs",
    "midpoint_grid",
    "minimize",
    "objective_value",
    "propagate",
    "random_state",
    "read_csv",
    "run_crab",
    "run_dcrab",
    "run_single",
    "run_sweep",
    "sample_basis",
    "save_pulse",
    "save_record",
    "state_updates",
    "tangent_rank",
]
