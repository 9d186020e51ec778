"""Shallow-water solver on triangular meshes, its partitioned twin, and scaling runs."""

from .distributed import (
    HALO_DTYPE,
    HALO_TAG,
    DistributedSolver,
    HaloFault,
    HaloMismatchError,
    configure_halo_buffers,
    pack_halo,
    post_halo_exchange,
    run_distributed,
    step_distributed,
)
from .scaling import (
    SCALING_COLUMNS,
    STRONG_ELEMENTS,
    WEAK_ELEMENTS_PER_PARTITION,
    PointResult,
    ScalingKind,
    ScalingRow,
    evaluate_point,
    rect_dims,
    run_scaling_experiment,
    strong_mesh,
    weak_mesh,
    write_scaling_csv,
    write_snapshot_csv,
)
from .solver import (
    CFLError,
    ElementState,
    LocalProblem,
    ReferenceSolver,
    SolverConfig,
    SolverError,
    advance_local,
    bump_state,
    cfl_number,
    check_cfl,
    check_state,
    dam_break_state,
    stable_dt,
    step_reference,
)
from .timing import (
    PipelineConfig,
    StepTiming,
    TimingSummary,
    model_comm_latency,
    model_params,
    partition_timing,
    simulate_timing,
    summarize,
)

__all__ = [
    "HALO_DTYPE", "HALO_TAG", "DistributedSolver", "HaloFault", "HaloMismatchError",
    "configure_halo_buffers", "pack_halo", "post_halo_exchange", "run_distributed",
    "step_distributed", "SCALING_COLUMNS", "STRONG_ELEMENTS", "WEAK_ELEMENTS_PER_PARTITION",
    "PointResult", "ScalingKind", "ScalingRow", "evaluate_point", "rect_dims",
    "run_scaling_experiment", "strong_mesh", "weak_mesh", "write_scaling_csv",
    "write_snapshot_csv", "CFLError", "ElementState", "LocalProblem", "ReferenceSolver",
    "SolverConfig", "SolverError", "advance_local", "bump_state", "cfl_number", "check_cfl",
    "check_state", "dam_break_state", "stable_dt", "step_reference", "PipelineConfig",
    "StepTiming", "TimingSummary", "model_comm_latency", "model_params", "partition_timing",
    "simulate_timing", "summarize",
]
