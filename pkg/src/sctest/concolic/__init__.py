"""Concolic execution: lockstep shadow interpretation, path constraints,
a built-in word-level solver with concretization fallbacks, and a
coverage-guided branch-flipping driver."""

from .concretize import (
    NoSymbolicInput,
    concretize_keccak,
    concretize_nonlinear,
    substitute_all_but,
)
from .drive import ConcolicState, DriveBudget, drive
from .shadow import (
    ArgLayout,
    ShadowRun,
    SnapshotCache,
    concretize_loop,
    repin_args,
    shadow_run,
    snapshot_of,
    sym_execute,
)
from .solve import (
    Sat,
    SolverResult,
    SolverSoundness,
    Unknown,
    Unsat,
    conjunction_digest,
    export_smt,
    solve,
    to_smt,
)
from .symexpr import (
    Binop,
    Const,
    Input,
    Keccak,
    PathConstraint,
    Sload,
    SymExpr,
    Unop,
    evaluate,
    evaluate_atoms,
    format_expr,
    inputs_of,
    simplify,
    substitute,
)

__all__ = [
    "ArgLayout",
    "Binop",
    "ConcolicState",
    "Const",
    "DriveBudget",
    "Input",
    "Keccak",
    "NoSymbolicInput",
    "PathConstraint",
    "Sat",
    "ShadowRun",
    "Sload",
    "SnapshotCache",
    "SolverResult",
    "SolverSoundness",
    "SymExpr",
    "Unknown",
    "Unop",
    "Unsat",
    "concretize_keccak",
    "concretize_loop",
    "concretize_nonlinear",
    "conjunction_digest",
    "drive",
    "evaluate",
    "evaluate_atoms",
    "export_smt",
    "format_expr",
    "inputs_of",
    "repin_args",
    "shadow_run",
    "simplify",
    "snapshot_of",
    "solve",
    "substitute",
    "substitute_all_but",
    "sym_execute",
    "to_smt",
]
