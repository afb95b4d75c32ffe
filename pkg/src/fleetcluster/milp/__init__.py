from .audit import FamilyResidual, audit_residuals, flagged_families
from .elastic import diagnose, elastic_copy
from .export import Export, export_model
from .model import (
    BINARY,
    CONTINUOUS,
    EQ,
    GE,
    INTEGER,
    LE,
    LinExpr,
    ModelInstance,
    Var,
    as_expr,
    family_of,
    lin_sum,
    value_of,
)
from .solve import (
    AUDIT_FAILED,
    GAP_FEASIBLE,
    INFEASIBLE,
    OPTIMAL,
    TIME_LIMIT,
    UNBOUNDED,
    SolveConfig,
    SolveResult,
    available_backends,
    solve_mps_file,
    solve_model,
)


def count_variables(instance: ModelInstance) -> dict[str, int]:
    return instance.count_variables()
