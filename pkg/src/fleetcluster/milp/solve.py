"""Backend wiring: HiGHS (via ``highspy``) is the reference, ``scipy.optimize.milp``
the fallback, and any MPS file can be solved through the file route."""

from __future__ import annotations

import json
import logging
import math
import tempfile
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..errors import BackendUnavailable, Infeasible
from .model import ModelInstance, StandardForm

log = logging.getLogger("fleetcluster.solve")

OPTIMAL = "optimal"
GAP_FEASIBLE = "gap-feasible"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
TIME_LIMIT = "time-limit"
AUDIT_FAILED = "audit-failed"
FEASIBLE_STATUSES = (OPTIMAL, GAP_FEASIBLE, TIME_LIMIT)


@dataclass
class SolveConfig:
    mip_gap: float = 0.005
    time_limit: float = 600.0
    integrality_tol: float = 1e-6
    feasibility_tol: float = 1e-7
    threads: int = 1
    backend: str = "highs"
    polish: bool = True
    diagnose_infeasible: bool = False
    raise_on_infeasible: bool = False

    def __post_init__(self):
        if self.mip_gap < 0:
            raise ValueError("mip_gap must be >= 0")
        if self.integrality_tol <= 0 or self.feasibility_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if self.time_limit <= 0:
            raise ValueError("time_limit must be > 0")


@dataclass
class SolveResult:
    status: str
    objective: float = math.nan
    bound: float = math.nan
    gap: float = math.nan
    x: np.ndarray | None = None
    wall_seconds: float = 0.0
    backend: str = ""
    hint: dict = field(default_factory=dict)

    @property
    def has_solution(self) -> bool:
        return self.x is not None and self.status in FEASIBLE_STATUSES + (AUDIT_FAILED,)


def available_backends() -> list[str]:
    out = []
    try:
        import highspy  # noqa: F401

        out.append("highs")
    except ImportError:
        pass
    out.append("scipy")
    return out


def rel_gap(obj: float, bound: float) -> float:
    if not (math.isfinite(obj) and math.isfinite(bound)):
        return math.inf
    return abs(obj - bound) / max(abs(obj), 1e-10) if abs(obj - bound) > 1e-12 else 0.0


# --------------------------------------------------------------------- HiGHS
def _highs_options(h, cfg: SolveConfig) -> None:
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", float(cfg.mip_gap))
    h.setOptionValue("mip_abs_gap", 1e-9)
    h.setOptionValue("time_limit", float(cfg.time_limit))
    h.setOptionValue("mip_feasibility_tolerance", float(cfg.integrality_tol))
    h.setOptionValue("primal_feasibility_tolerance", float(cfg.feasibility_tol))
    h.setOptionValue("threads", int(cfg.threads))
    h.setOptionValue("random_seed", 0)


def _highs_finish(h, is_mip: bool, t0: float) -> SolveResult:
    import highspy

    ms = h.getModelStatus()
    M = highspy.HighsModelStatus
    info = h.getInfo()
    sol = h.getSolution()
    has_x = info.primal_solution_status == 2  # kSolutionStatusFeasible
    x = np.array(sol.col_value, dtype=float) if has_x else None
    obj = info.objective_function_value if has_x else math.nan
    bound = info.mip_dual_bound if is_mip else obj
    if ms == M.kOptimal:
        status = OPTIMAL
        if not is_mip:
            bound = obj
        elif rel_gap(obj, bound) > 1e-9:
            status = GAP_FEASIBLE
    elif ms in (M.kInfeasible,):
        status = INFEASIBLE
    elif ms in (M.kUnbounded, M.kUnboundedOrInfeasible):
        status = UNBOUNDED if ms == M.kUnbounded else INFEASIBLE
    elif ms in (M.kTimeLimit, M.kIterationLimit, M.kSolutionLimit, M.kInterrupt):
        status = TIME_LIMIT if has_x else INFEASIBLE if ms != M.kTimeLimit else TIME_LIMIT
    else:
        status = GAP_FEASIBLE if has_x else INFEASIBLE
    gap = rel_gap(obj, bound) if has_x else math.nan
    return SolveResult(status, obj, bound, gap, x, time.perf_counter() - t0, "highs")


def _solve_highs(sf: StandardForm, cfg: SolveConfig) -> SolveResult:
    try:
        import highspy
    except ImportError as exc:  # pragma: no cover - depends on env
        raise BackendUnavailable("highspy is not installed") from exc
    t0 = time.perf_counter()
    h = highspy.Highs()
    _highs_options(h, cfg)
    inf = highspy.kHighsInf
    n = len(sf.c)

    def clip(a):
        return np.clip(np.asarray(a, dtype=float), -inf, inf)

    lp = highspy.HighsLp()
    lp.num_col_ = n
    lp.num_row_ = sf.A.shape[0]
    lp.col_cost_ = sf.c
    lp.col_lower_ = clip(sf.lb)
    lp.col_upper_ = clip(sf.ub)
    lp.row_lower_ = clip(sf.row_lb)
    lp.row_upper_ = clip(sf.row_ub)
    lp.offset_ = sf.offset
    csc = sf.A.tocsc()
    lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    lp.a_matrix_.start_ = csc.indptr.astype(np.int32)
    lp.a_matrix_.index_ = csc.indices.astype(np.int32)
    lp.a_matrix_.value_ = csc.data.astype(float)
    is_mip = bool(sf.integrality.any())
    if is_mip:
        lp.integrality_ = [
            highspy.HighsVarType.kInteger if k else highspy.HighsVarType.kContinuous
            for k in sf.integrality
        ]
    if sf.sense == "max":
        lp.sense_ = highspy.ObjSense.kMaximize
    h.passModel(lp)
    h.run()
    return _highs_finish(h, is_mip, t0)


def solve_mps_file(path: str | Path, cfg: SolveConfig) -> tuple[SolveResult, list[str]]:
    """Read an MPS/LP file with HiGHS and solve it. Returns the result and the
    file's column names (in file order)."""
    try:
        import highspy
    except ImportError as exc:  # pragma: no cover
        raise BackendUnavailable("highspy is not installed") from exc
    t0 = time.perf_counter()
    h = highspy.Highs()
    _highs_options(h, cfg)
    status = h.readModel(str(path))
    if status == highspy.HighsStatus.kError:
        raise BackendUnavailable(f"HiGHS could not read {path}")
    lp = h.getLp()
    names = list(lp.col_names_)
    is_mip = any(t == highspy.HighsVarType.kInteger for t in lp.integrality_)
    h.run()
    return _highs_finish(h, is_mip, t0), names


# --------------------------------------------------------------------- scipy
def _solve_scipy(sf: StandardForm, cfg: SolveConfig) -> SolveResult:
    from scipy.optimize import Bounds, LinearConstraint, milp

    t0 = time.perf_counter()
    c = sf.c if sf.sense == "min" else -sf.c
    cons = [LinearConstraint(sf.A, sf.row_lb, sf.row_ub)] if sf.A.shape[0] else []
    res = milp(
        c,
        constraints=cons,
        integrality=sf.integrality,
        bounds=Bounds(sf.lb, sf.ub),
        options={"mip_rel_gap": cfg.mip_gap, "time_limit": cfg.time_limit, "presolve": True},
    )
    x = None if res.x is None else np.asarray(res.x, dtype=float)
    obj = math.nan if x is None else float(sf.c @ x + sf.offset)
    bound = getattr(res, "mip_dual_bound", None)
    if bound is None or not sf.integrality.any():
        bound = obj
    else:
        bound = float(bound) + sf.offset if sf.sense == "min" else -float(bound) + sf.offset
    status = {0: OPTIMAL, 1: TIME_LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status, GAP_FEASIBLE)
    if status == TIME_LIMIT and x is None:
        status = INFEASIBLE
    gap = rel_gap(obj, bound) if x is not None else math.nan
    return SolveResult(status, obj, bound, gap, x, time.perf_counter() - t0, "scipy")


_BACKENDS = {"highs": _solve_highs, "scipy": _solve_scipy}


def _solve_mps_route(sf_model: ModelInstance, cfg: SolveConfig) -> SolveResult:
    from .export import column_order, export_model

    exp = export_model(sf_model, "mps")
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "model.mps"
        path.write_bytes(exp.data)
        res, names = solve_mps_file(path, cfg)
    if res.x is not None:
        res.x = res.x[column_order(exp, names, sf_model)]
    res.backend = "highs-mps"
    return res


def solve_model(model: ModelInstance, cfg: SolveConfig | None = None, instance_id: str = "") -> SolveResult:
    """Solve ``model`` and, for MILPs, polish continuous values by re-solving the
    LP with integer columns fixed at their rounded incumbent values."""
    cfg = cfg or SolveConfig()
    name = cfg.backend
    if name == "mps":
        res = _solve_mps_route(model, cfg)
        sf = model.standard_form()
    else:
        if name not in _BACKENDS:
            raise BackendUnavailable(f"unknown backend {name!r}")
        if name == "highs" and "highs" not in available_backends():
            raise BackendUnavailable("highspy is not installed")
        sf = model.standard_form()
        res = _BACKENDS[name](sf, cfg)

    if cfg.polish and res.x is not None and sf.integrality.any():
        res = _polish(sf, res, cfg, name)

    if res.status == INFEASIBLE and cfg.diagnose_infeasible:
        from .elastic import diagnose

        res.hint = diagnose(model, cfg)
    log.info(
        json.dumps(
            {
                "instance_id": instance_id or model.name,
                "status": res.status,
                "objective": None if math.isnan(res.objective) else res.objective,
                "gap": None if math.isnan(res.gap) else res.gap,
                "wall_seconds": round(res.wall_seconds, 4),
            }
        )
    )
    if res.status == INFEASIBLE and cfg.raise_on_infeasible:
        raise Infeasible(f"model {model.name!r} is infeasible", res.hint)
    return res


def _polish(sf: StandardForm, res: SolveResult, cfg: SolveConfig, name: str) -> SolveResult:
    mask = sf.integrality.astype(bool)
    fixed = np.round(res.x[mask])
    lb, ub = sf.lb.copy(), sf.ub.copy()
    lb[mask] = fixed
    ub[mask] = fixed
    lp = replace(sf, lb=lb, ub=ub, integrality=np.zeros_like(sf.integrality))
    sub = _BACKENDS["scipy" if name == "scipy" else "highs"](lp, replace(cfg, time_limit=max(cfg.time_limit, 60.0)))
    if sub.status != OPTIMAL or sub.x is None:
        return res
    x = sub.x
    x[mask] = fixed
    obj = float(sf.c @ x + sf.offset)
    bound = min(res.bound, obj) if sf.sense == "min" else max(res.bound, obj)
    return replace(
        res,
        x=x,
        objective=obj,
        bound=bound,
        gap=rel_gap(obj, bound),
        wall_seconds=res.wall_seconds + sub.wall_seconds,
    )
