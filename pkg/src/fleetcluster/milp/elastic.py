"""Elastic relaxation for localising infeasibility.

Every row of the selected families gets nonnegative slack columns (two for
equalities) and the objective is replaced by the total slack. Families with
positive slack at the optimum are where the data disagrees with itself.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .model import CONTINUOUS, EQ, GE, LE, Constraint, LinExpr, ModelInstance, VarInfo


def elastic_copy(
    model: ModelInstance, families: list[str] | None = None, penalty: float = 1.0
) -> tuple[ModelInstance, dict[str, list[int]]]:
    """Return a relaxed copy and the slack column indices per constraint name."""
    fams = None if families is None else set(families)
    out = ModelInstance(name=f"{model.name}-elastic")
    out.variables = [replace(v) for v in model.variables]
    out._var_names = dict(model._var_names)
    slack_cols: dict[str, list[int]] = {}
    obj = LinExpr()
    for con in model.constraints:
        idx, coef = con.index, con.coef
        if fams is None or con.family in fams:
            cols = []
            # +s relaxes <=, -s relaxes >=
            signs = {LE: (-1.0,), GE: (1.0,), EQ: (1.0, -1.0)}[con.sense]
            for sgn in signs:
                j = len(out.variables)
                out.variables.append(VarInfo(f"slack[{con.name},{'+' if sgn > 0 else '-'}]", CONTINUOUS, 0.0, np.inf))
                cols.append(j)
                idx = np.append(idx, j)
                coef = np.append(coef, sgn)
                obj.terms[j] = penalty
            slack_cols[con.name] = cols
        out.constraints.append(Constraint(con.name, idx, coef, con.sense, con.rhs))
        out._con_names.add(con.name)
    out.objective = obj
    return out, slack_cols


def diagnose(model: ModelInstance, cfg, families: list[str] | None = None) -> dict:
    """Solve the elastic relaxation; return total slack per family and the
    worst rows."""
    from .solve import solve_model

    relaxed, slack_cols = elastic_copy(model, families)
    sub_cfg = replace(cfg, diagnose_infeasible=False, raise_on_infeasible=False, polish=False)
    res = solve_model(relaxed, sub_cfg, instance_id=relaxed.name)
    if res.x is None:
        return {"status": res.status}
    per_family: dict[str, float] = {}
    rows: list[tuple[float, str]] = []
    for name, cols in slack_cols.items():
        s = float(sum(res.x[c] for c in cols))
        if s > 1e-7:
            fam = name.split("[", 1)[0]
            per_family[fam] = per_family.get(fam, 0.0) + s
            rows.append((s, name))
    rows.sort(reverse=True)
    return {
        "status": res.status,
        "total_slack": float(res.objective),
        "families": per_family,
        "worst_rows": [{"name": n, "slack": s} for s, n in rows[:10]],
    }
