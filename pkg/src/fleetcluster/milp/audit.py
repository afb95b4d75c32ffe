"""Constraint-residual audit computed from raw primal values."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .model import CONTINUOUS, EQ, GE, LE, ModelInstance


@dataclass
class FamilyResidual:
    family: str
    rows: int
    max_abs: float
    max_rel: float
    worst: str

    def to_dict(self) -> dict:
        return asdict(self)


def audit_residuals(model: ModelInstance, x: np.ndarray) -> dict[str, FamilyResidual]:
    """Max violation per constraint family.

    ``max_rel`` scales each row's violation by ``max(1, |rhs|, max_j |a_j x_j|)``
    so that rows in kg CO2 and rows in kW are judged alike. Variable bounds and
    integrality are reported as the pseudo-families ``bounds`` and
    ``integrality``.
    """
    x = np.asarray(x, dtype=float)
    out: dict[str, FamilyResidual] = {}

    def record(fam: str, abs_v: float, rel_v: float, name: str) -> None:
        cur = out.get(fam)
        if cur is None:
            out[fam] = FamilyResidual(fam, 1, abs_v, rel_v, name)
            return
        cur.rows += 1
        if rel_v > cur.max_rel or (rel_v == cur.max_rel and abs_v > cur.max_abs):
            cur.worst = name
        cur.max_abs = max(cur.max_abs, abs_v)
        cur.max_rel = max(cur.max_rel, rel_v)

    for con in model.constraints:
        prods = con.coef * x[con.index] if len(con.index) else np.zeros(0)
        act = float(prods.sum())
        if con.sense == LE:
            v = max(0.0, act - con.rhs)
        elif con.sense == GE:
            v = max(0.0, con.rhs - act)
        else:
            v = abs(act - con.rhs)
        scale = max(1.0, abs(con.rhs), float(np.abs(prods).max()) if len(prods) else 0.0)
        record(con.family, v, v / scale, con.name)

    bnd_abs, bnd_rel, bnd_name = 0.0, 0.0, ""
    int_abs, int_name = 0.0, ""
    for j, info in enumerate(model.variables):
        xv = x[j]
        v = max(0.0, info.lb - xv, xv - info.ub)
        r = v / max(1.0, abs(xv))
        if r > bnd_rel:
            bnd_abs, bnd_rel, bnd_name = v, r, info.name
        if info.kind != CONTINUOUS:
            f = abs(xv - round(xv))
            if f > int_abs:
                int_abs, int_name = f, info.name
    out["bounds"] = FamilyResidual("bounds", len(model.variables), bnd_abs, bnd_rel, bnd_name)
    n_int = sum(1 for v in model.variables if v.kind != CONTINUOUS)
    out["integrality"] = FamilyResidual("integrality", n_int, int_abs, int_abs, int_name)
    return out


def flagged_families(audit: dict[str, FamilyResidual], tol: float) -> list[str]:
    return [f for f, r in audit.items() if r.max_rel > tol]
