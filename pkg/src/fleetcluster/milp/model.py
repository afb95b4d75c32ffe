"""Solver-agnostic MILP container: variable registry, linear expressions, constraints."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from ..errors import ModelError, UnregisteredVariable

CONTINUOUS = "continuous"
INTEGER = "integer"
BINARY = "binary"
KINDS = (CONTINUOUS, INTEGER, BINARY)

LE, EQ, GE = "<=", "==", ">="
SENSES = (LE, EQ, GE)

INF = math.inf


def family_of(name: str) -> str:
    """``fleet.soe[i,s,t]`` -> ``fleet.soe``."""
    return name.split("[", 1)[0]


@dataclass(frozen=True)
class Var:
    """Handle to a registered variable. Arithmetic produces :class:`LinExpr`."""

    index: int
    name: str

    def _expr(self) -> "LinExpr":
        return LinExpr({self.index: 1.0})

    def __add__(self, other):
        return self._expr() + other

    __radd__ = __add__

    def __sub__(self, other):
        return self._expr() - other

    def __rsub__(self, other):
        return (-self._expr()) + other

    def __mul__(self, k):
        return self._expr() * k

    __rmul__ = __mul__

    def __truediv__(self, k):
        return self._expr() * (1.0 / k)

    def __neg__(self):
        return self._expr() * -1.0


class LinExpr:
    """Sparse affine expression ``sum(coef * x[idx]) + const``."""

    __slots__ = ("terms", "const")

    def __init__(self, terms: Mapping[int, float] | None = None, const: float = 0.0):
        self.terms: dict[int, float] = dict(terms) if terms else {}
        self.const = float(const)

    def copy(self) -> "LinExpr":
        return LinExpr(self.terms, self.const)

    def add_term(self, var: Var | "LinExpr" | float, coef: float = 1.0) -> "LinExpr":
        """In-place ``self += coef * var``; returns self."""
        if coef == 0.0:
            return self
        if isinstance(var, Var):
            self.terms[var.index] = self.terms.get(var.index, 0.0) + coef
        elif isinstance(var, LinExpr):
            for i, c in var.terms.items():
                self.terms[i] = self.terms.get(i, 0.0) + coef * c
            self.const += coef * var.const
        else:
            self.const += coef * float(var)
        return self

    def __iadd__(self, other):
        return self.add_term(other, 1.0)

    def __isub__(self, other):
        return self.add_term(other, -1.0)

    def __add__(self, other):
        return self.copy().add_term(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self.copy().add_term(other, -1.0)

    def __rsub__(self, other):
        return (self * -1.0).add_term(other, 1.0)

    def __mul__(self, k):
        k = float(k)
        return LinExpr({i: c * k for i, c in self.terms.items()}, self.const * k)

    __rmul__ = __mul__

    def __truediv__(self, k):
        return self * (1.0 / k)

    def __neg__(self):
        return self * -1.0

    def value(self, x: np.ndarray) -> float:
        return self.const + sum(c * x[i] for i, c in self.terms.items())

    def __repr__(self) -> str:
        body = " + ".join(f"{c:g}*x{i}" for i, c in sorted(self.terms.items()))
        return f"LinExpr({body or '0'} + {self.const:g})"


def as_expr(obj) -> LinExpr:
    if isinstance(obj, LinExpr):
        return obj
    if isinstance(obj, Var):
        return obj._expr()
    return LinExpr(const=float(obj))


def lin_sum(items: Iterable) -> LinExpr:
    out = LinExpr()
    for it in items:
        out.add_term(it, 1.0)
    return out


def value_of(obj, x: np.ndarray) -> float:
    if isinstance(obj, Var):
        return float(x[obj.index])
    if isinstance(obj, LinExpr):
        return obj.value(x)
    return float(obj)


@dataclass
class VarInfo:
    name: str
    kind: str
    lb: float
    ub: float


@dataclass
class Constraint:
    name: str
    index: np.ndarray
    coef: np.ndarray
    sense: str
    rhs: float

    @property
    def family(self) -> str:
        return family_of(self.name)


@dataclass
class StandardForm:
    """Arrays for ``min c@x + offset  s.t.  row_lb <= A@x <= row_ub, lb <= x <= ub``."""

    c: np.ndarray
    offset: float
    A: sp.csr_matrix
    row_lb: np.ndarray
    row_ub: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray  # 1 for integer/binary columns
    sense: str


@dataclass
class ModelInstance:
    """A MILP under construction.

    Variables and constraints are kept in insertion order so that exports are
    byte-stable for identical inputs.
    """

    name: str = "model"
    variables: list[VarInfo] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: LinExpr = field(default_factory=LinExpr)
    sense: str = "min"
    frozen: bool = False
    _var_names: dict[str, Var] = field(default_factory=dict, repr=False)
    _con_names: set[str] = field(default_factory=set, repr=False)

    # ------------------------------------------------------------------ vars
    def add_var(self, name: str, kind: str = CONTINUOUS, lb: float = 0.0, ub: float = INF) -> Var:
        self._check_open()
        if kind not in KINDS:
            raise ModelError(f"unknown variable kind {kind!r}")
        if name in self._var_names:
            raise ModelError(f"duplicate variable name {name!r}")
        if kind == BINARY:
            lb, ub = max(0.0, lb), min(1.0, ub)
        lb = -INF if lb is None else float(lb)
        ub = INF if ub is None else float(ub)
        if lb > ub:
            raise ModelError(f"variable {name!r} has lb {lb} > ub {ub}")
        v = Var(len(self.variables), name)
        self.variables.append(VarInfo(name, kind, lb, ub))
        self._var_names[name] = v
        return v

    def var(self, name: str) -> Var:
        try:
            return self._var_names[name]
        except KeyError:
            raise UnregisteredVariable(name) from None

    def has_var(self, name: str) -> bool:
        return name in self._var_names

    def set_bounds(self, v: Var, lb: float | None = None, ub: float | None = None) -> None:
        self._check_open()
        info = self.variables[v.index]
        if lb is not None:
            info.lb = float(lb)
        if ub is not None:
            info.ub = float(ub)
        if info.lb > info.ub:
            raise ModelError(f"variable {info.name!r} has lb {info.lb} > ub {info.ub}")

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    # ----------------------------------------------------------- constraints
    def add_constr(self, expr, sense: str, rhs, name: str) -> Constraint:
        """Add ``expr <sense> rhs``. Both sides may be expressions."""
        self._check_open()
        if sense not in SENSES:
            raise ModelError(f"unknown sense {sense!r}")
        if name in self._con_names:
            raise ModelError(f"duplicate constraint name {name!r}")
        e = as_expr(expr) - as_expr(rhs)
        n = len(self.variables)
        items = [(i, c) for i, c in sorted(e.terms.items()) if c != 0.0]
        for i, _ in items:
            if not 0 <= i < n:
                raise UnregisteredVariable(f"index {i} in constraint {name!r}")
        idx = np.fromiter((i for i, _ in items), dtype=np.int64, count=len(items))
        coef = np.fromiter((c for _, c in items), dtype=float, count=len(items))
        con = Constraint(name, idx, coef, sense, -e.const)
        self.constraints.append(con)
        self._con_names.add(name)
        return con

    def le(self, lhs, rhs, name: str) -> Constraint:
        return self.add_constr(lhs, LE, rhs, name)

    def ge(self, lhs, rhs, name: str) -> Constraint:
        return self.add_constr(lhs, GE, rhs, name)

    def eq(self, lhs, rhs, name: str) -> Constraint:
        return self.add_constr(lhs, EQ, rhs, name)

    # ------------------------------------------------------------- objective
    def set_objective(self, expr, sense: str = "min") -> None:
        self._check_open()
        e = as_expr(expr)
        for i in e.terms:
            if not 0 <= i < len(self.variables):
                raise UnregisteredVariable(f"index {i} in objective")
        self.objective = e.copy()
        self.sense = sense

    def freeze(self) -> "ModelInstance":
        self.frozen = True
        return self

    def _check_open(self) -> None:
        if self.frozen:
            raise ModelError(f"model {self.name!r} is frozen")

    # -------------------------------------------------------------- queries
    def count_variables(self) -> dict[str, int]:
        out = {CONTINUOUS: 0, INTEGER: 0, BINARY: 0}
        for v in self.variables:
            out[v.kind] += 1
        return out

    def families(self) -> list[str]:
        seen: dict[str, None] = {}
        for c in self.constraints:
            seen.setdefault(c.family, None)
        return list(seen)

    def standard_form(self) -> StandardForm:
        n, m = len(self.variables), len(self.constraints)
        c = np.zeros(n)
        for i, k in self.objective.terms.items():
            c[i] += k
        rows, cols, vals = [], [], []
        row_lb = np.full(m, -INF)
        row_ub = np.full(m, INF)
        for r, con in enumerate(self.constraints):
            rows.append(np.full(len(con.index), r, dtype=np.int64))
            cols.append(con.index)
            vals.append(con.coef)
            if con.sense in (LE, EQ):
                row_ub[r] = con.rhs
            if con.sense in (GE, EQ):
                row_lb[r] = con.rhs
        if m:
            A = sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, n)
            )
        else:
            A = sp.csr_matrix((0, n))
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        integ = np.array([v.kind != CONTINUOUS for v in self.variables], dtype=np.int8)
        return StandardForm(c, self.objective.const, A, row_lb, row_ub, lb, ub, integ, self.sense)
