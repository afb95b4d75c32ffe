"""MPS (free format) and CPLEX-LP writers.

Hierarchical names such as ``fleet.b[k1,bev]`` are rewritten to a portable
alphabet; every rewritten name is recorded in the returned mangling table so
solutions read back from a file can be mapped onto the in-memory registry.
"""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field

import numpy as np

from ..errors import ModelError, NameTooLong
from .model import BINARY, CONTINUOUS, EQ, GE, INTEGER, LE, ModelInstance

MAX_NAME = 255
_SAFE = re.compile(r"^[A-Za-z_][A-Za-z0-9_!\"#$%&()/,.;?@`'{}|~]*$")
_REWRITE = str.maketrans({"[": "(", "]": ")", " ": "_", "-": "_", "+": "_", ":": "_"})
OBJ_ROW = "obj"


@dataclass
class Export:
    data: bytes
    fmt: str
    var_names: dict[str, str] = field(default_factory=dict)  # registry name -> file name
    con_names: dict[str, str] = field(default_factory=dict)

    @property
    def mangled(self) -> dict[str, str]:
        """Only the names that had to change."""
        out = {k: v for k, v in self.var_names.items() if k != v}
        out.update({k: v for k, v in self.con_names.items() if k != v})
        return out

    def mangling_table(self) -> str:
        lines = ["kind,original,exported"]
        for k, v in self.var_names.items():
            if k != v:
                lines.append(f'var,"{k}",{v}')
        for k, v in self.con_names.items():
            if k != v:
                lines.append(f'con,"{k}",{v}')
        return "\n".join(lines) + "\n"


def _num(x: float) -> str:
    x = float(x)
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _mangle(names: list[str], prefix: str, strict: bool) -> dict[str, str]:
    out: dict[str, str] = {}
    used: set[str] = set()
    for pos, name in enumerate(names):
        cand = name.translate(_REWRITE)
        if not _SAFE.match(cand) or cand in used or cand == OBJ_ROW:
            cand = f"{prefix}{pos}"
        if len(cand) > MAX_NAME:
            if strict:
                raise NameTooLong(name)
            cand = f"{prefix}{pos}"
        while cand in used:
            cand = f"{prefix}{pos}_"
        used.add(cand)
        out[name] = cand
    return out


def export_model(instance: ModelInstance, fmt: str = "mps", strict_names: bool = False) -> Export:
    """Serialise ``instance`` as ``"mps"`` or ``"lp"`` bytes."""
    fmt = fmt.lower()
    vnames = _mangle([v.name for v in instance.variables], "x", strict_names)
    cnames = _mangle([c.name for c in instance.constraints], "c", strict_names)
    if fmt == "mps":
        text = _write_mps(instance, vnames, cnames)
    elif fmt == "lp":
        text = _write_lp(instance, vnames, cnames)
    else:
        raise ModelError(f"unsupported export format {fmt!r}")
    return Export(text.encode("ascii"), fmt, vnames, cnames)


def _write_mps(m: ModelInstance, vnames: dict[str, str], cnames: dict[str, str]) -> str:
    sf = m.standard_form()
    out = io.StringIO()
    out.write(f"NAME {m.name.replace(' ', '_') or 'model'}\n")
    if m.sense == "max":
        out.write("OBJSENSE\n    MAX\n")
    out.write("ROWS\n")
    out.write(f" N  {OBJ_ROW}\n")
    code = {LE: "L", GE: "G", EQ: "E"}
    row_names = [cnames[c.name] for c in m.constraints]
    for c, rn in zip(m.constraints, row_names):
        out.write(f" {code[c.sense]}  {rn}\n")

    out.write("COLUMNS\n")
    csc = sf.A.tocsc()
    in_int = False
    marker = 0
    for j, info in enumerate(m.variables):
        is_int = info.kind != CONTINUOUS
        if is_int != in_int:
            tag = "'INTORG'" if is_int else "'INTEND'"
            out.write(f"    MARKER{marker:04d}  'MARKER'  {tag}\n")
            marker += 1
            in_int = is_int
        vn = vnames[info.name]
        entries = []
        if sf.c[j] != 0.0:
            entries.append((OBJ_ROW, sf.c[j]))
        lo, hi = csc.indptr[j], csc.indptr[j + 1]
        for r, a in zip(csc.indices[lo:hi], csc.data[lo:hi]):
            if a != 0.0:
                entries.append((row_names[r], a))
        if not entries:
            # keep the column visible to readers
            entries.append((OBJ_ROW, 0.0))
        for rn, a in entries:
            out.write(f"    {vn}  {rn}  {_num(a)}\n")
    if in_int:
        out.write(f"    MARKER{marker:04d}  'MARKER'  'INTEND'\n")

    out.write("RHS\n")
    if sf.offset != 0.0:
        out.write(f"    RHS  {OBJ_ROW}  {_num(-sf.offset)}\n")
    for c, rn in zip(m.constraints, row_names):
        if c.rhs != 0.0:
            out.write(f"    RHS  {rn}  {_num(c.rhs)}\n")

    out.write("BOUNDS\n")
    for info in m.variables:
        vn = vnames[info.name]
        lb, ub = info.lb, info.ub
        if info.kind == BINARY and lb == 0.0 and ub == 1.0:
            out.write(f" BV BND  {vn}\n")
            continue
        if lb == ub:
            out.write(f" FX BND  {vn}  {_num(lb)}\n")
            continue
        if math.isinf(lb) and math.isinf(ub):
            out.write(f" FR BND  {vn}\n")
            continue
        if math.isinf(lb):
            out.write(f" MI BND  {vn}\n")
        elif lb != 0.0 or info.kind == INTEGER:
            out.write(f" LO BND  {vn}  {_num(lb)}\n")
        if math.isinf(ub):
            if info.kind == INTEGER:
                out.write(f" PL BND  {vn}\n")
        else:
            out.write(f" UP BND  {vn}  {_num(ub)}\n")
    out.write("ENDATA\n")
    return out.getvalue()


def _lp_terms(pairs, width: int = 8) -> str:
    chunks = []
    for pos, (name, a) in enumerate(pairs):
        sign = "-" if a < 0 else "+"
        mag = _num(abs(a))
        term = f"{sign} {name}" if mag == "1" else f"{sign} {mag} {name}"
        if pos and pos % width == 0:
            chunks.append("\n   ")
        chunks.append(" " + term)
    return "".join(chunks)


def _write_lp(m: ModelInstance, vnames: dict[str, str], cnames: dict[str, str]) -> str:
    out = io.StringIO()
    out.write(f"\\ Problem name: {m.name}\n")
    out.write("Minimize\n" if m.sense == "min" else "Maximize\n")
    names = [vnames[v.name] for v in m.variables]
    obj_pairs = [(names[i], c) for i, c in sorted(m.objective.terms.items()) if c != 0.0]
    if not obj_pairs and names:
        obj_pairs = [(names[0], 0.0)]
    out.write(f" {OBJ_ROW}:{_lp_terms(obj_pairs)}")
    if m.objective.const != 0.0:
        out.write(f" {'+' if m.objective.const > 0 else '-'} {_num(abs(m.objective.const))}")
    out.write("\nSubject To\n")
    sym = {LE: "<=", GE: ">=", EQ: "="}
    for c in m.constraints:
        pairs = [(names[i], a) for i, a in zip(c.index, c.coef)]
        if not pairs and names:
            pairs = [(names[0], 0.0)]
        out.write(f" {cnames[c.name]}:{_lp_terms(pairs)} {sym[c.sense]} {_num(c.rhs)}\n")
    out.write("Bounds\n")
    generals, binaries = [], []
    for info, vn in zip(m.variables, names):
        lb, ub = info.lb, info.ub
        if info.kind == BINARY and lb == 0.0 and ub == 1.0:
            binaries.append(vn)
            continue
        if info.kind != CONTINUOUS:
            generals.append(vn)
        if math.isinf(lb) and math.isinf(ub):
            out.write(f" {vn} free\n")
        elif lb == ub:
            out.write(f" {vn} = {_num(lb)}\n")
        elif math.isinf(ub):
            if lb != 0.0 or info.kind != CONTINUOUS:
                lo = "-inf" if math.isinf(lb) else _num(lb)
                out.write(f" {vn} >= {lo}\n")
        else:
            lo = "-inf" if math.isinf(lb) else _num(lb)
            out.write(f" {lo} <= {vn} <= {_num(ub)}\n")
    if generals:
        out.write("Generals\n")
        for vn in generals:
            out.write(f" {vn}\n")
    if binaries:
        out.write("Binaries\n")
        for vn in binaries:
            out.write(f" {vn}\n")
    out.write("End\n")
    return out.getvalue()


def column_order(export: Export, file_columns: list[str], instance: ModelInstance) -> np.ndarray:
    """Permutation mapping file column order back to registry order."""
    pos = {name: k for k, name in enumerate(file_columns)}
    return np.array([pos[export.var_names[v.name]] for v in instance.variables], dtype=np.int64)
