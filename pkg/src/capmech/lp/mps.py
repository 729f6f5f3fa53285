"""MPS interchange.

Sections and field order follow the classic fixed layout, and fields are
padded to the fixed columns (5, 15, 25) when names fit in eight characters.
Longer names push later fields right, so readers must split on whitespace
(free MPS). Numbers are written with ``repr`` so every float survives a
round trip bit for bit; names may therefore not contain whitespace and are
limited to ``MAX_NAME`` characters.
"""

from __future__ import annotations

import io
import math
from pathlib import Path

import numpy as np

from capmech.lp.problem import INF, LpError, LpProblem, Sense

MAX_NAME = 255
OBJ_ROW = "COST"
_SENSE_CODE = {Sense.LE: "L", Sense.EQ: "E", Sense.GE: "G"}
_CODE_SENSE = {v: k for k, v in _SENSE_CODE.items()}


class MpsFormatError(LpError):
    pass


def _check_name(name: str, what: str) -> None:
    if not name or len(name) > MAX_NAME or any(ch.isspace() for ch in name) or name[0] in "*$":
        raise MpsFormatError(f"{what} name {name!r} cannot be written to MPS "
                             f"(1-{MAX_NAME} chars, no whitespace, no leading '*' or '$')")


def _num(v: float) -> str:
    if math.isinf(v):
        return "1e+30" if v > 0 else "-1e+30"
    return repr(float(v))


def _entry(first: str, second: str, value: float) -> str:
    return f"    {first:<8}  {second:<8}  {_num(value)}"


def export_interchange(p: LpProblem) -> bytes:
    """Serialize ``p``; variables and rows keep their insertion order."""
    p.check()
    for n in p.var_names:
        _check_name(n, "variable")
    for n in p.row_names:
        _check_name(n, "constraint")
        if n == OBJ_ROW:
            raise MpsFormatError(f"constraint name {OBJ_ROW!r} is reserved for the objective")
    _check_name(p.name, "problem")

    out = io.StringIO()
    w = out.write
    w(f"NAME          {p.name}\n")
    w("ROWS\n")
    w(f" N  {OBJ_ROW}\n")
    for name, sense in zip(p.row_names, p.senses):
        w(f" {_SENSE_CODE[sense]}  {name}\n")

    w("COLUMNS\n")
    csc = p.A.tocsc()
    csc.sort_indices()
    c = p.c
    rows = p.row_names
    for j, var in enumerate(p.var_names):
        start, stop = csc.indptr[j], csc.indptr[j + 1]
        if c[j] != 0 or start == stop:
            w(_entry(var, OBJ_ROW, c[j]) + "\n")
        for k in range(start, stop):
            w(_entry(var, rows[csc.indices[k]], csc.data[k]) + "\n")

    w("RHS\n")
    if p.offset != 0:
        w(_entry("RHS", OBJ_ROW, -p.offset) + "\n")
    for name, b in zip(rows, p.rhs):
        if b != 0 or math.copysign(1.0, b) < 0:
            w(_entry("RHS", name, b) + "\n")

    w("BOUNDS\n")
    for var, lo, hi in zip(p.var_names, p.lb, p.ub):
        neg_zero = lo == 0 and math.copysign(1.0, lo) < 0
        if lo == hi:
            w(f" FX BND       {var:<8}  {_num(lo)}\n")
        elif lo == -INF and hi == INF:
            w(f" FR BND       {var}\n")
        elif lo == -INF:
            w(f" MI BND       {var}\n")
            w(f" UP BND       {var:<8}  {_num(hi)}\n")
        else:
            if lo != 0 or neg_zero:
                w(f" LO BND       {var:<8}  {_num(lo)}\n")
            if hi != INF:
                w(f" UP BND       {var:<8}  {_num(hi)}\n")
    w("ENDATA\n")
    return out.getvalue().encode("utf-8")


def _parse_num(s: str) -> float:
    v = float(s)
    if v >= 1e30:
        return INF
    if v <= -1e30:
        return -INF
    return v


def import_interchange(data: bytes | str) -> LpProblem:
    """Parse a document written by :func:`export_interchange`.

    Handles the usual N/E/L/G rows and LO/UP/FX/FR/MI/PL bounds; RANGES and
    integer markers are rejected.
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    name = "lp"
    section = None
    obj_row = None
    rows: list[tuple[str, Sense]] = []
    row_pos: dict[str, int] = {}
    col_pos: dict[str, int] = {}
    cols: list[str] = []
    obj: dict[int, float] = {}
    entries_r: list[int] = []
    entries_c: list[int] = []
    entries_v: list[float] = []
    rhs: dict[int, float] = {}
    offset = 0.0
    lb: dict[int, float] = {}
    ub: dict[int, float] = {}

    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip() or raw.startswith("*"):
            continue
        tok = raw.split()
        if not raw[0].isspace():
            section = tok[0]
            if section == "NAME":
                name = tok[1] if len(tok) > 1 else ""
            elif section == "ENDATA":
                break
            elif section in ("RANGES", "SOS"):
                raise MpsFormatError(f"line {lineno}: section {section} is not supported")
            elif section not in ("ROWS", "COLUMNS", "RHS", "BOUNDS", "OBJSENSE"):
                raise MpsFormatError(f"line {lineno}: unknown section {section}")
            continue
        if section == "ROWS":
            code, rname = tok
            if code == "N":
                if obj_row is None:
                    obj_row = rname
                continue
            row_pos[rname] = len(rows)
            rows.append((rname, _CODE_SENSE[code]))
        elif section == "COLUMNS":
            if "'MARKER'" in tok:
                raise MpsFormatError(f"line {lineno}: integer markers are not supported")
            var = tok[0]
            if var not in col_pos:
                col_pos[var] = len(cols)
                cols.append(var)
            j = col_pos[var]
            for rname, val in zip(tok[1::2], tok[2::2]):
                if rname == obj_row:
                    obj[j] = float(val)
                elif rname in row_pos:
                    entries_r.append(row_pos[rname])
                    entries_c.append(j)
                    entries_v.append(float(val))
                else:
                    raise MpsFormatError(f"line {lineno}: unknown row {rname}")
        elif section == "RHS":
            for rname, val in zip(tok[1::2], tok[2::2]):
                if rname == obj_row:
                    offset = -float(val)
                else:
                    rhs[row_pos[rname]] = float(val)
        elif section == "BOUNDS":
            kind, var = tok[0], tok[2]
            j = col_pos[var]
            val = _parse_num(tok[3]) if len(tok) > 3 else None
            if kind == "LO":
                lb[j] = val
            elif kind == "UP":
                ub[j] = val
            elif kind == "FX":
                lb[j] = ub[j] = val
            elif kind == "FR":
                lb[j], ub[j] = -INF, INF
            elif kind == "MI":
                lb[j] = -INF
            elif kind == "PL":
                ub[j] = INF
            else:
                raise MpsFormatError(f"line {lineno}: bound type {kind} is not supported")

    p = LpProblem(name)
    p.offset = offset
    n = len(cols)
    p.add_variables(cols,
                    lb=np.array([lb.get(j, 0.0) for j in range(n)]),
                    ub=np.array([ub.get(j, INF) for j in range(n)]),
                    obj=np.array([obj.get(j, 0.0) for j in range(n)]))
    r = np.array(entries_r, dtype=np.int64)
    c = np.array(entries_c, dtype=np.int64)
    v = np.array(entries_v, dtype=float)
    # rows are appended one sense-run at a time to keep their original order
    start = 0
    while start < len(rows):
        stop = start
        while stop < len(rows) and rows[stop][1] is rows[start][1]:
            stop += 1
        sel = (r >= start) & (r < stop)
        p.add_rows([rows[i][0] for i in range(start, stop)], rows[start][1],
                   [rhs.get(i, 0.0) for i in range(start, stop)],
                   [r[sel] - start], [c[sel]], [v[sel]])
        start = stop
    return p


def write_mps(p: LpProblem, path: str | Path) -> None:
    Path(path).write_bytes(export_interchange(p))


def read_mps(path: str | Path) -> LpProblem:
    return import_interchange(Path(path).read_bytes())
