"""Solver backends and the ``solve`` entry point.

Every backend must return row duals; :func:`register_backend` refuses one
that does not. The subprocess backend hands an MPS file to an external
command and reads back a plain-text solution file::

    <command> problem.mps solution.txt

Exit code 0 means the solution file was written (whatever the status);
any other code is a failure and the command's output is attached to the
raised :class:`BackendError`. The solution file holds one record per line:
``status <optimal|infeasible|unbounded>``, ``objective <value>``,
``primal <variable> <value>`` and ``dual <constraint> <value>``.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import sys
import tempfile
from pathlib import Path
from typing import Callable, Protocol

import numpy as np
from scipy.optimize import linprog

from capmech.lp.mps import export_interchange
from capmech.lp.problem import BackendError, LpProblem, LpSolution, Status, check_solution
from capmech.lp.simplex import reference_simplex

SOLVER_ENV = "CAPMECH_SOLVER"


class Backend(Protocol):
    name: str
    provides_duals: bool

    def solve(self, p: LpProblem) -> LpSolution: ...


class HighsBackend:
    """HiGHS dual simplex through :func:`scipy.optimize.linprog`."""

    name = "highs"
    provides_duals = True

    def __init__(self, method: str = "highs-ds", **options):
        self.method = method
        self.options = options

    def solve(self, p: LpProblem) -> LpSolution:
        p.check()
        if p.n_vars == 0:
            return LpSolution(Status.OPTIMAL, np.zeros(0), np.zeros(p.n_rows), p.offset, self.name)
        A = p.A
        code = p.sense_codes
        le = np.nonzero(code < 0)[0]
        ge = np.nonzero(code > 0)[0]
        eq = np.nonzero(code == 0)[0]
        ub_rows = np.concatenate([le, ge])
        A_ub = A[ub_rows] if len(ub_rows) else None
        if A_ub is not None and len(ge):
            flip = np.concatenate([np.ones(len(le)), -np.ones(len(ge))])
            A_ub = A_ub.multiply(flip[:, None]).tocsr()
        b_ub = np.concatenate([p.rhs[le], -p.rhs[ge]]) if len(ub_rows) else None
        A_eq = A[eq] if len(eq) else None
        b_eq = p.rhs[eq] if len(eq) else None
        bounds = np.column_stack([p.lb, p.ub])
        try:
            res = linprog(p.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                          method=self.method, options=self.options)
        except ValueError as exc:
            raise BackendError(f"HiGHS rejected {p.name}", str(exc)) from exc
        if res.status == 2:
            return LpSolution.failed(Status.INFEASIBLE, p, self.name, res.message)
        if res.status == 3:
            return LpSolution.failed(Status.UNBOUNDED, p, self.name, res.message)
        if res.status != 0:
            raise BackendError(f"HiGHS failed on {p.name} (status {res.status})", res.message)
        y = np.zeros(p.n_rows)
        if len(ub_rows):
            marg = res.ineqlin.marginals
            y[le] = marg[:len(le)]
            y[ge] = -marg[len(le):]
        if len(eq):
            y[eq] = res.eqlin.marginals
        return LpSolution(Status.OPTIMAL, np.asarray(res.x, dtype=float), y, float(res.fun) + p.offset,
                          self.name, int(getattr(res, "nit", 0)), log=res.message)


class ReferenceBackend:
    name = "reference"
    provides_duals = True

    def __init__(self, **options):
        self.options = options

    def solve(self, p: LpProblem) -> LpSolution:
        return reference_simplex(p, **self.options)


class SubprocessBackend:
    name = "subprocess"
    provides_duals = True

    def __init__(self, command: list[str] | str | None = None, timeout: float | None = None):
        if command is None:
            command = os.environ.get(SOLVER_ENV) or [sys.executable, "-m", "capmech.lp.worker"]
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout

    def solve(self, p: LpProblem) -> LpSolution:
        with tempfile.TemporaryDirectory(prefix="capmech-") as tmp:
            mps = Path(tmp) / "problem.mps"
            out = Path(tmp) / "solution.txt"
            mps.write_bytes(export_interchange(p))
            proc = subprocess.run(self.command + [str(mps), str(out)], capture_output=True, text=True,
                                  timeout=self.timeout)
            output = (proc.stdout + proc.stderr).strip()
            if proc.returncode != 0:
                raise BackendError(f"solver command exited with {proc.returncode}", output)
            if not out.exists():
                raise BackendError("solver command did not write a solution file", output)
            return read_solution(out.read_text("utf-8"), p, backend=self.name, log=output)


def write_solution(sol: LpSolution, p: LpProblem) -> str:
    lines = [f"status {sol.status.value}"]
    if sol.optimal:
        lines.append(f"objective {sol.objective!r}")
        lines += [f"primal {n} {float(v)!r}" for n, v in zip(p.var_names, sol.x)]
        lines += [f"dual {n} {float(v)!r}" for n, v in zip(p.row_names, sol.duals)]
    return "\n".join(lines) + "\n"


def read_solution(text: str, p: LpProblem, backend: str = "subprocess", log: str = "") -> LpSolution:
    status = None
    objective = float("nan")
    x = np.full(p.n_vars, np.nan)
    y = np.full(p.n_rows, np.nan)
    vidx, ridx = p.var_index(), p.row_index()
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "status":
            status = Status(parts[1])
        elif parts[0] == "objective":
            objective = float(parts[1])
        elif parts[0] == "primal":
            x[vidx[parts[1]]] = float(parts[2])
        elif parts[0] == "dual":
            y[ridx[parts[1]]] = float(parts[2])
    if status is None:
        raise BackendError("solution file has no status line", log)
    if status is not Status.OPTIMAL:
        return LpSolution.failed(status, p, backend, log)
    if np.isnan(x).any() or np.isnan(y).any():
        raise BackendError("solution file is missing primal or dual values", log)
    return LpSolution(status, x, y, objective, backend, log=log)


_REGISTRY: dict[str, Callable[[], Backend]] = {}


def register_backend(name: str, factory: Callable[[], Backend]) -> None:
    backend = factory()
    if not getattr(backend, "provides_duals", False):
        raise ValueError(f"backend {name!r} does not return duals and cannot be registered")
    _REGISTRY[name] = factory


def get_backend(name: str | Backend) -> Backend:
    if not isinstance(name, str):
        return name
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; known: {sorted(_REGISTRY)}") from None


def available_backends() -> list[str]:
    return sorted(_REGISTRY)


register_backend("highs", HighsBackend)
register_backend("reference", ReferenceBackend)
register_backend("subprocess", SubprocessBackend)


def solve(p: LpProblem, backend: str | Backend = "highs", check: bool = True) -> LpSolution:
    """Solve ``p``; on optimal status the tolerances are verified unless ``check`` is off."""
    engine = get_backend(backend)
    sol = engine.solve(p)
    if check and sol.optimal:
        check_solution(p, sol)
    return sol
