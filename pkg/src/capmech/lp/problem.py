"""Sparse linear program (always minimized) and its solution."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

INF = float("inf")


class Sense(str, Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LpError(Exception):
    pass


class BackendError(LpError):
    """The solver failed; ``log`` carries whatever it printed."""

    def __init__(self, message: str, log: str = ""):
        super().__init__(message if not log else f"{message}\n{log}")
        self.log = log


class ToleranceError(LpError):
    pass


class LpProblem:
    """Variables and rows are appended in order and never reordered.

    Rows are stored as COO chunks and materialized lazily, so large blocks
    (one row per hour) can be added with numpy arrays.
    """

    def __init__(self, name: str = "lp"):
        self.name = name
        self.offset = 0.0
        self.var_names: list[str] = []
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._obj: list[float] = []
        self.row_names: list[str] = []
        self._sense: list[Sense] = []
        self._rhs: list[float] = []
        self._coo: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        self._cache: dict = {}

    # -- building ----------------------------------------------------------

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.row_names)

    def add_variable(self, name: str, lb: float = 0.0, ub: float = INF, obj: float = 0.0) -> int:
        return int(self.add_variables([name], lb, ub, obj)[0])

    def add_variables(self, names: Sequence[str], lb=0.0, ub=INF, obj=0.0) -> np.ndarray:
        n = len(names)
        start = self.n_vars
        self.var_names.extend(names)
        self._lb.extend(np.broadcast_to(np.asarray(lb, dtype=float), (n,)).tolist())
        self._ub.extend(np.broadcast_to(np.asarray(ub, dtype=float), (n,)).tolist())
        self._obj.extend(np.broadcast_to(np.asarray(obj, dtype=float), (n,)).tolist())
        self._cache.clear()
        return np.arange(start, start + n)

    def add_constraint(self, name: str, coeffs: Mapping[int, float] | tuple[Sequence[int], Sequence[float]],
                       sense: Sense | str, rhs: float) -> int:
        if isinstance(coeffs, Mapping):
            idx, val = list(coeffs.keys()), list(coeffs.values())
        else:
            idx, val = coeffs
        row = self.n_rows
        self.add_rows([name], sense, [rhs], [np.zeros(len(idx), dtype=int)],
                      [np.asarray(idx, dtype=int)], [np.asarray(val, dtype=float)])
        return row

    def add_rows(self, names: Sequence[str], sense: Sense | str, rhs, local_rows: Iterable[np.ndarray],
                 cols: Iterable[np.ndarray], vals: Iterable[np.ndarray]) -> np.ndarray:
        """Append ``len(names)`` rows sharing one sense.

        Each (local_rows, cols, vals) triple adds coefficients; ``local_rows``
        index into the new block (0 .. len(names)-1).
        """
        n = len(names)
        start = self.n_rows
        sense = Sense(sense)
        self.row_names.extend(names)
        self._sense.extend([sense] * n)
        self._rhs.extend(np.broadcast_to(np.asarray(rhs, dtype=float), (n,)).tolist())
        for r, c, v in zip(local_rows, cols, vals):
            r = np.asarray(r, dtype=np.int64)
            c = np.asarray(c, dtype=np.int64)
            v = np.broadcast_to(np.asarray(v, dtype=float), r.shape)
            self._coo.append((r + start, c, np.array(v)))
        self._cache.clear()
        return np.arange(start, start + n)

    def set_objective(self, index, value) -> None:
        for i, v in zip(np.atleast_1d(index), np.broadcast_to(value, np.shape(np.atleast_1d(index)))):
            self._obj[int(i)] = float(v)
        self._cache.clear()

    def set_bounds(self, index, lb=None, ub=None) -> None:
        idx = np.atleast_1d(index)
        if lb is not None:
            for i, v in zip(idx, np.broadcast_to(lb, idx.shape)):
                self._lb[int(i)] = float(v)
        if ub is not None:
            for i, v in zip(idx, np.broadcast_to(ub, idx.shape)):
                self._ub[int(i)] = float(v)
        self._cache.clear()

    # -- views -------------------------------------------------------------

    @property
    def lb(self) -> np.ndarray:
        return self._cached("lb", lambda: np.array(self._lb, dtype=float))

    @property
    def ub(self) -> np.ndarray:
        return self._cached("ub", lambda: np.array(self._ub, dtype=float))

    @property
    def c(self) -> np.ndarray:
        return self._cached("c", lambda: np.array(self._obj, dtype=float))

    @property
    def rhs(self) -> np.ndarray:
        return self._cached("rhs", lambda: np.array(self._rhs, dtype=float))

    @property
    def senses(self) -> list[Sense]:
        return self._sense

    @property
    def sense_codes(self) -> np.ndarray:
        """-1 for <=, 0 for =, +1 for >=."""
        code = {Sense.LE: -1, Sense.EQ: 0, Sense.GE: 1}
        return self._cached("sense", lambda: np.array([code[s] for s in self._sense], dtype=int))

    @property
    def A(self) -> sp.csr_matrix:
        def build():
            if self._coo:
                r = np.concatenate([t[0] for t in self._coo])
                c = np.concatenate([t[1] for t in self._coo])
                v = np.concatenate([t[2] for t in self._coo])
            else:
                r = c = np.zeros(0, dtype=np.int64)
                v = np.zeros(0)
            m = sp.coo_matrix((v, (r, c)), shape=(self.n_rows, self.n_vars)).tocsr()
            m.sum_duplicates()
            m.sort_indices()
            return m
        return self._cached("A", build)

    def _cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def var_index(self) -> dict[str, int]:
        return self._cached("vidx", lambda: {n: i for i, n in enumerate(self.var_names)})

    def row_index(self) -> dict[str, int]:
        return self._cached("ridx", lambda: {n: i for i, n in enumerate(self.row_names)})

    # -- checks ------------------------------------------------------------

    def check(self) -> None:
        """Raise :class:`LpError` if the problem breaks its invariants."""
        if len(set(self.var_names)) != self.n_vars:
            raise LpError("duplicate variable names")
        if len(set(self.row_names)) != self.n_rows:
            raise LpError("duplicate constraint names")
        bad = np.nonzero(self.lb > self.ub)[0]
        if len(bad):
            raise LpError(f"variable {self.var_names[bad[0]]}: lower bound above upper bound")
        if np.any(self.lb == INF) or np.any(self.ub == -INF):
            raise LpError("infinite bound on the wrong side")
        if not np.all(np.isfinite(self.c)) or not np.all(np.isfinite(self.rhs)):
            raise LpError("non-finite objective or right-hand side")
        for r, c, v in self._coo:
            if len(c) and (c.min() < 0 or c.max() >= self.n_vars):
                raise LpError("row references an unknown variable")
            if not np.all(np.isfinite(v)):
                raise LpError("non-finite coefficient")

    def canonical(self) -> tuple:
        a = self.A.copy()
        a.eliminate_zeros()
        return (tuple(self.var_names), tuple(self.row_names), self.lb.tobytes(), self.ub.tobytes(),
                self.c.tobytes(), tuple(self._sense), self.rhs.tobytes(), a.indptr.tobytes(),
                a.indices.tobytes(), a.data.tobytes(), float(self.offset).hex())

    def __eq__(self, other) -> bool:
        if not isinstance(other, LpProblem):
            return NotImplemented
        return self.canonical() == other.canonical()

    def __repr__(self) -> str:
        return f"LpProblem({self.name!r}, vars={self.n_vars}, rows={self.n_rows})"


@dataclass
class LpSolution:
    status: Status
    x: np.ndarray
    duals: np.ndarray
    objective: float
    backend: str = ""
    iterations: int = 0
    log: str = ""
    metrics: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    @classmethod
    def failed(cls, status: Status, problem: LpProblem, backend: str = "", log: str = "") -> LpSolution:
        nan_x = np.full(problem.n_vars, np.nan)
        nan_y = np.full(problem.n_rows, np.nan)
        return cls(Status(status), nan_x, nan_y, float("nan"), backend, log=log)


def solution_metrics(p: LpProblem, sol: LpSolution) -> dict[str, float]:
    """Feasibility residual, duality gap and complementary slackness of ``sol``.

    Duals follow the d(objective)/d(rhs) convention, so ``<=`` rows carry
    non-positive and ``>=`` rows non-negative duals in a minimization.
    """
    A, x, y, b = p.A, sol.x, sol.duals, p.rhs
    ax = A @ x
    code = p.sense_codes
    viol = np.where(code == 0, np.abs(ax - b),
                    np.where(code < 0, np.maximum(ax - b, 0), np.maximum(b - ax, 0)))
    scaled = viol / (1 + np.abs(b)) if len(b) else np.zeros(0)
    lb, ub = p.lb, p.ub
    bound_viol = np.maximum(np.maximum(lb - x, 0), np.maximum(x - ub, 0))
    bound_viol = np.where(np.isfinite(bound_viol), bound_viol, 0.0)
    bound_scaled = bound_viol / (1 + np.abs(np.where(np.isfinite(lb), lb, 0)))

    d = p.c - A.T @ y
    contrib = d * x
    use_lb = (d > 0) & np.isfinite(lb)
    use_ub = (d < 0) & np.isfinite(ub)
    contrib = np.where(use_lb, d * np.where(use_lb, lb, 0), contrib)
    contrib = np.where(use_ub, d * np.where(use_ub, ub, 0), contrib)
    dual_obj = float(b @ y + contrib.sum()) + p.offset
    primal_obj = float(p.c @ x) + p.offset
    gap = abs(primal_obj - dual_obj) / (1 + abs(primal_obj))

    wrong_sign = np.where(code < 0, np.maximum(y, 0), np.where(code > 0, np.maximum(-y, 0), 0.0))
    slack = np.abs(ax - b)
    cs = np.abs(y) * np.where(code == 0, 0.0, slack)
    cs_scaled = cs / ((1 + np.abs(y)) * (1 + np.abs(b))) if len(b) else np.zeros(0)
    return {
        "max_residual": float(max(scaled.max(initial=0), bound_scaled.max(initial=0))),
        "duality_gap": gap,
        "dual_sign_violation": float(wrong_sign.max(initial=0)),
        "complementary_slackness": float(cs_scaled.max(initial=0)),
        "primal_objective": primal_obj,
        "dual_objective": dual_obj,
    }


def check_solution(p: LpProblem, sol: LpSolution, feas_tol: float = 1e-6, gap_tol: float = 1e-6,
                   cs_tol: float = 1e-5) -> dict[str, float]:
    m = solution_metrics(p, sol)
    sol.metrics = m
    problems = []
    if m["max_residual"] > feas_tol:
        problems.append(f"primal residual {m['max_residual']:.3e} > {feas_tol:g}")
    if m["duality_gap"] > gap_tol:
        problems.append(f"duality gap {m['duality_gap']:.3e} > {gap_tol:g}")
    if m["complementary_slackness"] > cs_tol:
        problems.append(f"complementary slackness {m['complementary_slackness']:.3e} > {cs_tol:g}")
    if problems:
        raise ToleranceError(f"{p.name} ({sol.backend}): " + "; ".join(problems))
    return m
