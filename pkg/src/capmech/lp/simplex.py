"""Reference primal simplex for small and medium problems.

Bounded-variable revised simplex with two phases. The basis is held as a
sparse LU factorization plus a product-form eta file, refactorized every
``refactor_every`` pivots. Pricing is Dantzig's rule; after a run of
degenerate pivots it switches to Bland's rule, which cannot cycle, and
returns to Dantzig once the objective moves again.
"""

from __future__ import annotations

import logging
import time

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from capmech.lp.problem import INF, LpError, LpProblem, LpSolution, Status

log = logging.getLogger(__name__)

AT_LOWER, AT_UPPER, BASIC = 0, 1, 2


class SizeGuardError(LpError):
    pass


class NumericalBreakdown(LpError):
    pass


class _Basis:
    def __init__(self, M: sp.csc_matrix, cols: np.ndarray):
        self.M = M
        self.cols = cols.copy()
        self.refactor()

    def refactor(self) -> None:
        B = self.M[:, self.cols].tocsc()
        try:
            self.lu = splu(B, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise NumericalBreakdown(f"basis factorization failed: {exc}; {_condition_report(B)}") from exc
        self.etas: list[tuple[int, np.ndarray]] = []

    def ftran(self, a: np.ndarray) -> np.ndarray:
        z = self.lu.solve(a)
        for r, eta in self.etas:
            zr = z[r]
            if zr != 0.0:
                z += eta * zr
                z[r] = eta[r] * zr
        return z

    def btran(self, c: np.ndarray) -> np.ndarray:
        w = c.copy()
        for r, eta in reversed(self.etas):
            w[r] = w @ eta
        return self.lu.solve(w, trans="T")

    def pivot(self, r: int, alpha: np.ndarray, entering: int) -> None:
        eta = -alpha / alpha[r]
        eta[r] = 1.0 / alpha[r]
        self.etas.append((r, eta))
        self.cols[r] = entering


def _condition_report(B: sp.spmatrix) -> str:
    if B.shape[0] <= 2000:
        try:
            return f"condition estimate {np.linalg.cond(B.toarray()):.3e}"
        except np.linalg.LinAlgError:
            return "condition estimate unavailable"
    return f"basis {B.shape[0]}x{B.shape[1]} too large for a condition estimate"


class _Standard:
    """All variables shifted to [0, u]; slacks and artificials appended."""

    def __init__(self, p: LpProblem):
        A = p.A.tocsc()
        m, n = A.shape
        lb, ub, c = p.lb, p.ub, p.c
        b = p.rhs.astype(float).copy()
        offset = p.offset

        cols, costs, uppers = [], [], []
        self.recover = []  # (kind, column position(s), bound)
        pos = 0
        for j in range(n):
            col = A[:, j]
            lo, hi = lb[j], ub[j]
            if np.isfinite(lo):
                cols.append(col)
                costs.append(c[j])
                uppers.append(hi - lo)
                if lo != 0:
                    b -= col.toarray().ravel() * lo
                    offset += c[j] * lo
                self.recover.append(("shift", pos, lo))
                pos += 1
            elif np.isfinite(hi):
                cols.append(-col)
                costs.append(-c[j])
                uppers.append(INF)
                b -= col.toarray().ravel() * hi
                offset += c[j] * hi
                self.recover.append(("flip", pos, hi))
                pos += 1
            else:
                cols += [col, -col]
                costs += [c[j], -c[j]]
                uppers += [INF, INF]
                self.recover.append(("free", pos, 0.0))
                pos += 2
        n_struct = pos

        code = p.sense_codes
        slack_rows = np.nonzero(code != 0)[0]
        slack_sign = -code[slack_rows].astype(float)  # <= gets +s, >= gets -s
        S = sp.csc_matrix((slack_sign, (slack_rows, np.arange(len(slack_rows)))), shape=(m, len(slack_rows)))
        self.slack_of_row = np.full(m, -1)
        self.slack_of_row[slack_rows] = n_struct + np.arange(len(slack_rows))

        # crash basis: a slack where its sign matches the residual, else an artificial
        basis = np.empty(m, dtype=int)
        art_rows, art_sign = [], []
        n_slack = len(slack_rows)
        for i in range(m):
            s = self.slack_of_row[i]
            sign = code[i] and -code[i]
            if s >= 0 and sign * b[i] >= 0:
                basis[i] = s
            else:
                basis[i] = n_struct + n_slack + len(art_rows)
                art_rows.append(i)
                art_sign.append(1.0 if b[i] >= 0 else -1.0)
        Art = sp.csc_matrix((art_sign, (art_rows, np.arange(len(art_rows)))), shape=(m, len(art_rows)))

        parts = [sp.hstack(cols, format="csc") if cols else sp.csc_matrix((m, 0)), S, Art]
        self.M = sp.hstack(parts, format="csc")
        self.MT = self.M.T.tocsr()
        self.m = m
        self.n_struct = n_struct
        self.n_art = len(art_rows)
        self.art_start = n_struct + n_slack
        self.c = np.concatenate([np.array(costs, dtype=float), np.zeros(n_slack + self.n_art)])
        self.u = np.concatenate([np.array(uppers, dtype=float), np.full(n_slack + self.n_art, INF)])
        self.b = b
        self.offset = offset
        self.basis = basis

    def original_x(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(len(self.recover))
        for j, (kind, pos, bound) in enumerate(self.recover):
            if kind == "shift":
                out[j] = bound + x[pos]
            elif kind == "flip":
                out[j] = bound - x[pos]
            else:
                out[j] = x[pos] - x[pos + 1]
        return out


def reference_simplex(p: LpProblem, max_rows: int = 5000, max_cols: int = 20000, max_iter: int | None = None,
                      refactor_every: int = 64, degenerate_switch: int = 50, tol: float = 1e-9) -> LpSolution:
    """Solve ``p`` and return primal values and row duals from the final basis."""
    p.check()
    if p.n_rows > max_rows or p.n_vars > max_cols:
        raise SizeGuardError(f"{p.name}: {p.n_rows} rows x {p.n_vars} columns exceeds the reference "
                             f"simplex guard ({max_rows} x {max_cols})")
    t0 = time.perf_counter()
    std = _Standard(p)
    m, M, u = std.m, std.M, std.u
    n_total = M.shape[1]
    if max_iter is None:
        max_iter = 50 * (m + n_total) + 1000

    state = np.full(n_total, AT_LOWER, dtype=np.int8)
    state[std.basis] = BASIC
    x = np.zeros(n_total)
    if m == 0:
        if np.any((std.c < 0) & (u == INF)):
            return _finish(p, std, x, None, "unbounded", 0, t0)
        x = np.where(std.c < 0, u, 0.0)
        return _finish(p, std, x, np.zeros(0), "optimal", 0, t0)
    basis = _Basis(M, std.basis)
    x[basis.cols] = basis.ftran(std.b)
    iterations = 0

    def run_phase(cost: np.ndarray) -> str:
        nonlocal iterations
        cost_scale = max(1.0, float(np.abs(cost).max(initial=0)))
        dtol = tol * cost_scale
        degenerate = 0
        bland = False
        while True:
            if iterations >= max_iter:
                raise NumericalBreakdown(f"{p.name}: iteration limit {max_iter} reached")
            if len(basis.etas) >= refactor_every:
                basis.refactor()
                _recompute(basis, std, x, state)
            y = basis.btran(cost[basis.cols])
            d = cost - std.MT @ y
            eligible = ((state == AT_LOWER) & (d < -dtol) & (u > 0)) | ((state == AT_UPPER) & (d > dtol))
            cand = np.nonzero(eligible)[0]
            if len(cand) == 0:
                return "optimal"
            q = int(cand[0]) if bland else int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if state[q] == AT_LOWER else -1.0
            alpha = basis.ftran(M[:, q].toarray().ravel())
            rate = direction * alpha
            xb = x[basis.cols]
            ub_b = u[basis.cols]
            ptol = 1e-9 * max(1.0, float(np.abs(alpha).max(initial=0)))
            theta = np.full(m, INF)
            dec = rate > ptol
            inc = rate < -ptol
            theta[dec] = np.maximum(xb[dec], 0.0) / rate[dec]
            theta[inc] = np.maximum(ub_b[inc] - xb[inc], 0.0) / -rate[inc]
            best = float(theta.min(initial=INF))
            flip = u[q]
            if best == INF and flip == INF:
                return "unbounded"
            iterations += 1
            if flip <= best:
                x[basis.cols] -= rate * flip
                x[q] = flip if state[q] == AT_LOWER else 0.0
                state[q] = AT_UPPER if state[q] == AT_LOWER else AT_LOWER
                step = flip
            else:
                ties = np.nonzero(theta <= best + 1e-12 * max(1.0, best))[0]
                if bland:
                    r = int(ties[np.argmin(basis.cols[ties])])
                else:
                    r = int(ties[np.argmax(np.abs(alpha[ties]))])
                step = best
                leaving = basis.cols[r]
                x[basis.cols] -= rate * step
                x[q] += direction * step
                if rate[r] > 0:
                    x[leaving], state[leaving] = 0.0, AT_LOWER
                else:
                    x[leaving], state[leaving] = u[leaving], AT_UPPER
                state[q] = BASIC
                basis.pivot(r, alpha, q)
            if step <= 1e-12:
                degenerate += 1
                if degenerate >= degenerate_switch:
                    bland = True
            else:
                degenerate = 0
                bland = False

    if std.n_art:
        phase1 = np.zeros(n_total)
        phase1[std.art_start:] = 1.0
        status = run_phase(phase1)
        infeas = float(x[std.art_start:].sum())
        if status != "optimal" or infeas > 1e-7 * (1 + float(np.abs(std.b).max(initial=0))):
            return _finish(p, std, x, None, "infeasible", iterations, t0)
        u[std.art_start:] = 0.0
        x[std.art_start:] = np.where(state[std.art_start:] == BASIC, x[std.art_start:], 0.0)
    status = run_phase(std.c)
    if status == "unbounded":
        return _finish(p, std, x, None, "unbounded", iterations, t0)
    basis.refactor()
    _recompute(basis, std, x, state)
    y = basis.btran(std.c[basis.cols])
    return _finish(p, std, x, y, "optimal", iterations, t0)


def _recompute(basis: _Basis, std: _Standard, x: np.ndarray, state: np.ndarray) -> None:
    nonbasic = state != BASIC
    r = std.b - std.M[:, nonbasic] @ x[nonbasic]
    xb = basis.ftran(r)
    ub = std.u[basis.cols]
    xb = np.where((xb < 0) & (xb > -1e-9), 0.0, xb)
    xb = np.where((xb > ub) & (xb < ub + 1e-9), ub, xb)
    x[basis.cols] = xb


def _finish(p, std, x, y, status, iterations, t0) -> LpSolution:
    elapsed = time.perf_counter() - t0
    log.debug("reference simplex %s: %s after %d iterations (%.2fs)", p.name, status, iterations, elapsed)
    if status != "optimal":
        return LpSolution.failed(Status(status), p, "reference", log=f"{iterations} iterations")
    xo = std.original_x(x)
    y = np.zeros(p.n_rows) if y is None else y
    obj = float(p.c @ xo) + p.offset
    return LpSolution(Status.OPTIMAL, xo, y, obj, "reference", iterations, log=f"{elapsed:.3f}s")
