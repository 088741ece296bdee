"""Bounded-variable two-phase revised simplex.

Rows are turned into equalities with one bounded slack each; rows whose
slack cannot absorb the initial residual get an artificial column, and
phase 1 drives those to zero. The basis inverse is kept dense and updated
with eta pivots, refactorized every ``REFACTOR`` iterations.

Pricing is Dantzig (largest reduced cost) until ``3 * (m + n)`` iterations
of a phase have elapsed, then Bland's rule (smallest eligible index on both
entering and leaving choices), which guarantees termination on degenerate
problems.
"""
from __future__ import annotations

import numpy as np

from .lp import FEAS_TOL, OPT_TOL, LpModel, LpNumericalError, LpSolution, Sense, Status

PIVOT_TOL = 1e-9
REFACTOR = 50


class _Tableau:
    def __init__(self, M, b, lb, ub):
        self.M = M
        self.b = b
        self.lb = lb
        self.ub = ub
        self.m, self.N = M.shape
        self.x = np.zeros(self.N)
        self.basis = np.zeros(self.m, dtype=np.int64)
        self.is_basic = np.zeros(self.N, dtype=bool)
        self.Binv = np.eye(self.m)
        self.iterations = 0

    def refactor(self):
        B = self.M[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise LpNumericalError("singular basis") from exc
        nonbasic = ~self.is_basic
        rhs = self.b - self.M[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.Binv @ rhs

    def run(self, cost, bland_after: int, max_iter: int) -> str:
        """Iterate to optimality for ``cost``; returns "optimal" or "unbounded"."""
        M, lb, ub = self.M, self.lb, self.ub
        movable = lb < ub
        free = np.isinf(lb) & np.isinf(ub)
        phase_iter = 0
        self.refactor()
        while True:
            if phase_iter >= max_iter:
                raise LpNumericalError(f"iteration limit {max_iter} reached")
            if phase_iter and phase_iter % REFACTOR == 0:
                self.refactor()
            bland = phase_iter >= bland_after
            x = self.x
            pi = cost[self.basis] @ self.Binv
            d = cost - pi @ M
            nonbasic = ~self.is_basic & movable
            up = nonbasic & ((x == lb) | free) & (d < -OPT_TOL)
            down = nonbasic & ((x == ub) | free) & (d > OPT_TOL)
            cand = np.flatnonzero(up | down)
            if cand.size == 0:
                return "optimal"
            if bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if up[q] else -1.0

            alpha = self.Binv @ M[:, q]
            xB = x[self.basis]
            lbB, ubB = lb[self.basis], ub[self.basis]
            delta = direction * alpha
            t_rows = np.full(self.m, np.inf)
            dec = delta > PIVOT_TOL
            inc = delta < -PIVOT_TOL
            with np.errstate(invalid="ignore", divide="ignore"):
                t_rows[dec] = (xB[dec] - lbB[dec]) / delta[dec]
                t_rows[inc] = (ubB[inc] - xB[inc]) / -delta[inc]
            t_rows = np.where(np.isnan(t_rows), np.inf, np.maximum(t_rows, 0.0))
            t_flip = ub[q] - lb[q]
            t_min = float(np.min(t_rows)) if self.m else np.inf
            if not np.isfinite(t_min) and not np.isfinite(t_flip):
                return "unbounded"

            self.iterations += 1
            phase_iter += 1
            if t_flip <= t_min:
                x[q] = ub[q] if direction > 0 else lb[q]
                x[self.basis] = xB - t_flip * delta
                continue

            ties = np.flatnonzero(t_rows <= t_min + 1e-12)
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])
            leaving = int(self.basis[r])
            x[self.basis] = xB - t_min * delta
            x[q] = x[q] + direction * t_min
            x[leaving] = lbB[r] if delta[r] > 0 else ubB[r]

            piv = alpha[r]
            row = self.Binv[r] / piv
            self.Binv -= np.outer(alpha, row)
            self.Binv[r] = row
            self.basis[r] = q
            self.is_basic[leaving] = False
            self.is_basic[q] = True


def _initial_point(lb, ub):
    x = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
    return x


def solve_simplex(model: LpModel, max_iter: int | None = None) -> LpSolution:
    c, A, senses, b, lb, ub = model.arrays()
    m, n = A.shape
    A = A.toarray()

    slack_lb = np.zeros(m)
    slack_ub = np.zeros(m)
    for i, s in enumerate(senses):
        if s is Sense.LE:
            slack_ub[i] = np.inf
        elif s is Sense.GE:
            slack_lb[i] = -np.inf

    x0 = _initial_point(lb, ub)
    resid = b - A @ x0
    needs_art = (resid < slack_lb - FEAS_TOL) | (resid > slack_ub + FEAS_TOL)
    art_rows = np.flatnonzero(needs_art)
    slack_val = np.clip(resid, slack_lb, slack_ub)
    art_sign = np.sign(resid[art_rows] - slack_val[art_rows])
    n_art = len(art_rows)

    art_cols = np.zeros((m, n_art))
    art_cols[art_rows, np.arange(n_art)] = art_sign
    M = np.hstack([A, np.eye(m), art_cols])
    all_lb = np.concatenate([lb, slack_lb, np.zeros(n_art)])
    all_ub = np.concatenate([ub, slack_ub, np.full(n_art, np.inf)])
    tab = _Tableau(M, b, all_lb, all_ub)
    tab.x[:n] = x0
    tab.x[n:n + m] = slack_val
    tab.x[n + m:] = np.abs(resid[art_rows] - slack_val[art_rows])
    basis = np.arange(n, n + m)
    basis[art_rows] = n + m + np.arange(n_art)
    tab.basis = basis
    tab.is_basic[basis] = True

    size = m + n
    bland_after = 3 * size
    limit = max_iter if max_iter is not None else 50 * size + 1000

    if n_art:
        phase1 = np.concatenate([np.zeros(n + m), np.ones(n_art)])
        tab.run(phase1, bland_after, limit)
        tab.refactor()
        infeas = float(np.sum(tab.x[n + m:]))
        if infeas > FEAS_TOL * max(1.0, float(np.max(np.abs(b), initial=0.0))):
            return LpSolution(Status.INFEASIBLE, iterations=tab.iterations, backend="simplex")
        # artificials may stay basic at zero but can never move again
        tab.ub[n + m:] = 0.0
        tab.x[n + m:] = np.clip(tab.x[n + m:], 0.0, 0.0)

    cost = np.concatenate([c, np.zeros(m + n_art)])
    outcome = tab.run(cost, bland_after, limit)
    if outcome == "unbounded":
        return LpSolution(Status.UNBOUNDED, iterations=tab.iterations, backend="simplex")
    tab.refactor()
    x = np.clip(tab.x[:n], lb, ub)
    viol = model.max_violation(x)
    if viol > 1e-6 * max(1.0, float(np.max(np.abs(b), initial=0.0))):
        raise LpNumericalError(f"final point violates constraints by {viol:.3g}")
    return LpSolution(Status.OPTIMAL, x, model.objective_value(x), tab.iterations, "simplex")
