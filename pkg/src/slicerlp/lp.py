"""Sparse linear programs and the solver entry point.

Two backends are available behind :func:`solve_lp`:

``"highs"``
    scipy's HiGHS interface, the default for pipeline runs.
``"simplex"``
    the bundled bounded two-phase revised simplex (:mod:`slicerlp.simplex`).

Select one per call with ``backend=`` or for a whole block with
:func:`use_backend`.
"""
from __future__ import annotations

import contextlib
import contextvars
import enum
import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

FEAS_TOL = 1e-7
OPT_TOL = 1e-7


class Sense(str, enum.Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


class LpNumericalError(RuntimeError):
    """The solver could not certify a status within tolerances."""


class LpModel:
    """Minimization LP with bounded variables and sparse rows.

    Copies share row storage until a row is added, so pinning bounds on a
    copy is cheap.
    """

    def __init__(self, name: str = "lp"):
        self.name = name
        self.names: list = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.cost: list[float] = []
        self.row_cols: list[np.ndarray] = []
        self.row_vals: list[np.ndarray] = []
        self.senses: list[Sense] = []
        self.rhs: list[float] = []
        self.row_names: list = []
        self._matrix = None

    @property
    def num_vars(self) -> int:
        return len(self.names)

    @property
    def num_rows(self) -> int:
        return len(self.rhs)

    def add_variable(self, name: Hashable = None, lb: float = 0.0, ub: float = math.inf,
                     cost: float = 0.0) -> int:
        if lb > ub:
            raise ValueError(f"variable {name!r}: lower bound {lb} exceeds upper bound {ub}")
        self.names.append(name if name is not None else f"v{len(self.names)}")
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.cost.append(float(cost))
        return len(self.names) - 1

    def add_constraint(self, coeffs: Mapping[int, float] | Iterable[tuple[int, float]],
                       sense: Sense | str, rhs: float, name: Hashable = None) -> int:
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        merged: dict[int, float] = {}
        for j, a in items:
            if not 0 <= j < len(self.names):
                raise IndexError(f"constraint {name!r} references unknown variable {j}")
            merged[j] = merged.get(j, 0.0) + float(a)
        if not math.isfinite(rhs):
            raise ValueError(f"constraint {name!r}: right-hand side must be finite")
        cols = np.fromiter(merged.keys(), dtype=np.int64, count=len(merged))
        vals = np.fromiter(merged.values(), dtype=float, count=len(merged))
        self.row_cols.append(cols)
        self.row_vals.append(vals)
        self.senses.append(Sense(sense))
        self.rhs.append(float(rhs))
        self.row_names.append(name if name is not None else f"c{len(self.rhs) - 1}")
        self._matrix = None
        return len(self.rhs) - 1

    def copy(self) -> "LpModel":
        other = LpModel(self.name)
        other.names = list(self.names)
        other.lb = list(self.lb)
        other.ub = list(self.ub)
        other.cost = list(self.cost)
        other.row_cols = list(self.row_cols)
        other.row_vals = list(self.row_vals)
        other.senses = list(self.senses)
        other.rhs = list(self.rhs)
        other.row_names = list(self.row_names)
        other._matrix = self._matrix
        return other

    def matrix(self) -> sp.csr_matrix:
        if self._matrix is None or self._matrix.shape != (self.num_rows, self.num_vars):
            lengths = [len(c) for c in self.row_cols]
            indptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
            cols = np.concatenate(self.row_cols) if self.row_cols else np.zeros(0, np.int64)
            vals = np.concatenate(self.row_vals) if self.row_vals else np.zeros(0)
            self._matrix = sp.csr_matrix((vals, cols, indptr), shape=(self.num_rows, self.num_vars))
        return self._matrix

    def arrays(self):
        """(c, A, senses, b, lb, ub) as numpy/scipy objects."""
        return (np.asarray(self.cost, float), self.matrix(), list(self.senses),
                np.asarray(self.rhs, float), np.asarray(self.lb, float), np.asarray(self.ub, float))

    def objective_value(self, x: np.ndarray) -> float:
        return float(np.dot(self.cost, x))

    def max_violation(self, x: np.ndarray) -> float:
        """Largest bound or row violation at ``x``."""
        x = np.asarray(x, float)
        viol = 0.0
        lb, ub = np.asarray(self.lb), np.asarray(self.ub)
        viol = max(viol, float(np.max(lb - x, initial=0.0)), float(np.max(x - ub, initial=0.0)))
        if self.num_rows:
            act = self.matrix() @ x
            b = np.asarray(self.rhs)
            for i, sense in enumerate(self.senses):
                if sense is Sense.LE:
                    viol = max(viol, act[i] - b[i])
                elif sense is Sense.GE:
                    viol = max(viol, b[i] - act[i])
                else:
                    viol = max(viol, abs(act[i] - b[i]))
        return float(viol)


@dataclass
class LpSolution:
    status: Status
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    objective: float = math.nan
    iterations: int = 0
    backend: str = ""

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    def __getitem__(self, var: int) -> float:
        return float(self.values[var])


def fix_variable(model: LpModel, var: int, value: float) -> LpModel:
    """Return a copy of ``model`` with ``var`` collapsed to ``value``."""
    return fix_variables(model, {var: value})


def fix_variables(model: LpModel, pins: Mapping[int, float]) -> LpModel:
    out = model.copy()
    for var, value in pins.items():
        lo, hi = model.lb[var], model.ub[var]
        if not lo - FEAS_TOL <= value <= hi + FEAS_TOL:
            raise ValueError(
                f"cannot fix {model.names[var]!r} to {value}: outside bounds [{lo}, {hi}]")
        out.lb[var] = out.ub[var] = float(value)
    return out


# -- backends -------------------------------------------------------------------

_backend: contextvars.ContextVar[str] = contextvars.ContextVar("slicerlp_lp_backend",
                                                               default="highs")
BACKENDS = ("highs", "simplex")


@contextlib.contextmanager
def use_backend(name: str):
    if name not in BACKENDS:
        raise ValueError(f"unknown LP backend {name!r}; choose from {BACKENDS}")
    token = _backend.set(name)
    try:
        yield
    finally:
        _backend.reset(token)


def default_backend() -> str:
    return _backend.get()


def solve_lp(model: LpModel, backend: str | None = None) -> LpSolution:
    backend = backend or _backend.get()
    if backend == "highs":
        return _solve_highs(model)
    if backend == "simplex":
        from .simplex import solve_simplex

        return solve_simplex(model)
    raise ValueError(f"unknown LP backend {backend!r}")


def _solve_highs(model: LpModel) -> LpSolution:
    c, A, senses, b, lb, ub = model.arrays()
    n = len(c)
    if n == 0:
        return _solve_empty(model)
    le = [i for i, s in enumerate(senses) if s is Sense.LE]
    ge = [i for i, s in enumerate(senses) if s is Sense.GE]
    eq = [i for i, s in enumerate(senses) if s is Sense.EQ]
    A_ub = b_ub = A_eq = b_eq = None
    if le or ge:
        A_ub = sp.vstack([A[le], -A[ge]]).tocsr()
        b_ub = np.concatenate([b[le], -b[ge]])
    if eq:
        A_eq, b_eq = A[eq], b[eq]
    bounds = np.column_stack([np.where(np.isinf(lb), -np.inf, lb), np.where(np.isinf(ub), np.inf, ub)])
    opts = {"primal_feasibility_tolerance": FEAS_TOL, "dual_feasibility_tolerance": OPT_TOL}
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs-ds", options=opts)
    if res.status == 4 and "infeasible or unbounded" in (res.message or "").lower():
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                      method="highs-ds", options=dict(opts, presolve=False))
    nit = int(getattr(res, "nit", 0) or 0)
    if res.status == 0:
        x = np.clip(res.x, lb, ub)
        return LpSolution(Status.OPTIMAL, x, model.objective_value(x), nit, "highs")
    if res.status == 2:
        return LpSolution(Status.INFEASIBLE, iterations=nit, backend="highs")
    if res.status == 3:
        return LpSolution(Status.UNBOUNDED, iterations=nit, backend="highs")
    raise LpNumericalError(f"HiGHS failed on {model.name}: {res.message}")


def _solve_empty(model: LpModel) -> LpSolution:
    for i, s in enumerate(model.senses):
        b = model.rhs[i]
        if (s is Sense.LE and b < -FEAS_TOL) or (s is Sense.GE and b > FEAS_TOL) or (
                s is Sense.EQ and abs(b) > FEAS_TOL):
            return LpSolution(Status.INFEASIBLE, backend="trivial")
    return LpSolution(Status.OPTIMAL, np.zeros(0), 0.0, 0, "trivial")


# -- export -------------------------------------------------------------------


def write_mps(model: LpModel, path) -> None:
    """Write ``model`` in fixed-format MPS for cross-checking with external solvers."""
    from pathlib import Path

    Path(path).write_text(mps_text(model))


def mps_text(model: LpModel) -> str:
    rname = [f"R{i}" for i in range(model.num_rows)]
    cname = [f"C{j}" for j in range(model.num_vars)]
    tag = {Sense.LE: "L", Sense.GE: "G", Sense.EQ: "E"}
    lines = [f"NAME          {model.name[:8]}", "ROWS", " N  OBJ"]
    lines += [f" {tag[s]}  {rname[i]}" for i, s in enumerate(model.senses)]
    lines.append("COLUMNS")
    csc = model.matrix().tocsc()
    for j in range(model.num_vars):
        entries = []
        if model.cost[j] != 0:
            entries.append(("OBJ", model.cost[j]))
        lo, hi = csc.indptr[j], csc.indptr[j + 1]
        entries += [(rname[i], a) for i, a in zip(csc.indices[lo:hi], csc.data[lo:hi])]
        if not entries:
            entries.append(("OBJ", 0.0))
        for r, a in entries:
            lines.append(f"    {cname[j]:<8}  {r:<8}  {a:>12.12g}")
    lines.append("RHS")
    for i, b in enumerate(model.rhs):
        if b != 0:
            lines.append(f"    RHS       {rname[i]:<8}  {b:>12.12g}")
    lines.append("BOUNDS")
    for j in range(model.num_vars):
        lo, hi = model.lb[j], model.ub[j]
        if lo == hi:
            lines.append(f" FX BND       {cname[j]:<8}  {lo:>12.12g}")
            continue
        if math.isinf(lo):
            lines.append(f" MI BND       {cname[j]:<8}")
        elif lo != 0:
            lines.append(f" LO BND       {cname[j]:<8}  {lo:>12.12g}")
        if not math.isinf(hi):
            lines.append(f" UP BND       {cname[j]:<8}  {hi:>12.12g}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"
