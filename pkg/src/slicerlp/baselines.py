"""Comparison algorithms sharing the routing stage of :mod:`slicerlp.lpdrr`.

* ``lpr_round``: one LP solve, every stage rounded to its largest x at once.
* ``lpsrr_round``: sequential rounding against the first LP solution only.
* ``lprr_lp1``: dynamic rounding driven by the natural relaxation.

The exhaustive optimum for tiny instances lives in :mod:`slicerlp.oracle`
and is re-exported here.
"""
from __future__ import annotations

from .formulations import build_lp2
from .lp import solve_lp
from .lpdrr import (ITER_MAX, RHO, RoundingOutcome, RoundingState, _x_columns,
                    placement_from_vector, round_placement, run_pipeline)
from .model import Instance, Placement
from .oracle import OracleLimitError, OracleLimits, OracleResult, exact_enumerate

__all__ = [
    "OracleLimitError", "OracleLimits", "OracleResult", "exact_enumerate",
    "lpr_round", "lprr_lp1", "lpsrr_round", "one_shot_rounding",
]


def one_shot_rounding(inst: Instance) -> RoundingOutcome:
    model, idx = build_lp2(inst)
    state = RoundingState()
    if not _x_columns(idx):
        return RoundingOutcome(Placement({}), state)
    sol = solve_lp(model)
    state.lp_solves = 1
    if not sol.optimal:
        return RoundingOutcome(None, state, f"relaxation {sol.status.value.lower()}")
    best: dict = {}
    for j in _x_columns(idx):  # (k, s, node order): first maximum wins ties
        k, s = idx.keys[j][2], idx.keys[j][3]
        val = float(sol.values[j])
        if (k, s) not in best or val > best[(k, s)][1] + 1e-12:
            best[(k, s)] = (j, val)
    chosen = {j for j, _ in best.values()}
    state.xstar = {j: float(j in chosen) for j in _x_columns(idx)}
    placement, why = placement_from_vector(idx, state.xstar)
    return RoundingOutcome(placement, state, why)


def lpr_round(inst: Instance, *, rho: float = RHO, iter_max: int = ITER_MAX):
    return run_pipeline(inst, "lpr", one_shot_rounding, rho=rho, iter_max=iter_max)


def lpsrr_round(inst: Instance, *, rho: float = RHO, iter_max: int = ITER_MAX):
    return run_pipeline(inst, "lpsrr", lambda i: round_placement(i, dynamic=False),
                        rho=rho, iter_max=iter_max)


def lprr_lp1(inst: Instance, *, rho: float = RHO, iter_max: int = ITER_MAX):
    return run_pipeline(inst, "lprr-lp1",
                        lambda i: round_placement(i, dynamic=True, relaxation="LP-I"),
                        rho=rho, iter_max=iter_max)
