"""Two-stage LP dynamic rounding-and-refinement.

Stage one rounds the placement variables of the compact relaxation one at
a time, re-solving the relaxation after each accepted pin. Stage two fixes
the placement and re-solves the routing LP with per-service delay weights
until every recomputed end-to-end delay meets its deadline.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .decompose import recompute_delays
from .formulations import (OMEGA_CAP, VarIndex, build_lp1, build_lp2, fix_placement,
                           set_routing_weights)
from .lp import LpNumericalError, LpSolution, fix_variables, solve_lp
from .model import (Instance, Placement, RoutingPlan, placement_violations, require_valid,
                    validate_instance)
from .report import ERROR, FEASIBLE, PLACEMENT_FAILED, ROUTING_FAILED, SolveReport

log = logging.getLogger(__name__)

INT_TOL = 1e-6
DEADLINE_TOL = 1e-7
RHO = 5.0
ITER_MAX = 10


@dataclass
class RoundingState:
    pins: dict = field(default_factory=dict)  # LP column -> 0/1
    xstar: dict = field(default_factory=dict)  # LP column -> current reference value
    lp_solves: int = 0
    trace: list = field(default_factory=list)


@dataclass
class RoundingOutcome:
    placement: Optional[Placement]
    state: RoundingState
    failure: str = ""

    @property
    def ok(self) -> bool:
        return self.placement is not None

    @property
    def lp_solves(self) -> int:
        return self.state.lp_solves


@dataclass
class RefinementState:
    weights: dict
    rho: float = RHO
    iter_max: int = ITER_MAX
    iteration: int = 0
    violations: dict = field(default_factory=dict)  # k -> times violated


@dataclass
class RoutingOutcome:
    routing: Optional[RoutingPlan]
    state: RefinementState
    lp_solves: int = 0
    failure: str = ""
    violators: list = field(default_factory=list)
    last_plan: Optional[RoutingPlan] = None

    @property
    def ok(self) -> bool:
        return self.routing is not None


def _x_columns(idx: VarIndex) -> list:
    """Placement columns ordered by (service, stage, node order) for tie-breaking."""
    order = idx.instance.network.node_index
    cols = [(key[2], key[3], order[key[1]], j) for key, j in idx.of_kind("x")]
    cols.sort()
    return [c[-1] for c in cols]


def _argmax_fractional(xstar: dict, cols: list) -> Optional[int]:
    best, best_val = None, -1.0
    for j in cols:
        val = xstar[j]
        if INT_TOL < val < 1 - INT_TOL and val > best_val + 1e-12:
            best, best_val = j, val
    return best


def placement_from_vector(idx: VarIndex, xstar: dict) -> tuple[Optional[Placement], str]:
    """Turn a rounded x vector into a Placement, or explain why it is not one."""
    inst = idx.instance
    chosen: dict = {}
    for key, j in idx.of_kind("x"):
        val = xstar[j]
        if INT_TOL < val < 1 - INT_TOL:
            return None, f"x{key[1:]} = {val:.6g} is fractional"
        if val >= 1 - INT_TOL:
            chosen.setdefault((key[2], key[3]), []).append(key[1])
    for k, svc in enumerate(inst.services):
        for s in range(1, svc.length + 1):
            hosts = chosen.get((k, s), [])
            if len(hosts) != 1:
                return None, f"service {svc.id} stage {s}: {len(hosts)} hosting nodes"
    placement = Placement({ks: hosts[0] for ks, hosts in chosen.items()})
    bad = placement_violations(inst, placement)
    if bad:
        return None, str(bad[0])
    return placement, ""


def round_placement(inst: Instance, *, dynamic: bool = True, relaxation: str = "LP-II",
                    model_idx: tuple | None = None) -> RoundingOutcome:
    """LP rounding of the VNF placement.

    With ``dynamic`` the reference solution is replaced by the optimum of
    every feasible modified LP; without it the first LP solution is kept
    throughout (only the pinned entry is updated).
    """
    require_valid(inst)
    if model_idx is None:
        model_idx = build_lp2(inst) if relaxation == "LP-II" else build_lp1(inst)
    model, idx = model_idx
    cols = _x_columns(idx)
    state = RoundingState()
    if not cols:  # pure routing: nothing to place, routing feasibility is decided later
        return RoundingOutcome(Placement({}), state)

    sol = solve_lp(model)
    state.lp_solves += 1
    if not sol.optimal:
        return RoundingOutcome(None, state, f"relaxation {sol.status.value.lower()}")
    state.xstar = {j: float(sol.values[j]) for j in cols}

    while True:
        for j in cols:
            if state.xstar[j] >= 1 - INT_TOL and j not in state.pins:
                state.pins[j] = 1
        j0 = _argmax_fractional(state.xstar, cols)
        if j0 is None:
            break
        state.pins[j0] = 1
        trial = solve_lp(fix_variables(model, state.pins))
        state.lp_solves += 1
        if trial.optimal:
            state.trace.append((idx.keys[j0], state.xstar[j0], 1))
            if dynamic:
                state.xstar = {j: float(trial.values[j]) for j in cols}
            else:
                state.xstar[j0] = 1.0
        else:
            state.trace.append((idx.keys[j0], state.xstar[j0], 0))
            state.pins[j0] = 0
            state.xstar[j0] = 0.0

    placement, why = placement_from_vector(idx, state.xstar)
    if placement is None:
        return RoundingOutcome(None, state, why)
    return RoundingOutcome(placement, state)


def _segment_flows(idx: VarIndex, sol: LpSolution) -> dict:
    inst = idx.instance
    return {(k, s): idx.segment_flows(sol, k, s, tol=1e-9)
            for k, svc in enumerate(inst.services) for s in range(svc.length + 1)}


def refine_routing(inst: Instance, placement: Placement, *, rho: float = RHO,
                   iter_max: int = ITER_MAX, model_idx: tuple | None = None) -> RoutingOutcome:
    """Iterative LP refinement of the routing for a fixed placement."""
    if rho <= 1:
        raise ValueError("rho must exceed 1")
    if iter_max < 1:
        raise ValueError("iter_max must be at least 1")
    model, idx = model_idx if model_idx is not None else build_lp2(inst)
    base = fix_placement(model, idx, placement)
    state = RefinementState({k: 1.0 for k in range(len(inst.services))}, rho, iter_max)
    out = RoutingOutcome(None, state)
    while state.iteration < iter_max:
        sol = solve_lp(set_routing_weights(base, idx, state.weights))
        out.lp_solves += 1
        if not sol.optimal:
            out.failure = "routing LP infeasible for the fixed placement"
            return out
        plan = recompute_delays(inst, placement, _segment_flows(idx, sol))
        out.last_plan = plan
        violators = [k for k, svc in enumerate(inst.services)
                     if plan.service_delay[k] > svc.deadline + DEADLINE_TOL]
        out.violators = violators
        if not violators:
            out.routing = plan
            return out
        for k in violators:
            state.weights[k] = min(state.weights[k] * rho, OMEGA_CAP)
            state.violations[k] = state.violations.get(k, 0) + 1
        state.iteration += 1
    ids = [inst.services[k].id for k in out.violators]
    out.failure = f"deadlines still violated after {iter_max} iterations: services {ids}"
    return out


def uncoverable_stages(inst: Instance) -> str:
    """Non-empty description when the only defects are stages without admissible nodes.

    Such instances are valid input but trivially infeasible; any other
    violation raises.
    """
    bad = validate_instance(inst)
    if not bad or any(v.rule != "stage uncoverable" for v in bad):
        return ""
    return "; ".join(map(str, bad))


def lp_solve_bound(inst: Instance, iter_max: int = ITER_MAX) -> int:
    return len(inst.network.cloud) * inst.total_functions + iter_max


def run_pipeline(inst: Instance, algorithm: str, rounding: Callable[[Instance], RoundingOutcome],
                 *, rho: float = RHO, iter_max: int = ITER_MAX, check_bound: bool = False) -> SolveReport:
    """Placement by ``rounding`` followed by routing refinement; never raises on LP trouble."""
    t0 = time.perf_counter()
    report = SolveReport(algorithm, ERROR, lp_bound=lp_solve_bound(inst, iter_max))
    uncovered = uncoverable_stages(inst)
    if uncovered:
        report.status = PLACEMENT_FAILED
        report.failure = uncovered
        return report
    require_valid(inst)
    try:
        rounded = rounding(inst)
        report.placement_solves = rounded.lp_solves
        if not rounded.ok:
            report.status = PLACEMENT_FAILED
            report.failure = rounded.failure
        else:
            placement = rounded.placement
            report.placement = placement
            report.activated_nodes = placement.activated
            routed = refine_routing(inst, placement, rho=rho, iter_max=iter_max)
            report.routing_solves = routed.lp_solves
            report.weights = dict(routed.state.weights)
            if not routed.ok:
                report.status = ROUTING_FAILED
                report.failure = routed.failure
                report.routing = routed.last_plan
            else:
                _fill_feasible(inst, report, placement, routed.routing)
    except LpNumericalError as exc:
        log.warning("%s: LP numerical failure: %s", algorithm, exc)
        report.status = ERROR
        report.failure = str(exc)
    report.lp_solves = report.placement_solves + report.routing_solves
    report.wall_time_ms = (time.perf_counter() - t0) * 1e3
    if check_bound:
        assert report.lp_solves <= report.lp_bound, (
            f"{algorithm} solved {report.lp_solves} LPs, bound {report.lp_bound}")
    return report


def _fill_feasible(inst: Instance, report: SolveReport, placement: Placement,
                   plan: RoutingPlan) -> None:
    report.status = FEASIBLE
    report.routing = plan
    nfv = sum(svc.admissible(s)[placement.assignment[(k, s)]]
              for k, svc in enumerate(inst.services) for s in range(1, svc.length + 1))
    link = sum(plan.stage_delay.values())
    report.nfv_delay = nfv
    report.link_delay = link
    report.objective = placement.activated + inst.sigma * (nfv + link)
    report.paths_exceed_budget = sorted(
        ks for ks, paths in plan.paths.items() if len(paths) > inst.path_budget)


def solve(inst: Instance, *, rho: float = RHO, iter_max: int = ITER_MAX) -> SolveReport:
    """Dynamic rounding on the compact relaxation, then routing refinement."""
    return run_pipeline(inst, "lpdrr", lambda i: round_placement(i, dynamic=True),
                        rho=rho, iter_max=iter_max, check_bound=True)
