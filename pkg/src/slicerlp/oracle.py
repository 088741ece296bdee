"""Exhaustive optimum for tiny instances.

Every admissible placement is enumerated, cheapest lower bound first. For a
placement, routing is solved exactly over explicit simple paths: each flow
segment gets a delay cap chosen from its distinct path delays, caps are
visited in order of increasing total (best-first), and the first cap vector
that meets every deadline and admits a capacity-feasible path split is the
routing optimum. Segment delay is then the largest delay of a path that may
carry flow, which is exactly the max-over-paths delay of the MILP without a
limit on the number of paths.
"""
from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .model import (Instance, Network, Path, Placement, RoutingPlan, require_valid,
                    shortest_delays_from, validate_instance)
from .report import FEASIBLE, INFEASIBLE, SolveReport


class OracleLimitError(RuntimeError):
    """The instance is too large for exhaustive enumeration."""


@dataclass
class OracleLimits:
    max_placements: int = 100_000
    max_paths: int = 5_000  # simple paths per node pair
    max_routing_checks: int = 20_000  # cap vectors examined per placement


@dataclass
class OracleResult:
    status: str
    objective: float = math.inf
    placement: Placement | None = None
    stage_delay: dict = field(default_factory=dict)
    activated_nodes: int = 0
    total_delay: float = math.nan
    enumerated: int = 0
    routing_checks: int = 0
    routing: RoutingPlan | None = None

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE


def simple_paths(net: Network, a, b, max_paths: int, support=None) -> list[tuple[tuple, float]]:
    """All simple a->b paths as (link tuple, delay); ``support`` restricts usable links."""
    if a == b:
        return [((), 0.0)]
    out = []
    stack = [(a, (), 0.0, frozenset([a]))]
    while stack:
        node, links, delay, seen = stack.pop()
        for e in reversed(net.out_links.get(node, ())):
            if support is not None and e not in support:
                continue
            link = net.links[e]
            if link.j in seen:
                continue
            if link.j == b:
                out.append((links + (e,), delay + link.delay))
                if len(out) > max_paths:
                    raise OracleLimitError(f"more than {max_paths} simple paths {a}->{b}")
            else:
                stack.append((link.j, links + (e,), delay + link.delay, seen | {link.j}))
    out.sort(key=lambda p: (p[1], p[0]))
    return out


def _split(groups, capacity: dict):
    """Unit split of every group over its allowed paths within link capacities.

    ``groups`` is a list of (rate, [link tuples]). Returns one fraction list
    per group, or None when no such split exists.
    """
    n = sum(len(paths) for _, paths in groups)
    rows: dict = {}
    col = 0
    A_eq = np.zeros((len(groups), n))
    for g, (rate, paths) in enumerate(groups):
        for links in paths:
            A_eq[g, col] = 1.0
            for e in links:
                if e in capacity and rate:
                    rows.setdefault(e, {})
                    rows[e][col] = rows[e].get(col, 0.0) + rate
            col += 1
    if not all(paths for _, paths in groups):
        return None
    if not rows:
        return [[1.0] + [0.0] * (len(paths) - 1) for _, paths in groups]
    A_ub = np.zeros((len(rows), n))
    b_ub = np.zeros(len(rows))
    for r, (e, coefs) in enumerate(rows.items()):
        for c, a in coefs.items():
            A_ub[r, c] = a
        b_ub[r] = capacity[e] + 1e-7
    res = linprog(np.zeros(n), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=np.ones(len(groups)),
                  bounds=(0, None), method="highs")
    if res.status != 0:
        return None
    out, col = [], 0
    for _, paths in groups:
        out.append([float(f) for f in res.x[col:col + len(paths)]])
        col += len(paths)
    return out


def min_max_delay(net: Network, flows: dict, a, b, max_paths: int = 5_000) -> float:
    """Smallest achievable largest path delay over decompositions of a unit a->b flow.

    Paths are restricted to the flow's support and may not carry more than
    the flow on any link; leftover flow is a circulation.
    """
    if a == b:
        return 0.0
    support = {e for e, f in flows.items() if f > 1e-9}
    paths = simple_paths(net, a, b, max_paths, support)
    if not paths:
        raise ValueError(f"no {a}->{b} path in the flow support")
    caps = {e: flows[e] for e in support}
    for cap in sorted({d for _, d in paths}):
        allowed = [links for links, d in paths if d <= cap]
        if _split([(1.0, allowed)], caps) is not None:
            return cap
    raise ValueError(f"flow {a}->{b} does not carry a full unit")


class _Router:
    """Exact routing for fixed placements; caches path sets per node pair."""

    def __init__(self, inst: Instance, limits: OracleLimits):
        self.inst = inst
        self.limits = limits
        self.net = inst.network
        self._paths: dict = {}
        self.capacity = {e: l.capacity for e, l in enumerate(self.net.links)
                         if np.isfinite(l.capacity)}
        self.checks = 0

    def paths(self, a, b):
        if (a, b) not in self._paths:
            self._paths[(a, b)] = simple_paths(self.net, a, b, self.limits.max_paths)
        return self._paths[(a, b)]

    def route(self, placement: Placement, nfv: list[float], budget: float = math.inf):
        """Minimum total segment delay for ``placement``; None when unroutable.

        Cap vectors whose total exceeds ``budget`` are not explored.
        """
        inst = self.inst
        segs = []  # (k, s, rate, paths, levels)
        fixed = {}
        for k, svc in enumerate(inst.services):
            for s in range(svc.length + 1):
                a = inst.endpoint(k, s, placement)
                b = inst.endpoint(k, s + 1, placement)
                if a == b:
                    fixed[(k, s)] = 0.0
                    continue
                paths = self.paths(a, b)
                if not paths:
                    return None
                levels = sorted({d for _, d in paths})
                segs.append((k, s, svc.rates[s], paths, levels))
        deadlines = [svc.deadline - nfv[k] + 1e-7 for k, svc in enumerate(inst.services)]
        if _split([(rate, [p for p, _ in paths]) for _, _, rate, paths, _ in segs],
                  self.capacity) is None:
            return None  # capacities alone rule the placement out

        checks = 0
        start = (0,) * len(segs)
        heap = [(self._total(segs, start), start)]
        seen = {start}
        while heap:
            total, caps = heapq.heappop(heap)
            if total > budget + 1e-9:
                return None
            used = [0.0] * len(inst.services)
            for (k, _, _, _, levels), c in zip(segs, caps):
                used[k] += levels[c]
            if any(u > d for u, d in zip(used, deadlines)):
                continue  # raising caps only lengthens delays further
            self.checks += 1
            checks += 1
            if checks > self.limits.max_routing_checks:
                raise OracleLimitError("routing enumeration limit reached")
            groups = [(rate, [links for links, d in paths if d <= levels[c]])
                      for (_, _, rate, paths, levels), c in zip(segs, caps)]
            split = _split(groups, self.capacity)
            if split is not None:
                chosen = dict.fromkeys(fixed, ())
                for (k, s, _, _, _), (_, allowed), fracs in zip(segs, groups, split):
                    chosen[(k, s)] = list(zip(allowed, fracs))
                return total, chosen
            for g in range(len(segs)):
                if caps[g] + 1 < len(segs[g][4]):
                    nxt = caps[:g] + (caps[g] + 1,) + caps[g + 1:]
                    if nxt not in seen:
                        seen.add(nxt)
                        heapq.heappush(heap, (self._total(segs, nxt), nxt))
        return None

    @staticmethod
    def _total(segs, caps) -> float:
        return sum(levels[c] for (_, _, _, _, levels), c in zip(segs, caps))


def exact_enumerate(inst: Instance, limits: OracleLimits | None = None) -> OracleResult:
    """Global optimum of sum(y) + sigma * total delay by exhaustive search."""
    if any(v.rule == "stage uncoverable" for v in validate_instance(inst)):
        return OracleResult(INFEASIBLE)
    require_valid(inst)
    limits = limits or OracleLimits()
    net = inst.network
    order = net.node_index
    stages = [(k, s) for k, svc in enumerate(inst.services) for s in range(1, svc.length + 1)]
    choices = [sorted(inst.services[k].admissible(s), key=order.__getitem__) for k, s in stages]
    count = math.prod(len(c) for c in choices)
    if count > limits.max_placements:
        raise OracleLimitError(f"{count} placements exceed the limit {limits.max_placements}")

    dist_from: dict = {}

    def dist(a, b):
        if a not in dist_from:
            dist_from[a] = shortest_delays_from(net, a)
        return dist_from[a].get(b, math.inf)

    candidates = []
    for combo in itertools.product(*choices):
        placement = Placement(dict(zip(stages, combo)))
        load: dict = {}
        for (k, s), v in zip(stages, combo):
            load[v] = load.get(v, 0.0) + inst.services[k].rates[s]
        if any(load[v] > net.cloud[v] + 1e-7 for v in load):
            continue
        nfv = [0.0] * len(inst.services)
        for (k, s), v in zip(stages, combo):
            nfv[k] += inst.services[k].admissible(s)[v]
        link_lb = 0.0
        ok = True
        for k, svc in enumerate(inst.services):
            lb_k = sum(dist(inst.endpoint(k, s, placement), inst.endpoint(k, s + 1, placement))
                       for s in range(svc.length + 1))
            if lb_k + nfv[k] > svc.deadline + 1e-7:
                ok = False
                break
            link_lb += lb_k
        if not ok:
            continue
        bound = placement.activated + inst.sigma * (sum(nfv) + link_lb)
        key = tuple(order[v] for v in combo)
        candidates.append((bound, key, placement, nfv))
    candidates.sort(key=lambda c: (c[0], c[1]))

    router = _Router(inst, limits)
    best = OracleResult(INFEASIBLE, enumerated=count)
    for bound, key, placement, nfv in candidates:
        if bound > best.objective + 1e-9:
            break
        budget = (best.objective - placement.activated) / inst.sigma - sum(nfv)
        routed = router.route(placement, nfv, budget)
        if routed is None:
            continue
        link_total, split = routed
        obj = placement.activated + inst.sigma * (sum(nfv) + link_total)
        if obj < best.objective - 1e-9:
            plan = _plan(inst, placement, split)
            best = OracleResult(FEASIBLE, obj, placement, plan.stage_delay, placement.activated,
                                sum(nfv) + link_total, count, routing=plan)
    best.routing_checks = router.checks
    return best


def _plan(inst: Instance, placement: Placement, split: dict) -> RoutingPlan:
    """Routing plan from explicit path splits; tiny LP noise is dropped and renormalized."""
    net = inst.network
    flows, paths, stage, service = {}, {}, {}, {}
    for k, svc in enumerate(inst.services):
        total = 0.0
        for s in range(svc.length + 1):
            a = inst.endpoint(k, s, placement)
            if not split[(k, s)]:
                paths[(k, s)] = [Path((), (a,), 1.0, 0.0)]
                flows[(k, s)], stage[(k, s)] = {}, 0.0
                continue
            kept = [(links, f) for links, f in split[(k, s)] if f > 1e-9]
            mass = sum(f for _, f in kept)
            seg_paths, seg_flow = [], {}
            for links, f in kept:
                f /= mass
                nodes = (a,) + tuple(net.links[e].j for e in links)
                seg_paths.append(Path(links, nodes, f, sum(net.links[e].delay for e in links)))
                for e in links:
                    seg_flow[e] = seg_flow.get(e, 0.0) + f
            paths[(k, s)], flows[(k, s)] = seg_paths, seg_flow
            stage[(k, s)] = max(p.delay for p in seg_paths)
            total += stage[(k, s)]
        total += sum(svc.admissible(s)[placement.assignment[(k, s)]]
                     for s in range(1, svc.length + 1))
        service[k] = total
    return RoutingPlan(flows, paths, stage, service)


def solve_exact(inst: Instance, limits: OracleLimits | None = None) -> SolveReport:
    """Oracle optimum as a report; raises OracleLimitError when the instance is too big."""
    t0 = time.perf_counter()
    res = exact_enumerate(inst, limits)
    report = SolveReport("exact", res.status)
    if res.feasible:
        plan = res.routing
        report.placement = res.placement
        report.routing = plan
        report.activated_nodes = res.activated_nodes
        report.nfv_delay = sum(svc.admissible(s)[res.placement.assignment[(k, s)]]
                               for k, svc in enumerate(inst.services)
                               for s in range(1, svc.length + 1))
        report.link_delay = sum(plan.stage_delay.values())
        report.objective = res.activated_nodes + inst.sigma * report.total_delay
        report.paths_exceed_budget = sorted(
            ks for ks, paths in plan.paths.items() if len(paths) > inst.path_budget)
    report.wall_time_ms = (time.perf_counter() - t0) * 1e3
    return report
