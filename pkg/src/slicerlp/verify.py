"""Independent re-verification of a solved instance.

Nothing here calls the LP, formulation or decomposition code: the check
starts from the raw placement and path list of a report and recomputes
every quantity from the instance data.
"""
from __future__ import annotations

import math

from .model import Instance
from .report import SolveReport

TOL = 1e-6


def check_report(inst: Instance, report: SolveReport, tol: float = TOL) -> list[str]:
    """All violations found in a Feasible report; empty when the solution is valid."""
    if not report.feasible:
        return []
    if report.placement is None or report.routing is None:
        return ["feasible report without placement or routing"]
    net = inst.network
    out: list[str] = []
    assign = report.placement.assignment
    active = set(report.placement.active)

    # placement: one admissible host per stage, hosts active, node capacity
    load: dict = {}
    expected = set()
    for k, svc in enumerate(inst.services):
        for s in range(1, svc.length + 1):
            expected.add((k, s))
            v = assign.get((k, s))
            if v is None or v not in svc.stages[s - 1]:
                out.append(f"({k},{s}): host {v!r} missing or not admissible")
                continue
            if v not in active:
                out.append(f"({k},{s}): host {v!r} not activated")
            load[v] = load.get(v, 0.0) + svc.rates[s]
    if set(assign) - expected:
        out.append(f"unexpected stages assigned: {sorted(set(assign) - expected)}")
    for v, used in load.items():
        if used > net.cloud.get(v, 0.0) + tol:
            out.append(f"node {v!r}: load {used} over capacity {net.cloud.get(v, 0.0)}")
    if active - set(net.cloud):
        out.append(f"non-cloud nodes activated: {sorted(map(str, active - set(net.cloud)))}")
    if report.activated_nodes != len(active):
        out.append(f"reported {report.activated_nodes} activated nodes, placement has {len(active)}")

    # routing: paths valid, flows conserved, capacities respected
    link_load = [0.0] * len(net.links)
    total_nfv = total_link = 0.0
    for k, svc in enumerate(inst.services):
        hosts = [svc.source] + [assign.get((k, s)) for s in range(1, svc.length + 1)]
        hosts.append(svc.destination)
        service_delay = 0.0
        for s in range(svc.length + 1):
            a, b = hosts[s], hosts[s + 1]
            paths = report.routing.paths.get((k, s), [])
            flows = report.routing.flows.get((k, s), {})
            tag = f"({k},{s})"
            worst = 0.0
            used: dict = {}
            for p in paths:
                if p.fraction < -tol:
                    out.append(f"{tag}: negative path fraction")
                node = a
                delay = 0.0
                seen = {a}
                for e in p.links:
                    link = net.links[e]
                    if link.i != node:
                        out.append(f"{tag}: path is not contiguous at link {e}")
                        break
                    node = link.j
                    if node in seen:
                        out.append(f"{tag}: path revisits node {node!r}")
                    seen.add(node)
                    delay += link.delay
                    used[e] = used.get(e, 0.0) + p.fraction
                if node != b:
                    out.append(f"{tag}: path ends at {node!r}, not {b!r}")
                if abs(delay - p.delay) > tol:
                    out.append(f"{tag}: path delay {p.delay} but links sum to {delay}")
                if p.fraction > 0:
                    worst = max(worst, delay)
            if abs(sum(p.fraction for p in paths) - 1.0) > tol:
                out.append(f"{tag}: path fractions sum to {sum(p.fraction for p in paths)}")
            for e, f in used.items():
                if f > flows.get(e, 0.0) + tol:
                    out.append(f"{tag}: paths put {f} on link {e}, flow is {flows.get(e, 0.0)}")
            balance: dict = {}
            for e, f in flows.items():
                if f < -tol or f > 1 + tol:
                    out.append(f"{tag}: flow {f} on link {e} outside [0,1]")
                link = net.links[e]
                balance[link.i] = balance.get(link.i, 0.0) - f
                balance[link.j] = balance.get(link.j, 0.0) + f
                link_load[e] += svc.rates[s] * f
            if a != b:
                balance[a] = balance.get(a, 0.0) + 1.0
                balance[b] = balance.get(b, 0.0) - 1.0
            bad = {n: x for n, x in balance.items() if abs(x) > tol}
            if bad:
                out.append(f"{tag}: flow not conserved at {sorted(map(str, bad))}")
            if abs(report.routing.stage_delay.get((k, s), math.nan) - worst) > tol:
                out.append(f"{tag}: stage delay {report.routing.stage_delay.get((k, s))}, recomputed {worst}")
            service_delay += worst
            total_link += worst
        nfv = sum(svc.stages[s - 1].get(hosts[s], math.inf) for s in range(1, svc.length + 1))
        total_nfv += nfv
        service_delay += nfv
        if service_delay > svc.deadline + tol:
            out.append(f"service {svc.id}: delay {service_delay} over deadline {svc.deadline}")
        if abs(report.routing.service_delay.get(k, math.nan) - service_delay) > tol:
            out.append(f"service {svc.id}: reported delay differs from recomputed {service_delay}")
    for e, used_cap in enumerate(link_load):
        if used_cap > net.links[e].capacity + tol:
            out.append(f"link {e}: load {used_cap} over capacity {net.links[e].capacity}")

    objective = len(active) + inst.sigma * (total_nfv + total_link)
    if abs(objective - report.objective) > tol:
        out.append(f"objective {report.objective}, recomputed {objective}")
    if abs(report.total_delay - (total_nfv + total_link)) > tol:
        out.append(f"total delay {report.total_delay}, recomputed {total_nfv + total_link}")
    return out
