"""Path decomposition of unit segment flows and E2E delay recomputation.

Paths are peeled shortest-delay first: repeatedly take the minimum-delay
path in the positive-flow support, subtract its bottleneck share, and stop
once a unit of flow has been extracted. Whatever flow is left is a
circulation and is discarded.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from .model import Instance, Network, Path, Placement, RoutingPlan

CONSERVATION_TOL = 1e-6
SUPPORT_TOL = 1e-9


class FlowConservationError(ValueError):
    pass


@dataclass
class Decomposition:
    paths: list[Path]
    circulation: float = 0.0  # total link flow left after peeling

    @property
    def max_delay(self) -> float:
        return max((p.delay for p in self.paths if p.fraction > 0), default=0.0)

    @property
    def total_fraction(self) -> float:
        return sum(p.fraction for p in self.paths)


def check_conservation(net: Network, flows: dict, a, b, tol: float = CONSERVATION_TOL) -> None:
    """Raise unless ``flows`` ships one unit from ``a`` to ``b``."""
    balance = {n: 0.0 for n in net.nodes}
    for e, f in flows.items():
        link = net.links[e]
        balance[link.i] -= f
        balance[link.j] += f
    for n, bal in balance.items():
        want = (1.0 if n == b else 0.0) - (1.0 if n == a else 0.0)
        if abs(bal - want) > tol:
            raise FlowConservationError(
                f"node {n}: net inflow {bal:.9g}, expected {want:g} for flow {a}->{b}")


def _shortest_path(net: Network, residual: dict, a, b):
    """Minimum-delay a->b path over links with positive residual flow."""
    idx = net.node_index
    dist = {a: 0.0}
    pred: dict = {}
    heap = [(0.0, idx[a], a)]
    done = set()
    while heap:
        d, _, u = heapq.heappop(heap)
        if u in done:
            continue
        if u == b:
            break
        done.add(u)
        for e in net.out_links.get(u, ()):
            if residual.get(e, 0.0) <= SUPPORT_TOL:
                continue
            link = net.links[e]
            nd = d + link.delay
            if nd < dist.get(link.j, math.inf):
                dist[link.j] = nd
                pred[link.j] = e
                heapq.heappush(heap, (nd, idx[link.j], link.j))
    if b not in dist:
        return None
    links = []
    node = b
    while node != a:
        e = pred[node]
        links.append(e)
        node = net.links[e].i
    links.reverse()
    return links


def decompose_flow(net: Network, flows: dict, a, b, tol: float = CONSERVATION_TOL) -> Decomposition:
    """Split a unit a->b flow ``{link: share}`` into simple paths plus a circulation."""
    flows = {e: float(f) for e, f in flows.items() if f > SUPPORT_TOL}
    check_conservation(net, flows, a, b, tol)
    if a == b:
        return Decomposition([Path((), (a,), 1.0, 0.0)], sum(flows.values()))

    residual = dict(flows)
    paths = []
    remaining = 1.0
    while remaining > SUPPORT_TOL:
        links = _shortest_path(net, residual, a, b)
        if links is None:
            break
        share = min(min(residual[e] for e in links), remaining)
        for e in links:
            residual[e] -= share
            if residual[e] <= SUPPORT_TOL:
                del residual[e]
        remaining -= share
        nodes = (a,) + tuple(net.links[e].j for e in links)
        paths.append(Path(tuple(links), nodes, share, sum(net.links[e].delay for e in links)))
    if remaining > tol:
        raise FlowConservationError(f"only {1 - remaining:.9g} of the {a}->{b} flow is routable")
    return Decomposition(paths, sum(residual.values()))


def recompute_delays(inst: Instance, placement: Placement, flows: dict) -> RoutingPlan:
    """Decompose every segment flow and rebuild stage and service delays.

    ``flows`` maps ``(k, s)`` to ``{link: share}``.
    """
    net = inst.network
    paths, stage_delay, circ = {}, {}, {}
    service_delay = {}
    for k, svc in enumerate(inst.services):
        total = 0.0
        for s in range(svc.length + 1):
            a = inst.endpoint(k, s, placement)
            b = inst.endpoint(k, s + 1, placement)
            dec = decompose_flow(net, flows.get((k, s), {}), a, b)
            paths[(k, s)] = dec.paths
            stage_delay[(k, s)] = dec.max_delay
            circ[(k, s)] = dec.circulation
            total += dec.max_delay
        for s in range(1, svc.length + 1):
            total += svc.admissible(s)[placement.assignment[(k, s)]]
        service_delay[k] = total
    return RoutingPlan(
        flows={key: dict(f) for key, f in flows.items()},
        paths=paths,
        stage_delay=stage_delay,
        service_delay=service_delay,
        circulation=circ,
    )
