"""LP models built from an :class:`~slicerlp.model.Instance`.

Flow segment ``(k, s)`` for ``s = 0..l_k`` carries service ``k``'s traffic
from the node hosting function ``s`` to the node hosting function ``s+1``;
the source and destination act as fixed hosts of functions ``0`` and
``l_k + 1``, so their contribution to flow conservation is a constant on
the right-hand side.

Variable keys used in :class:`VarIndex`::

    ("x", v, k, s)            placement of function s of service k on v
    ("y", v)                  node activation
    ("r", k, s, p)            share of segment (k, s) on path p     (LP-I)
    ("r_link", e, k, s, p)    share of segment (k, s) on link e, path p
    ("z", e, k, s, p)         link e lies on path p of (k, s)       (LP-I)
    ("theta", k, s)           communication delay of segment (k, s)

Services are referred to by their position ``k`` in ``Instance.services``.
"""
from __future__ import annotations

from typing import Iterator, Mapping

import numpy as np

from .lp import LpModel, LpSolution, Sense, fix_variables
from .model import Instance, Placement, placement_violations, require_valid

OMEGA_CAP = 1e12


class VarIndex:
    """Bijection between semantic variable keys and LP column ids."""

    def __init__(self, instance: Instance, kind: str):
        self.instance = instance
        self.kind = kind
        self.ids: dict = {}
        self.keys: list = []

    def add(self, model: LpModel, key: tuple, lb=0.0, ub=np.inf, cost=0.0) -> int:
        j = model.add_variable(key, lb, ub, cost)
        assert j == len(self.keys)
        self.ids[key] = j
        self.keys.append(key)
        return j

    def __getitem__(self, key) -> int:
        return self.ids[key]

    def get(self, key, default=None):
        return self.ids.get(key, default)

    def __contains__(self, key) -> bool:
        return key in self.ids

    def __len__(self) -> int:
        return len(self.keys)

    def of_kind(self, name: str) -> Iterator[tuple[tuple, int]]:
        for key, j in self.ids.items():
            if key[0] == name:
                yield key, j

    def categories(self) -> set:
        return {key[0] for key in self.keys}

    # solution accessors

    def x_values(self, sol: LpSolution) -> dict:
        """``{(v, k, s): value}`` for every placement variable."""
        return {(key[1], key[2], key[3]): float(sol.values[j]) for key, j in self.of_kind("x")}

    def segment_flows(self, sol: LpSolution, k: int, s: int, tol: float = 0.0) -> dict:
        """Link flows of segment (k, s) aggregated over paths, ``{link: share}``."""
        out: dict = {}
        for e in range(len(self.instance.network.links)):
            total = 0.0
            for p in range(1, self.paths + 1):
                j = self.ids.get(("r_link", e, k, s, p))
                if j is not None:
                    total += float(sol.values[j])
            if total > tol:
                out[e] = total
        return out

    @property
    def paths(self) -> int:
        return 1 if self.kind == "LP-II" else self.instance.path_budget


def segments(inst: Instance) -> Iterator[tuple[int, int]]:
    for k, svc in enumerate(inst.services):
        for s in range(svc.length + 1):
            yield k, s


def _boundary(inst: Instance, k: int, s: int, node) -> float:
    """Fixed hosting indicator of the source (s = 0) and destination (s = l+1)."""
    svc = inst.services[k]
    if s == 0:
        return 1.0 if node == svc.source else 0.0
    if s == svc.length + 1:
        return 1.0 if node == svc.destination else 0.0
    return 0.0


def _add_placement(model: LpModel, idx: VarIndex, inst: Instance) -> None:
    """x, y variables with constraints (1)-(3); objective terms sum(y) + sigma * NFV delay."""
    net = inst.network
    sigma = inst.sigma
    for v in net.cloud_nodes:
        idx.add(model, ("y", v), 0.0, 1.0, 1.0)
    load: dict = {v: [] for v in net.cloud_nodes}
    for k, svc in enumerate(inst.services):
        for s in range(1, svc.length + 1):
            adm = svc.admissible(s)
            terms = []
            for v in net.cloud_nodes:
                if v not in adm:
                    continue
                j = idx.add(model, ("x", v, k, s), 0.0, 1.0, sigma * adm[v])
                terms.append((j, 1.0))
                model.add_constraint({j: 1.0, idx[("y", v)]: -1.0}, Sense.LE, 0.0, ("link_xy", v, k, s))
                load[v].append((j, svc.rates[s]))
            model.add_constraint(terms, Sense.EQ, 1.0, ("assign", k, s))
    for v in net.cloud_nodes:
        mu = net.cloud[v]
        if load[v] and np.isfinite(mu):
            model.add_constraint(load[v] + [(idx[("y", v)], -mu)], Sense.LE, 0.0, ("node_cap", v))


def _conservation(model: LpModel, idx: VarIndex, inst: Instance, k: int, s: int,
                  flow_key) -> None:
    """inflow - outflow = x_{i,s+1} - x_{i,s} at every node i."""
    net = inst.network
    for i in net.nodes:
        terms = [(idx[flow_key(e)], 1.0) for e in net.in_links[i]]
        terms += [(idx[flow_key(e)], -1.0) for e in net.out_links[i]]
        j_next = idx.get(("x", i, k, s + 1))
        j_cur = idx.get(("x", i, k, s))
        if j_next is not None:
            terms.append((j_next, -1.0))
        if j_cur is not None:
            terms.append((j_cur, 1.0))
        const = _boundary(inst, k, s + 1, i) - _boundary(inst, k, s, i)
        if terms or const:
            model.add_constraint(terms, Sense.EQ, const, ("flow", k, s, i))


def _add_deadlines(model: LpModel, idx: VarIndex, inst: Instance) -> None:
    for k, svc in enumerate(inst.services):
        terms = [(idx[("theta", k, s)], 1.0) for s in range(svc.length + 1)]
        for s in range(1, svc.length + 1):
            for v, d in svc.admissible(s).items():
                j = idx.get(("x", v, k, s))
                if j is not None and d:
                    terms.append((j, d))
        model.add_constraint(terms, Sense.LE, svc.deadline, ("deadline", k))


def build_lp2(inst: Instance) -> tuple[LpModel, VarIndex]:
    """The compact relaxation: aggregated single-commodity flows per segment."""
    require_valid(inst)
    net = inst.network
    model = LpModel("LP-II")
    idx = VarIndex(inst, "LP-II")
    _add_placement(model, idx, inst)
    for k, s in segments(inst):
        for e in range(len(net.links)):
            idx.add(model, ("r_link", e, k, s, 1), 0.0, 1.0)
        idx.add(model, ("theta", k, s), 0.0, np.inf, inst.sigma)

    for e, link in enumerate(net.links):
        if not np.isfinite(link.capacity):
            continue
        terms = [(idx[("r_link", e, k, s, 1)], inst.services[k].rates[s])
                 for k, s in segments(inst) if inst.services[k].rates[s]]
        if terms:
            model.add_constraint(terms, Sense.LE, link.capacity, ("link_cap", e))
    for k, s in segments(inst):
        _conservation(model, idx, inst, k, s, lambda e, k=k, s=s: ("r_link", e, k, s, 1))
        terms = [(idx[("theta", k, s)], 1.0)]
        terms += [(idx[("r_link", e, k, s, 1)], -link.delay)
                  for e, link in enumerate(net.links) if link.delay]
        model.add_constraint(terms, Sense.EQ, 0.0, ("delay", k, s))
    _add_deadlines(model, idx, inst)
    return model, idx


def build_lp1(inst: Instance) -> tuple[LpModel, VarIndex]:
    """The natural relaxation of the MILP with ``inst.path_budget`` paths per segment."""
    require_valid(inst)
    net = inst.network
    P = inst.path_budget
    model = LpModel("LP-I")
    idx = VarIndex(inst, "LP-I")
    _add_placement(model, idx, inst)
    for k, s in segments(inst):
        for p in range(1, P + 1):
            idx.add(model, ("r", k, s, p), 0.0, 1.0)
            for e in range(len(net.links)):
                idx.add(model, ("z", e, k, s, p), 0.0, 1.0)
                idx.add(model, ("r_link", e, k, s, p), 0.0, 1.0)
        idx.add(model, ("theta", k, s), 0.0, np.inf, inst.sigma)

    for k, s in segments(inst):
        model.add_constraint([(idx[("r", k, s, p)], 1.0) for p in range(1, P + 1)],
                             Sense.EQ, 1.0, ("split", k, s))
        for p in range(1, P + 1):
            jr = idx[("r", k, s, p)]
            for e in range(len(net.links)):
                jz, jl = idx[("z", e, k, s, p)], idx[("r_link", e, k, s, p)]
                model.add_constraint({jl: 1.0, jz: -1.0, jr: -1.0}, Sense.GE, -1.0, ("lin1", e, k, s, p))
                model.add_constraint({jl: 1.0, jz: -1.0}, Sense.LE, 0.0, ("lin2", e, k, s, p))
                model.add_constraint({jl: 1.0, jr: -1.0}, Sense.LE, 0.0, ("lin3", e, k, s, p))
            _conservation(model, idx, inst, k, s, lambda e, k=k, s=s, p=p: ("z", e, k, s, p))
            terms = [(idx[("theta", k, s)], 1.0)]
            terms += [(idx[("z", e, k, s, p)], -link.delay)
                      for e, link in enumerate(net.links) if link.delay]
            model.add_constraint(terms, Sense.GE, 0.0, ("delay", k, s, p))
    for e, link in enumerate(net.links):
        if not np.isfinite(link.capacity):
            continue
        terms = [(idx[("r_link", e, k, s, p)], inst.services[k].rates[s])
                 for k, s in segments(inst) for p in range(1, P + 1) if inst.services[k].rates[s]]
        if terms:
            model.add_constraint(terms, Sense.LE, link.capacity, ("link_cap", e))
    _add_deadlines(model, idx, inst)
    return model, idx


def placement_pins(idx: VarIndex, placement: Placement) -> dict:
    pins = {}
    for (_, v, k, s), j in idx.of_kind("x"):
        pins[j] = float(placement.x(v, k, s))
    for (_, v), j in idx.of_kind("y"):
        pins[j] = float(placement.y(v))
    return pins


def fix_placement(model: LpModel, idx: VarIndex, placement: Placement) -> LpModel:
    """Pin x and y to ``placement``; the objective becomes the total link delay."""
    bad = placement_violations(idx.instance, placement)
    if bad:
        raise ValueError("placement violates constraints (1)-(3): " + "; ".join(map(str, bad)))
    out = fix_variables(model, placement_pins(idx, placement))
    out.cost = [0.0] * out.num_vars
    for _, j in idx.of_kind("theta"):
        out.cost[j] = 1.0
    return out


def set_routing_weights(model: LpModel, idx: VarIndex, weights: Mapping[int, float]) -> LpModel:
    """Weight each service's link delay by ``weights[k]`` (default 1) in the objective."""
    for key, j in idx.of_kind("x"):
        if model.lb[j] != model.ub[j]:
            raise ValueError(f"placement not fixed: {key} is free")
    for k, w in weights.items():
        if not w >= 1:
            raise ValueError(f"routing weight of service {k} must be >= 1, got {w}")
    out = model.copy()
    out.cost = list(model.cost)
    for (_, k, s), j in idx.of_kind("theta"):
        out.cost[j] = float(min(weights.get(k, 1.0), OMEGA_CAP))
    return out
