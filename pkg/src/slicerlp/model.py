"""Problem instances: network, service requests, placements, routing plans.

Instances are immutable after construction. Links are identified by their
position in ``Network.links`` since parallel links between the same pair of
nodes are allowed.
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
import pathlib
from typing import Any, Hashable, Mapping, Sequence

import jsonschema

Node = Hashable

TOL = 1e-7


@dataclass(frozen=True)
class Link:
    i: Node
    j: Node
    delay: float
    capacity: float = math.inf


@dataclass(frozen=True)
class Network:
    nodes: tuple
    links: tuple[Link, ...]
    cloud: Mapping[Node, float]  # node -> compute capacity mu_v

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "cloud", dict(self.cloud))

    @cached_property
    def node_index(self) -> dict:
        return {n: idx for idx, n in enumerate(self.nodes)}

    @cached_property
    def out_links(self) -> dict:
        out = {n: [] for n in self.nodes}
        for e, link in enumerate(self.links):
            out.setdefault(link.i, []).append(e)
        return out

    @cached_property
    def in_links(self) -> dict:
        inc = {n: [] for n in self.nodes}
        for e, link in enumerate(self.links):
            inc.setdefault(link.j, []).append(e)
        return inc

    @property
    def cloud_nodes(self) -> list:
        """Cloud nodes in network node order."""
        return [n for n in self.nodes if n in self.cloud]


@dataclass(frozen=True)
class ServiceRequest:
    """One service: source, destination, SFC stages and rates.

    ``stages[s-1]`` maps each admissible cloud node of function s to its
    NFV delay. ``rates`` has one entry per flow segment 0..len(stages).
    """

    id: Any
    source: Node
    destination: Node
    stages: tuple[Mapping[Node, float], ...]
    rates: tuple[float, ...]
    deadline: float

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(dict(st) for st in self.stages))
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))

    @property
    def length(self) -> int:
        return len(self.stages)

    def admissible(self, s: int) -> dict:
        """Admissible nodes (with NFV delays) of function ``s`` (1-based)."""
        return self.stages[s - 1]

    def segment_rate(self, s: int) -> float:
        return self.rates[s]


@dataclass(frozen=True)
class Instance:
    network: Network
    services: tuple[ServiceRequest, ...]
    path_budget: int = 2
    sigma: float = 0.001

    def __post_init__(self):
        object.__setattr__(self, "services", tuple(self.services))

    @property
    def total_functions(self) -> int:
        return sum(svc.length for svc in self.services)

    def endpoint(self, k: int, s: int, placement: "Placement") -> Node:
        """Node hosting "function" s of service k, with 0 = source, l+1 = destination."""
        svc = self.services[k]
        if s == 0:
            return svc.source
        if s == svc.length + 1:
            return svc.destination
        return placement.assignment[(k, s)]

    def replace(self, **changes) -> "Instance":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class Placement:
    """Binary VNF placement: one hosting node per (service index, stage)."""

    assignment: Mapping[tuple[int, int], Node]
    active: frozenset = field(default=frozenset())

    def __post_init__(self):
        object.__setattr__(self, "assignment", dict(self.assignment))
        if not self.active:
            object.__setattr__(self, "active", frozenset(self.assignment.values()))

    def x(self, v: Node, k: int, s: int) -> int:
        return int(self.assignment.get((k, s)) == v)

    def y(self, v: Node) -> int:
        return int(v in self.active)

    @property
    def activated(self) -> int:
        return len(self.active)


@dataclass(frozen=True)
class Path:
    links: tuple[int, ...]
    nodes: tuple
    fraction: float
    delay: float


@dataclass
class RoutingPlan:
    """Per-segment link flows, their path decomposition and recomputed delays."""

    flows: dict  # (k, s) -> {link index: fraction}
    paths: dict  # (k, s) -> list[Path]
    stage_delay: dict  # (k, s) -> max path delay
    service_delay: dict  # k -> communication + NFV delay
    circulation: dict = field(default_factory=dict)  # (k, s) -> discarded flow mass


@dataclass(frozen=True)
class Violation:
    entity: str
    rule: str

    def __str__(self):
        return f"{self.entity}: {self.rule}"


def placement_violations(inst: Instance, placement: Placement) -> list[Violation]:
    """Check constraints (1)-(3) and admissibility for a binary placement."""
    out = []
    load: dict = {}
    for k, svc in enumerate(inst.services):
        for s in range(1, svc.length + 1):
            v = placement.assignment.get((k, s))
            ent = f"service {svc.id} stage {s}"
            if v is None:
                out.append(Violation(ent, "stage unassigned"))
                continue
            if v not in svc.admissible(s):
                out.append(Violation(ent, f"node {v} not admissible"))
                continue
            if v not in placement.active:
                out.append(Violation(ent, f"node {v} not activated"))
            load[v] = load.get(v, 0.0) + svc.rates[s]
    for v, used in load.items():
        mu = inst.network.cloud.get(v, 0.0)
        if used > mu + TOL:
            out.append(Violation(f"node {v}", f"capacity exceeded ({used:g} > {mu:g})"))
    return out


# -- validation ---------------------------------------------------------------


def _weakly_connected(net: Network) -> bool:
    if not net.nodes:
        return True
    adj = {n: set() for n in net.nodes}
    for link in net.links:
        if link.i in adj and link.j in adj:
            adj[link.i].add(link.j)
            adj[link.j].add(link.i)
    seen = {net.nodes[0]}
    stack = [net.nodes[0]]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(net.nodes)


def validate_instance(inst: Instance) -> list[Violation]:
    """Return every broken invariant of ``inst``; empty means valid."""
    out = []
    net = inst.network
    nodes = set(net.nodes)
    if len(nodes) != len(net.nodes):
        out.append(Violation("network", "duplicate node ids"))
    for e, link in enumerate(net.links):
        ent = f"link {e} ({link.i}->{link.j})"
        if link.i not in nodes or link.j not in nodes:
            out.append(Violation(ent, "endpoint not a node"))
        if not link.delay >= 0:
            out.append(Violation(ent, "negative delay"))
        if not link.capacity >= 0:
            out.append(Violation(ent, "negative capacity"))
    for v, mu in net.cloud.items():
        if v not in nodes:
            out.append(Violation(f"cloud node {v}", "cloud node not a node"))
        if not mu >= 0:
            out.append(Violation(f"cloud node {v}", "negative capacity"))
    if not _weakly_connected(net):
        out.append(Violation("network", "not connected"))

    if inst.path_budget < 1:
        out.append(Violation("params", "path budget below 1"))
    if not inst.sigma > 0:
        out.append(Violation("params", "sigma not positive"))

    ids = [svc.id for svc in inst.services]
    if len(set(map(repr, ids))) != len(ids):
        out.append(Violation("services", "duplicate service ids"))
    for svc in inst.services:
        ent = f"service {svc.id}"
        for end, name in ((svc.source, "source"), (svc.destination, "destination")):
            if end not in nodes:
                out.append(Violation(ent, f"{name} not a node"))
            elif end in net.cloud:
                out.append(Violation(ent, f"{name} in cloud set"))
        if len(svc.rates) != svc.length + 1:
            out.append(Violation(ent, "rates length mismatch"))
        if any(not r >= 0 for r in svc.rates):
            out.append(Violation(ent, "negative rate"))
        if not svc.deadline > 0:
            out.append(Violation(ent, "deadline not positive"))
        for s in range(1, svc.length + 1):
            adm = svc.admissible(s)
            if not adm:
                out.append(Violation(f"{ent} stage {s}", "stage uncoverable"))
            for v, d in adm.items():
                if v not in net.cloud:
                    out.append(Violation(f"{ent} stage {s}", f"admissible node {v} not in cloud set"))
                if not d >= 0:
                    out.append(Violation(f"{ent} stage {s}", f"negative NFV delay at {v}"))
    return out


class InvalidInstanceError(ValueError):
    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(map(str, self.violations)))


def require_valid(inst: Instance) -> None:
    bad = validate_instance(inst)
    if bad:
        raise InvalidInstanceError(bad)


# -- graph utilities ----------------------------------------------------------


def shortest_delay(net: Network, a: Node, b: Node) -> float:
    """Minimum total link delay over directed paths a -> b; ``math.inf`` if unreachable."""
    for n in (a, b):
        if n not in net.node_index:
            raise KeyError(f"unknown node {n!r}")
    return shortest_delays_from(net, a).get(b, math.inf)


def shortest_delays_from(net: Network, a: Node) -> dict:
    idx = net.node_index
    dist = {a: 0.0}
    heap = [(0.0, idx[a], a)]
    done = set()
    while heap:
        d, _, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for e in net.out_links.get(u, ()):
            link = net.links[e]
            nd = d + link.delay
            if nd < dist.get(link.j, math.inf):
                dist[link.j] = nd
                heapq.heappush(heap, (nd, idx[link.j], link.j))
    return dist


# -- file I/O -------------------------------------------------------------------


class InstanceFormatError(ValueError):
    """Malformed instance document; ``field`` names the offending location."""

    def __init__(self, message: str, field: str = "", line: int | None = None):
        self.field = field
        self.line = line
        where = field or (f"line {line}" if line is not None else "document")
        super().__init__(f"{where}: {message}")


def instance_schema() -> dict:
    text = resources.files("slicerlp").joinpath("instance.schema.json").read_text()
    return json.loads(text)


def _num(x):
    return math.inf if x is None else float(x)


def _enc(x):
    return None if math.isinf(x) else x


def instance_to_dict(inst: Instance) -> dict:
    net = inst.network
    return {
        "nodes": list(net.nodes),
        "links": [
            {"i": l.i, "j": l.j, "delay": l.delay, "capacity": _enc(l.capacity)} for l in net.links
        ],
        "cloud": [{"v": v, "mu": _enc(mu)} for v, mu in net.cloud.items()],
        "services": [
            {
                "id": svc.id,
                "src": svc.source,
                "dst": svc.destination,
                "stages": [
                    {"admissible": [{"v": v, "delay": d} for v, d in st.items()]}
                    for st in svc.stages
                ],
                "rates": list(svc.rates),
                "deadline": svc.deadline,
            }
            for svc in inst.services
        ],
        "params": {"P": inst.path_budget, "sigma": inst.sigma},
    }


def instance_from_dict(doc: Any) -> Instance:
    validator = jsonschema.Draft202012Validator(instance_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        loc = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)
        if err.validator == "required":
            missing = [r for r in err.validator_value if r not in err.instance]
            loc = f"{loc}.{missing[0]}" if missing else loc
            raise InstanceFormatError("missing required field", loc.lstrip("."))
        raise InstanceFormatError(err.message, loc.lstrip(".") or "document")
    net = Network(
        nodes=tuple(doc["nodes"]),
        links=tuple(
            Link(l["i"], l["j"], float(l["delay"]), _num(l["capacity"])) for l in doc["links"]
        ),
        cloud={c["v"]: _num(c["mu"]) for c in doc["cloud"]},
    )
    services = tuple(
        ServiceRequest(
            id=s["id"],
            source=s["src"],
            destination=s["dst"],
            stages=tuple({a["v"]: float(a["delay"]) for a in st["admissible"]} for st in s["stages"]),
            rates=tuple(float(r) for r in s["rates"]),
            deadline=float(s["deadline"]),
        )
        for s in doc["services"]
    )
    params = doc.get("params", {})
    return Instance(net, services, int(params.get("P", 2)), float(params.get("sigma", 0.001)))


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=1)


def loads_instance(text: str, validate: bool = True) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(exc.msg, line=exc.lineno) from exc
    inst = instance_from_dict(doc)
    if validate:
        require_valid(inst)
    return inst


def save_instance(inst: Instance, path) -> None:
    pathlib.Path(path).write_text(dumps_instance(inst) + "\n")


def load_instance(path, validate: bool = True) -> Instance:
    return loads_instance(pathlib.Path(path).read_text(), validate=validate)


def two_link_instance(deadline: float = 2.0, path_budget: int = 2) -> Instance:
    """Two parallel S->D links, capacities 0.5, delays 1 and 2; unit-rate pure routing."""
    net = Network(
        nodes=("S", "D"),
        links=(Link("S", "D", 1.0, 0.5), Link("S", "D", 2.0, 0.5)),
        cloud={},
    )
    svc = ServiceRequest("k1", "S", "D", stages=(), rates=(1.0,), deadline=deadline)
    return Instance(net, (svc,), path_budget=path_budget)
