"""Random instance generator.

Topology is either a built-in grid (bidirectional links, cloud nodes spread
over the interior) or a JSON file listing nodes, links and cloud nodes.
Capacities, delays, chains, rates and deadlines are drawn per instance from
a generator seeded by ``(seed, service count, index)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .model import Instance, Link, Network, ServiceRequest, require_valid, shortest_delays_from


class TopologyError(ValueError):
    """The topology cannot host the requested instance."""


@dataclass(frozen=True)
class Topology:
    nodes: tuple
    links: tuple  # directed (i, j) pairs
    cloud: tuple


@dataclass
class GeneratorConfig:
    topology: str = "grid"  # "grid" or a path to a topology JSON file
    grid_rows: int = 5
    grid_cols: int = 6
    num_cloud: int = 6
    num_services: int = 5
    seed: int = 0
    node_capacity: tuple = (50, 100)
    link_capacity: tuple = (5, 55)
    nfv_delay: tuple = (3, 6)
    link_delay: tuple = (1, 2)
    function_types: int = 4
    chain_length: int = 3
    rate: tuple = (1, 11)
    deadline_base: float = 20.0
    deadline_per_hop: float = 3.0
    deadline_slack: tuple = (0.0, 5.0)
    support_prob: float = 1.0  # chance a cloud node can run a given function type
    destination: str = "fixed"  # "fixed" or "random"
    destination_node: Optional[object] = None  # default: last topology node
    path_budget: int = 2
    sigma: float = 0.001

    @classmethod
    def from_dict(cls, doc: dict) -> "GeneratorConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown generator options: {sorted(unknown)}")
        doc = {k: tuple(v) if isinstance(v, list) else v for k, v in doc.items()}
        return cls(**doc)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


def grid_topology(rows: int, cols: int, num_cloud: int) -> Topology:
    """rows x cols grid with links both ways; cloud nodes evenly over the interior."""
    if rows < 1 or cols < 1:
        raise TopologyError("grid needs at least one row and one column")
    nodes = tuple(range(rows * cols))
    links = []
    for r in range(rows):
        for c in range(cols):
            n = r * cols + c
            if c + 1 < cols:
                links += [(n, n + 1), (n + 1, n)]
            if r + 1 < rows:
                links += [(n, n + cols), (n + cols, n)]
    interior = [r * cols + c for r in range(1, rows - 1) for c in range(1, cols - 1)]
    # the last node is the default destination and must stay outside the cloud
    pool = interior if len(interior) >= num_cloud else list(nodes[:-1])
    if num_cloud > len(pool) or num_cloud < 1:
        raise TopologyError(f"cannot place {num_cloud} cloud nodes in a {rows}x{cols} grid")
    picks = np.linspace(0, len(pool) - 1, num_cloud).round().astype(int)
    return Topology(nodes, tuple(links), tuple(pool[p] for p in picks))


def load_topology(path) -> Topology:
    """Read ``{"nodes": [...], "links": [[i, j], ...], "cloud": [...], "bidirectional": bool}``."""
    doc = json.loads(Path(path).read_text())
    links = [tuple(l) for l in doc["links"]]
    if doc.get("bidirectional", False):
        links = links + [(j, i) for i, j in links]
    return Topology(tuple(doc["nodes"]), tuple(links), tuple(doc["cloud"]))


def _topology(cfg: GeneratorConfig) -> Topology:
    if cfg.topology == "grid":
        return grid_topology(cfg.grid_rows, cfg.grid_cols, cfg.num_cloud)
    return load_topology(cfg.topology)


def _uniform_int(rng: np.random.Generator, bounds) -> int:
    return int(rng.integers(bounds[0], bounds[1], endpoint=True))


def generate_instance(cfg: GeneratorConfig, index: int = 0) -> Instance:
    """Instance ``index`` of the family described by ``cfg``; deterministic."""
    topo = _topology(cfg)
    if not topo.cloud:
        raise TopologyError("topology has no cloud node")
    rng = np.random.default_rng([cfg.seed, cfg.num_services, index])
    cloud = set(topo.cloud)
    outside = [n for n in topo.nodes if n not in cloud]

    if cfg.destination == "fixed":
        dest = topo.nodes[-1] if cfg.destination_node is None else cfg.destination_node
        if dest in cloud or dest not in topo.nodes:
            raise TopologyError(f"destination {dest!r} must be a non-cloud node")
        sources = [n for n in outside if n != dest]
    elif cfg.destination == "random":
        sources = outside
    else:
        raise ValueError(f"destination must be 'fixed' or 'random', not {cfg.destination!r}")
    if len(sources) < cfg.num_services or len(outside) < 2:
        raise TopologyError(
            f"{len(sources)} candidate source nodes for {cfg.num_services} services")
    if cfg.chain_length > cfg.function_types:
        raise ValueError("chain_length exceeds the number of function types")

    links = tuple(
        Link(i, j, float(_uniform_int(rng, cfg.link_delay)), float(_uniform_int(rng, cfg.link_capacity)))
        for i, j in topo.links)
    mu = {v: float(_uniform_int(rng, cfg.node_capacity)) for v in topo.cloud}
    net = Network(topo.nodes, links, mu)
    # NFV delay and support per (cloud node, function type)
    nfv = {(v, f): float(_uniform_int(rng, cfg.nfv_delay))
           for v in topo.cloud for f in range(cfg.function_types)}
    support = {f: [v for v in topo.cloud if rng.random() < cfg.support_prob]
               for f in range(cfg.function_types)}
    for f, nodes in support.items():
        if not nodes:
            nodes.append(topo.cloud[int(rng.integers(len(topo.cloud)))])

    src_picks = rng.choice(len(sources), size=cfg.num_services, replace=False)
    services = []
    for k in range(cfg.num_services):
        src = sources[int(src_picks[k])]
        if cfg.destination == "random":
            others = [n for n in outside if n != src]
            dst = others[int(rng.integers(len(others)))]
        else:
            dst = dest
        chain = rng.choice(cfg.function_types, size=cfg.chain_length, replace=False)
        stages = tuple({v: nfv[(v, int(f))] for v in support[int(f)]} for f in chain)
        lam = float(_uniform_int(rng, cfg.rate))
        dist = shortest_delays_from(net, src).get(dst, math.inf)
        if math.isinf(dist):
            raise TopologyError(f"destination {dst!r} unreachable from {src!r}")
        alpha = float(rng.uniform(*cfg.deadline_slack))
        deadline = cfg.deadline_base + cfg.deadline_per_hop * dist + alpha
        services.append(ServiceRequest(f"k{k + 1}", src, dst, stages,
                                       (lam,) * (cfg.chain_length + 1), deadline))
    inst = Instance(net, tuple(services), cfg.path_budget, cfg.sigma)
    require_valid(inst)
    return inst
