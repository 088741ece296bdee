"""Instance builders shared by the tests."""
from __future__ import annotations

import math

import numpy as np

from slicerlp.generator import GeneratorConfig
from slicerlp.model import Instance, Link, Network, ServiceRequest

INF = math.inf


def both_ways(pairs, delay=1.0, capacity=INF):
    out = []
    for i, j in pairs:
        out += [Link(i, j, delay, capacity), Link(j, i, delay, capacity)]
    return out


def single_stage_instance(mu=(10.0,), nfv=(2.0,), rate=1.0, deadline=100.0, capacity=INF):
    """S - hub - D with cloud nodes c0, c1, ... hanging off the hub; one one-function service."""
    clouds = [f"c{n}" for n in range(len(mu))]
    links = both_ways([("S", "h"), ("h", "D")] + [("h", c) for c in clouds], 1.0, capacity)
    net = Network(("S", "h", "D", *clouds), links, dict(zip(clouds, mu)))
    svc = ServiceRequest("k1", "S", "D", (dict(zip(clouds, nfv)),), (rate, rate), deadline)
    return Instance(net, (svc,))


def star_family(rng: np.random.Generator, services: int, clouds: int, *, mu, rate_fn,
                chain: int, nfv_fn) -> Instance:
    """Zero-delay, uncapacitated links; every source reaches every cloud node and D directly."""
    cloud = [f"v{n}" for n in range(clouds)]
    sources = [f"s{n}" for n in range(services)]
    links = []
    for src in sources:
        links += [Link(src, c, 0.0) for c in cloud]
    for a in cloud:
        links.append(Link(a, "D", 0.0))
        links += [Link(a, b, 0.0) for b in cloud if b != a]
    net = Network((*sources, *cloud, "D"), links, {c: float(mu) for c in cloud})
    svcs = []
    for k, src in enumerate(sources):
        stages = tuple({c: float(nfv_fn()) for c in cloud} for _ in range(chain))
        lam = float(rate_fn())
        svcs.append(ServiceRequest(f"k{k + 1}", src, "D", stages, (lam,) * (chain + 1), 1e4))
    return Instance(net, tuple(svcs))


def one_per_node_instance(seed: int) -> Instance:
    """Unit rates and unit node capacities: each cloud node hosts at most one function."""
    rng = np.random.default_rng([11, seed])
    k = int(rng.integers(1, 4))
    return star_family(rng, k, k + int(rng.integers(0, 3)), mu=1.0, rate_fn=lambda: 1.0,
                       chain=1, nfv_fn=lambda: rng.uniform(1.0, 10.0))


def heavy_rate_instance(seed: int, t: int) -> Instance:
    """Every rate is at least mu / t; NFV delays within a factor t of each other."""
    rng = np.random.default_rng([12, t, seed])
    mu = 6.0
    return star_family(rng, 2, 4, mu=mu, rate_fn=lambda: rng.uniform(mu / t, mu), chain=2,
                       nfv_fn=lambda: rng.integers(3, 7))


def tiny_config(seed: int = 0, services: int = 2) -> GeneratorConfig:
    """3x3 grid, 3 cloud nodes, two-function chains: small enough for the exact oracle."""
    return GeneratorConfig(grid_rows=3, grid_cols=3, num_cloud=3, num_services=services,
                           chain_length=2, seed=seed, link_capacity=(3, 15), rate=(1, 6))


def tight_config(seed: int = 0, services: int = 2) -> GeneratorConfig:
    """Like :func:`tiny_config` with scarce link capacity so segment flows split."""
    return GeneratorConfig(grid_rows=3, grid_cols=3, num_cloud=3, num_services=services,
                           chain_length=1, seed=seed, link_capacity=(1, 4), rate=(2, 6),
                           deadline_base=30.0)
