import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import heavy_rate_instance, one_per_node_instance, single_stage_instance
from slicerlp.formulations import (build_lp1, build_lp2, fix_placement, placement_pins,
                                   set_routing_weights)
from slicerlp.generator import GeneratorConfig, generate_instance
from slicerlp.lp import Sense, fix_variables, solve_lp
from slicerlp.model import (Instance, Link, Network, Placement, ServiceRequest, two_link_instance,
                            shortest_delay)
from slicerlp.oracle import exact_enumerate, simple_paths

small = GeneratorConfig(grid_rows=3, grid_cols=4, num_cloud=3, chain_length=2, seed=5)


def small_instance(seed, services=2, **kw):
    from dataclasses import replace

    return generate_instance(replace(small, num_services=services, seed=seed, **kw))


def optimum(builder, inst):
    sol = solve_lp(builder(inst)[0])
    return sol.objective if sol.optimal else math.inf


def test_two_link_lp2_structure():
    model, idx = build_lp2(two_link_instance())
    assert idx.categories() == {"r_link", "theta"}
    rows = []
    for cols, vals, sense, rhs in zip(model.row_cols, model.row_vals, model.senses, model.rhs):
        rows.append((sorted((idx.keys[c][:2], v) for c, v in zip(cols, vals)), sense, rhs))
    a, b, th = ("r_link", 0), ("r_link", 1), ("theta", 0)
    assert ([(a, 1.0)], Sense.LE, 0.5) in rows
    assert ([(b, 1.0)], Sense.LE, 0.5) in rows
    assert ([(a, -1.0), (b, -1.0)], Sense.EQ, -1.0) in rows  # source: out-flow 1
    assert ([(a, 1.0), (b, 1.0)], Sense.EQ, 1.0) in rows  # destination: in-flow 1
    assert ([(a, -1.0), (b, -2.0), (th, 1.0)], Sense.EQ, 0.0) in rows
    assert solve_lp(model).objective == pytest.approx(0.001 * 1.5, abs=1e-9)


def test_lp1_categories_and_size():
    inst = small_instance(1)
    m1, idx1 = build_lp1(inst)
    m2, idx2 = build_lp2(inst)
    assert idx1.categories() == {"x", "y", "r", "r_link", "z", "theta"}
    assert idx2.categories() == {"x", "y", "r_link", "theta"}
    assert {key[-1] for key, _ in idx2.of_kind("r_link")} == {1}
    assert {key[-1] for key, _ in idx1.of_kind("z")} == {1, 2}
    assert m2.num_vars < m1.num_vars


def test_single_admissible_node_is_integral():
    inst = single_stage_instance(mu=(10.0,), nfv=(2.0,))
    model, idx = build_lp2(inst)
    sol = solve_lp(model)
    net = inst.network
    route = shortest_delay(net, "S", "c0") + shortest_delay(net, "c0", "D")
    assert sol.objective == pytest.approx(1 + inst.sigma * (2.0 + route), abs=1e-9)
    assert sol[idx[("x", "c0", 0, 1)]] == pytest.approx(1.0, abs=1e-9)


def test_empty_service_list():
    inst = single_stage_instance().replace(services=())
    for builder in (build_lp1, build_lp2):
        model, _ = builder(inst)
        assert model.num_rows == 0
        assert solve_lp(model).objective == pytest.approx(0.0)


@pytest.mark.parametrize("seed", range(5))
def test_single_path_lp1_equals_lp2(seed):
    inst = small_instance(seed, services=1 + seed % 3).replace(path_budget=1)
    assert optimum(build_lp1, inst) == pytest.approx(optimum(build_lp2, inst), abs=1e-7)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 3), st.integers(1, 3))
def test_lp2_dominates_lp1(seed, services, paths):
    inst = small_instance(seed, services).replace(path_budget=paths)
    assert optimum(build_lp2, inst) >= optimum(build_lp1, inst) - 1e-6


# -- aggregation of a bilinear-feasible LP-I point ------------------------------------


def lp1_point(inst, model, idx, placement, splits):
    """Vector for LP-I from a placement and explicit (paths, fractions) per segment."""
    x = np.zeros(model.num_vars)
    for j, val in placement_pins(idx, placement).items():
        x[j] = val
    for (k, s), choice in splits.items():
        worst = 0.0
        for p, (links, frac, delay) in enumerate(choice, start=1):
            x[idx[("r", k, s, p)]] = frac
            for e in links:
                x[idx[("z", e, k, s, p)]] = 1.0
                x[idx[("r_link", e, k, s, p)]] = frac  # = z * r exactly
            worst = max(worst, delay)
        x[idx[("theta", k, s)]] = worst
    return x


@pytest.mark.parametrize("seed", range(6))
def test_aggregated_flows_are_lp2_feasible_and_no_worse(seed):
    rng = np.random.default_rng(seed)
    inst = small_instance(seed, services=1, link_capacity=(100, 100), deadline_base=200.0)
    net = inst.network
    svc = inst.services[0]
    place = Placement({(0, s): sorted(svc.admissible(s))[int(rng.integers(len(svc.admissible(s))))]
                       for s in range(1, svc.length + 1)})
    splits = {}
    for s in range(svc.length + 1):
        a, b = inst.endpoint(0, s, place), inst.endpoint(0, s + 1, place)
        paths = simple_paths(net, a, b, 10_000)
        pick = [paths[int(i)] for i in rng.choice(len(paths), size=2, replace=len(paths) < 2)]
        f = float(rng.uniform(0.1, 0.9))
        splits[(0, s)] = [(pick[0][0], f, pick[0][1]), (pick[1][0], 1 - f, pick[1][1])]
    m1, idx1 = build_lp1(inst)
    point1 = lp1_point(inst, m1, idx1, place, splits)
    assert m1.max_violation(point1) <= 1e-9

    m2, idx2 = build_lp2(inst)
    point2 = np.zeros(m2.num_vars)
    for key, j in idx2.ids.items():
        if key[0] in ("x", "y"):
            point2[j] = point1[idx1[key]]
        elif key[0] == "r_link":
            e, k, s = key[1:4]
            point2[j] = sum(point1[idx1[("r_link", e, k, s, p)]] for p in (1, 2))
    for (_, k, s), j in idx2.of_kind("theta"):
        point2[j] = sum(net.links[e].delay * point2[idx2[("r_link", e, k, s, 1)]]
                        for e in range(len(net.links)))
    assert m2.max_violation(point2) <= 1e-9
    assert m2.objective_value(point2) <= m1.objective_value(point1) + 1e-12


# -- integrality families ------------------------------------------------------------


@pytest.mark.parametrize("seed", range(8))
def test_one_function_per_node_family_is_integral(seed):
    inst = one_per_node_instance(seed)
    model, idx = build_lp2(inst)
    sol = solve_lp(model)
    assert all(min(v, 1 - v) <= 1e-6 for v in idx.x_values(sol).values())
    assert sol.objective == pytest.approx(exact_enumerate(inst).objective, abs=1e-6)


@pytest.mark.parametrize("t", [2, 3])
@pytest.mark.parametrize("seed", range(4))
def test_heavy_rate_gap_at_most_t(t, seed):
    inst = heavy_rate_instance(seed, t)
    best = exact_enumerate(inst).objective
    assert best / optimum(build_lp2, inst) <= t + 1e-6


# -- placement fixing and weights ----------------------------------------------------


def test_fix_placement_two_link_only_changes_objective():
    model, idx = build_lp2(two_link_instance())
    fixed = fix_placement(model, idx, Placement({}))
    assert fixed.lb == model.lb and fixed.ub == model.ub and fixed.rhs == model.rhs
    assert solve_lp(fixed).objective == pytest.approx(1.5)


def test_fix_placement_routes_by_shortest_path():
    inst = single_stage_instance(mu=(10.0, 10.0), nfv=(2.0, 3.0))
    model, idx = build_lp2(inst)
    fixed = fix_placement(model, idx, Placement({(0, 1): "c1"}))
    net = inst.network
    want = shortest_delay(net, "S", "c1") + shortest_delay(net, "c1", "D")
    assert solve_lp(fixed).objective == pytest.approx(want)


def test_fix_placement_rejects_overloaded_node():
    inst = single_stage_instance(mu=(0.5, 10.0), nfv=(1.0, 1.0))
    model, idx = build_lp2(inst)
    with pytest.raises(ValueError, match="capacity"):
        fix_placement(model, idx, Placement({(0, 1): "c0"}))


def contention_instance(deadline1=100.0, deadline2=100.0):
    """Two pure-routing services sharing one fast link X->D of capacity 1.

    Service 1 detours through A (delay 2), service 2 through B (delay 3).
    """
    links = (
        Link("S1", "X", 0.0), Link("S2", "X", 0.0), Link("X", "D", 1.0, 1.0),
        Link("S1", "A", 1.0), Link("A", "D", 1.0),
        Link("S2", "B", 1.0), Link("B", "D", 2.0),
    )
    net = Network(("S1", "S2", "X", "A", "B", "D"), links, {})
    svcs = (ServiceRequest("k1", "S1", "D", (), (1.0,), deadline1),
            ServiceRequest("k2", "S2", "D", (), (1.0,), deadline2))
    return Instance(net, svcs)


def best_integral_routing(weights):
    """Enumerate who gets the fast link: returns (theta1, theta2) of the cheapest choice."""
    options = {"k1": (1.0, 3.0), "k2": (2.0, 1.0)}
    return min(options.values(), key=lambda th: weights[0] * th[0] + weights[1] * th[1])


def thetas(sol, idx):
    return sol[idx[("theta", 0, 0)]], sol[idx[("theta", 1, 0)]]


def test_weights_reroute_boosted_service():
    inst = contention_instance()
    model, idx = build_lp2(inst)
    base = fix_placement(model, idx, Placement({}))
    plain = solve_lp(set_routing_weights(base, idx, {0: 1.0, 1: 1.0}))
    assert plain.objective == pytest.approx(solve_lp(base).objective)
    assert thetas(plain, idx) == pytest.approx(best_integral_routing((1, 1)))
    boosted = solve_lp(set_routing_weights(base, idx, {0: 5.0, 1: 1.0}))
    assert thetas(boosted, idx) == pytest.approx(best_integral_routing((5, 1)))
    assert thetas(boosted, idx)[0] == pytest.approx(1.0)  # service 1 on its fastest route


def test_weight_scaling_is_linear():
    inst = contention_instance()
    model, idx = build_lp2(inst)
    base = fix_placement(model, idx, Placement({}))
    point = solve_lp(base).values
    one = set_routing_weights(base, idx, {0: 1.0, 1: 1.0}).objective_value(point)
    two = set_routing_weights(base, idx, {0: 2.0, 1: 1.0}).objective_value(point)
    theta1 = point[idx[("theta", 0, 0)]]
    assert two - one == pytest.approx(theta1)


def test_weight_errors():
    inst = single_stage_instance()
    model, idx = build_lp2(inst)
    with pytest.raises(ValueError, match="not fixed"):
        set_routing_weights(model, idx, {0: 1.0})
    base = fix_placement(model, idx, Placement({(0, 1): "c0"}))
    with pytest.raises(ValueError, match=">= 1"):
        set_routing_weights(base, idx, {0: 0.5})
    huge = set_routing_weights(base, idx, {0: 1e300})
    assert max(huge.cost) == 1e12


def test_pins_respect_admissibility():
    inst = small_instance(3, services=2)
    model, idx = build_lp2(inst)
    for (_, v, k, s), _ in idx.of_kind("x"):
        assert v in inst.services[k].admissible(s)
    sol = solve_lp(fix_variables(model, {idx[("y", v)]: 0.0 for v in inst.network.cloud}))
    assert not sol.optimal  # no node may host anything
