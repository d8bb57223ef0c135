"""Tests for the taxiway lattice, routing, taxi motion and runway service."""
import os
from collections import deque
from types import SimpleNamespace

import networkx as nx
import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.airside import (RunwayServer, TaxiState, TaxiwayGraph, advance_taxi, count_planes_out, load_lattice,
                         path_length, planes_out_by_runway, runway_service, shortest_path, unimpeded_cells)
from src.calibrate import simulate_taxi_steps
from src.errors import ConfigError


def graph_from_edges(edges, gates=(), thresholds=()):
    g = nx.Graph()
    for u, v, length in edges:
        g.add_edge(u, v, length=float(length))
    return TaxiwayGraph(graph=g, gates=frozenset(gates), runway_thresholds=frozenset(thresholds))


def test_adjacent_gate_and_threshold():
    graph = graph_from_edges([(1, 2, 300)], gates=[1], thresholds=[2])
    assert shortest_path(graph, 1, 2) == [1, 2]


def test_triangle_prefers_two_short_edges():
    graph = graph_from_edges([("A", "B", 100), ("B", "C", 100), ("A", "C", 250)])
    path = shortest_path(graph, "A", "C")
    assert path == ["A", "B", "C"]
    assert path_length(graph, path) == 200


def test_equal_length_paths_break_ties_on_node_ids():
    # 1-2-4 and 1-3-4 both 200 m; insertion order favours 3
    graph = graph_from_edges([(1, 3, 100), (3, 4, 100), (1, 2, 100), (2, 4, 100)])
    assert shortest_path(graph, 1, 4) == [1, 2, 4]


def test_no_route_is_a_config_error():
    graph = graph_from_edges([(1, 2, 100), (3, 4, 100)])
    with pytest.raises(ConfigError):
        shortest_path(graph, 1, 4)
    with pytest.raises(ConfigError):
        shortest_path(graph, 1, 99)


def test_shortest_path_matches_exhaustive_enumeration():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 200:
        n = int(rng.integers(2, 9))
        g = nx.gnp_random_graph(n, 0.5, seed=int(rng.integers(1 << 31)))
        if not nx.has_path(g, 0, n - 1):
            continue
        for u, v in g.edges:
            g.edges[u, v]["length"] = float(rng.integers(1, 6)) * 50.0
        graph = TaxiwayGraph(graph=g, gates=frozenset([0]), runway_thresholds=frozenset([n - 1]))

        candidates = [tuple(p) for p in nx.all_simple_paths(g, 0, n - 1)]
        best = min(candidates, key=lambda p: (path_length(graph, p), p))

        path = shortest_path(graph, 0, n - 1)
        assert path_length(graph, path) == path_length(graph, best)
        assert tuple(path) == best
        checked += 1


def test_load_lattice_reads_roles_and_lengths(tmp_path):
    lattice = tmp_path / "tiny.lattice"
    lattice.write_text("node 1 0 0 threshold\nnode 2 300 400 gate  # ramp\nedge 1 2\nnode 3 0 10\nedge 1 3 25\n")
    graph = load_lattice(lattice)
    assert graph.gates == frozenset([2])
    assert graph.runway_thresholds == frozenset([1])
    assert graph.edge_length(1, 2) == 500.0
    assert graph.edge_length(1, 3) == 25.0


@pytest.mark.parametrize("text, fragment", [
    ("node 1 0 0 threshold\nnode 2 0 1 gate\nedge 1 5\n", "unknown node 5"),
    ("node 1 0 0 threshold\nnode 2 0 1 gate\nnode 2 3 3\n", "duplicate node 2"),
    ("node 1 0 0 runway\n", "unknown node role"),
    ("node 1 0 0 threshold\n", "no gate nodes"),
    ("link 1 2\n", "cannot parse"),
])
def test_load_lattice_rejects_bad_files(tmp_path, text, fragment):
    lattice = tmp_path / "bad.lattice"
    lattice.write_text(text)
    with pytest.raises(ConfigError, match=fragment):
        load_lattice(lattice)


def test_shipped_lattice_routes_every_gate():
    graph = load_lattice(os.path.join(os.path.dirname(os.path.abspath(__file__)), "data", "logan_runway9.lattice"))
    for gate in sorted(graph.gates):
        path = shortest_path(graph, gate, 9)
        assert path[0] == gate and path[-1] == 9


def taxi_steps(taxi, rng):
    steps = 0
    while not taxi.arrived:
        taxi = advance_taxi(taxi, rng)
        steps += 1
    return steps


def test_taxi_without_stops_is_deterministic():
    rng = np.random.default_rng(0)
    taxi = TaxiState(path=(2, 1, 0), length=1050.0, step_distance=200.0, p_stop=0.0)
    assert taxi_steps(taxi, rng) == unimpeded_cells(1050.0, 200.0) == 6


def test_taxi_clamps_at_threshold():
    taxi = TaxiState(path=(1, 0), length=150.0, step_distance=200.0, p_stop=0.0)
    moved = advance_taxi(taxi, np.random.default_rng(0))
    assert moved.distance_along_path == 150.0
    assert moved.arrived


def test_taxi_that_always_stops_never_moves():
    rng = np.random.default_rng(0)
    taxi = TaxiState(path=(1, 0), length=400.0, p_stop=1.0)
    for _ in range(100):
        taxi = advance_taxi(taxi, rng)
    assert taxi.distance_along_path == 0.0


def test_taxi_mean_matches_negative_binomial():
    # 3000 m at 300 m per move, p_stop 0.2: mean 10 / 0.8 = 12.5 steps
    p, k, n = 0.2, 10, 10_000
    rng = np.random.default_rng(11)
    taxi = TaxiState(path=(1, 0), length=3000.0, step_distance=300.0, p_stop=p)
    samples = np.array([taxi_steps(taxi, rng) for _ in range(n)])

    sigma = np.sqrt(k * p) / (1 - p)
    assert abs(samples.mean() - 12.5) < 4 * sigma / np.sqrt(n)
    assert samples.min() >= k


def test_negative_binomial_sampler_mean():
    n = 100_000
    samples = simulate_taxi_steps(10, 0.2, n, np.random.default_rng(3))
    sigma = np.sqrt(10 * 0.2) / 0.8
    assert abs(samples.mean() - 12.5) < 3 * sigma / np.sqrt(n)


def test_runway_never_serves_with_zero_probabilities():
    server = RunwayServer(id="9", p1=0.0, p2=0.0, queue=deque(SimpleNamespace() for _ in range(3)))
    rng = np.random.default_rng(0)
    for now in range(50):
        assert runway_service(server, rng, now) == []
    assert len(server.queue) == 3


def test_saturated_runway_serves_two_from_the_head():
    planes = [SimpleNamespace(id=i, wheelsoff_step=None) for i in range(5)]
    server = RunwayServer(id="9", p1=1.0, p2=1.0, queue=deque(planes))
    departed = runway_service(server, np.random.default_rng(0), now=42)
    assert [a.id for a in departed] == [0, 1]
    assert all(a.wheelsoff_step == 42 for a in departed)
    assert len(server.queue) == 3


def test_runway_moments_under_saturation():
    server = RunwayServer(id="9", p1=0.3, p2=0.3)
    rng = np.random.default_rng(5)
    takeoffs = []
    for now in range(200_000):
        server.queue.extend(SimpleNamespace(wheelsoff_step=None) for _ in range(2 - len(server.queue)))
        takeoffs.append(len(runway_service(server, rng, now)))
    takeoffs = np.array(takeoffs)
    assert_allclose(takeoffs.mean(), 0.6, atol=0.006)
    assert_allclose(takeoffs.var(), 0.42, atol=0.006)


def test_runway_draws_even_with_empty_queue():
    rng_a, rng_b = np.random.default_rng(9), np.random.default_rng(9)
    runway_service(RunwayServer(id="9", p1=0.5, p2=0.5), rng_a, 0)
    rng_b.random(2)
    assert rng_a.random() == rng_b.random()


def fake_state(taxiing, queues):
    return SimpleNamespace(
        taxiing=[SimpleNamespace(runway=rid) for rid in taxiing],
        runways={rid: SimpleNamespace(queue=deque(range(n))) for rid, n in queues.items()},
    )


def test_count_planes_out():
    assert count_planes_out(fake_state([], {"9": 0}), "9") == 0
    assert count_planes_out(fake_state(["9"] * 3, {"9": 4}), "9") == 7
    state = fake_state(["R1", "R1"], {"R1": 1, "R2": 5})
    assert planes_out_by_runway(state) == {"R1": 3, "R2": 5}
