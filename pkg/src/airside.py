"""
Airside model: taxiway lattice, routing, taxi motion and runway servers.

Lattice file (one record per line, '#' starts a comment):

    node <id> <x_m> <y_m> [gate|threshold]
    edge <id1> <id2> [length_m]

Edge lengths default to the euclidean distance between the two nodes.
"""

import heapq
import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Deque, Dict, FrozenSet, List, Sequence

import networkx as nx

from .errors import ConfigError

logger = logging.getLogger(__name__)

NODE_ROLES = ("gate", "threshold")


@dataclass
class TaxiwayGraph:
    graph: nx.Graph
    gates: FrozenSet[int]
    runway_thresholds: FrozenSet[int]

    def edge_length(self, u: int, v: int) -> float:
        return self.graph.edges[u, v]["length"]


def load_lattice(path) -> TaxiwayGraph:
    """Parse a lattice file into a TaxiwayGraph."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Lattice file not found: {path}")

    graph = nx.Graph()
    gates, thresholds = set(), set()
    pending_edges = []

    with open(path, "r") as f:
        for line_number, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            kind = tokens[0]
            try:
                if kind == "node" and len(tokens) in (4, 5):
                    node_id = int(tokens[1])
                    if node_id in graph:
                        raise ConfigError(f"{path}:{line_number}: duplicate node {node_id}")
                    graph.add_node(node_id, x=float(tokens[2]), y=float(tokens[3]))
                    if len(tokens) == 5:
                        role = tokens[4]
                        if role not in NODE_ROLES:
                            raise ConfigError(f"{path}:{line_number}: unknown node role '{role}'")
                        (gates if role == "gate" else thresholds).add(node_id)
                elif kind == "edge" and len(tokens) in (3, 4):
                    length = float(tokens[3]) if len(tokens) == 4 else None
                    pending_edges.append((line_number, int(tokens[1]), int(tokens[2]), length))
                else:
                    raise ConfigError(f"{path}:{line_number}: cannot parse '{line}'")
            except ValueError as e:
                raise ConfigError(f"{path}:{line_number}: {e}") from e

    for line_number, u, v, length in pending_edges:
        for node in (u, v):
            if node not in graph:
                raise ConfigError(f"{path}:{line_number}: edge references unknown node {node}")
        if length is None:
            (x1, y1), (x2, y2) = (
                (graph.nodes[n]["x"], graph.nodes[n]["y"]) for n in (u, v)
            )
            length = math.hypot(x2 - x1, y2 - y1)
        if length <= 0:
            raise ConfigError(f"{path}:{line_number}: edge {u}-{v} must have positive length")
        graph.add_edge(u, v, length=length)

    if not gates:
        raise ConfigError(f"{path}: no gate nodes labeled")
    if not thresholds:
        raise ConfigError(f"{path}: no runway threshold nodes labeled")

    logger.debug("[Airside] Lattice %s: %d nodes, %d edges, %d gates",
                 path.name, graph.number_of_nodes(), graph.number_of_edges(), len(gates))
    return TaxiwayGraph(graph=graph, gates=frozenset(gates), runway_thresholds=frozenset(thresholds))


def path_length(graph: TaxiwayGraph, path: Sequence[int]) -> float:
    total = 0.0
    for u, v in zip(path, path[1:]):
        total += graph.edge_length(u, v)
    return total


def shortest_path(graph: TaxiwayGraph, gate: int, threshold: int) -> List[int]:
    """
    Dijkstra over (distance, node sequence) labels.

    Among minimal-length paths the lexicographically smallest node sequence
    wins, which keeps routing independent of edge insertion order.
    """
    for node in (gate, threshold):
        if node not in graph.graph:
            raise ConfigError(f"Node {node} is not in the taxiway graph")

    best = {gate: (0.0, (gate,))}
    frontier = [(0.0, (gate,))]
    settled = set()

    while frontier:
        dist, path = heapq.heappop(frontier)
        node = path[-1]
        if node in settled or best[node] != (dist, path):
            continue
        settled.add(node)
        if node == threshold:
            return list(path)

        for neighbour in graph.graph.neighbors(node):
            if neighbour in settled:
                continue
            label = (dist + graph.edge_length(node, neighbour), path + (neighbour,))
            if neighbour not in best or label < best[neighbour]:
                best[neighbour] = label
                heapq.heappush(frontier, label)

    raise ConfigError(f"No taxi route from gate {gate} to runway threshold {threshold}")


@dataclass(frozen=True)
class TaxiState:
    path: tuple
    length: float
    distance_along_path: float = 0.0
    step_distance: float = 200.0
    p_stop: float = 0.0

    @property
    def arrived(self) -> bool:
        return self.distance_along_path >= self.length


def advance_taxi(taxi: TaxiState, rng) -> TaxiState:
    """
    Move one step: stopped with probability p_stop, otherwise advance a
    constant distance, clamped at the threshold. One uniform draw per call.
    """
    stopped = rng.random() < taxi.p_stop
    if stopped or taxi.arrived:
        return taxi
    return replace(
        taxi,
        distance_along_path=min(taxi.length, taxi.distance_along_path + taxi.step_distance),
    )


def unimpeded_cells(length: float, step_distance: float) -> int:
    """Moving steps needed to cover `length` (the deterministic minimum)."""
    return math.ceil(length / step_distance)


@dataclass
class RunwayServer:
    id: str
    p1: float
    p2: float
    queue: Deque = field(default_factory=deque)


def runway_service(server: RunwayServer, rng, now: int) -> list:
    """
    Serve one step: capacity is the sum of two Bernoulli draws, applied to
    the FIFO head. Both draws happen even when the queue is empty.
    """
    capacity = int(rng.random() < server.p1) + int(rng.random() < server.p2)
    departed = []
    for _ in range(min(capacity, len(server.queue))):
        aircraft = server.queue.popleft()
        aircraft.wheelsoff_step = now
        departed.append(aircraft)
    return departed


def count_planes_out(state, runway: str) -> int:
    """Aircraft taxiing toward `runway` plus aircraft queued at it."""
    taxiing = sum(1 for a in state.taxiing if a.runway == runway)
    return taxiing + len(state.runways[runway].queue)


def planes_out_by_runway(state) -> Dict[str, int]:
    return {rid: count_planes_out(state, rid) for rid in state.runways}
