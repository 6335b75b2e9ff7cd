"""Node positions, mobility, connectivity and hop-count routing views.

The simulator replaces a real routing daemon with an omniscient view:
every tick the connectivity graph is rebuilt from node positions and
minimum hop counts are recomputed from scratch. Access points never
move; handhelds follow a random-waypoint walk inside a rectangular
arena.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class NodeKind(Enum):
    ACCESS_POINT = "ap"
    HANDHELD = "handheld"


@dataclass(frozen=True)
class Node:
    """A participant: an immobile access point or a walking handheld."""

    id: int
    kind: NodeKind
    team: Optional[str] = None

    def is_ap(self) -> bool:
        return self.kind is NodeKind.ACCESS_POINT


Coord = tuple[float, float]


@dataclass
class MobilityState:
    """Positions plus per-handheld waypoint targets and speeds (m/tick)."""

    arena: tuple[float, float]
    positions: dict[int, Coord]
    waypoints: dict[int, Coord]
    speeds: dict[int, float]
    ap_ids: frozenset[int]


def _dist2(a: Coord, b: Coord) -> float:
    return (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2


def step_mobility(state: MobilityState, rng) -> MobilityState:
    """Advance every handheld one tick toward its waypoint.

    A handheld already sitting on its waypoint draws a fresh uniform
    waypoint from ``rng`` and does not move this tick. Access points
    never move. Handhelds are processed in ascending node id so the
    same rng stream always yields the same walk.
    """
    w, h = state.arena
    positions = dict(state.positions)
    waypoints = dict(state.waypoints)
    for node_id in sorted(state.waypoints):
        pos = positions[node_id]
        target = waypoints[node_id]
        if pos == target:
            waypoints[node_id] = (rng.uniform(0.0, w), rng.uniform(0.0, h))
            continue
        speed = state.speeds[node_id]
        dist = math.sqrt(_dist2(pos, target))
        if dist <= speed:
            positions[node_id] = target
        else:
            step = speed / dist
            positions[node_id] = (
                pos[0] + (target[0] - pos[0]) * step,
                pos[1] + (target[1] - pos[1]) * step,
            )
    return MobilityState(state.arena, positions, waypoints, state.speeds, state.ap_ids)


@dataclass
class TopologySnapshot:
    """Symmetric, irreflexive neighbor relation at one tick."""

    adjacency: dict[int, set[int]]
    tick: int = 0

    def nodes(self) -> list[int]:
        return sorted(self.adjacency)

    def neighbors(self, node: int) -> set[int]:
        return self.adjacency[node]


def build_adjacency(positions: dict[int, Coord], radius: float, tick: int = 0) -> TopologySnapshot:
    """Unit-disk graph: two distinct nodes are neighbors iff their
    Euclidean distance is at most ``radius`` (boundary inclusive)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    ids = sorted(positions)
    adjacency: dict[int, set[int]] = {i: set() for i in ids}
    r2 = radius * radius
    for idx, a in enumerate(ids):
        for b in ids[idx + 1:]:
            if _dist2(positions[a], positions[b]) <= r2:
                adjacency[a].add(b)
                adjacency[b].add(a)
    return TopologySnapshot(adjacency, tick)


def neighbors(snapshot: TopologySnapshot, node: int) -> set[int]:
    return snapshot.neighbors(node)


def compute_dist(snapshot: TopologySnapshot, node: int, dest: int) -> Optional[int]:
    """Minimum hop count from ``node`` to ``dest`` by breadth-first
    search; ``None`` when unreachable."""
    if node not in snapshot.adjacency or dest not in snapshot.adjacency:
        raise KeyError(f"node {node if node not in snapshot.adjacency else dest} not in snapshot")
    if node == dest:
        return 0
    seen = {node: 0}
    queue = deque([node])
    while queue:
        cur = queue.popleft()
        d = seen[cur] + 1
        for nxt in snapshot.adjacency[cur]:
            if nxt in seen:
                continue
            if nxt == dest:
                return d
            seen[nxt] = d
            queue.append(nxt)
    return None


@dataclass
class RoutingView:
    """Hop counts toward each destination, computed lazily per snapshot.

    dist(n, n) = 0 and for neighboring nodes a, b both able to reach a
    destination the hop counts differ by at most one.
    """

    snapshot: TopologySnapshot
    _by_dest: dict[int, dict[int, int]] = field(default_factory=dict)

    def dist(self, node: int, dest: int) -> Optional[int]:
        table = self._by_dest.get(dest)
        if table is None:
            table = self._bfs_from(dest)
            self._by_dest[dest] = table
        return table.get(node)

    def _bfs_from(self, dest: int) -> dict[int, int]:
        table = {dest: 0}
        queue = deque([dest])
        while queue:
            cur = queue.popleft()
            d = table[cur] + 1
            for nxt in self.snapshot.adjacency[cur]:
                if nxt not in table:
                    table[nxt] = d
                    queue.append(nxt)
        return table
