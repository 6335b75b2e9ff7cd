"""Mobility, connectivity and hop-count routing."""

import math
import random

import pytest
from hypothesis import given, strategies as st

from relaymarket.topology import (
    MobilityState,
    RoutingView,
    TopologySnapshot,
    build_adjacency,
    compute_dist,
    neighbors,
    step_mobility,
)


def make_state(positions, waypoints=None, speeds=None, arena=(100.0, 100.0), aps=()):
    waypoints = waypoints if waypoints is not None else dict(positions)
    speeds = speeds or {n: 5.0 for n in positions}
    return MobilityState(arena, dict(positions), dict(waypoints), speeds,
                         frozenset(aps))


class TestStepMobility:
    def test_moves_toward_waypoint_at_speed(self):
        state = make_state({1: (0.0, 0.0)}, {1: (10.0, 0.0)}, {1: 4.0})
        stepped = step_mobility(state, random.Random(0))
        assert stepped.positions[1] == (4.0, 0.0)

    def test_clamps_to_waypoint_instead_of_overshooting(self):
        state = make_state({1: (0.0, 0.0)}, {1: (3.0, 0.0)}, {1: 10.0})
        stepped = step_mobility(state, random.Random(0))
        assert stepped.positions[1] == (3.0, 0.0)

    def test_at_waypoint_draws_new_target_without_moving(self):
        state = make_state({1: (5.0, 5.0)}, {1: (5.0, 5.0)}, {1: 10.0})
        stepped = step_mobility(state, random.Random(3))
        assert stepped.positions[1] == (5.0, 5.0)
        assert stepped.waypoints[1] != (5.0, 5.0)
        w, h = state.arena
        x, y = stepped.waypoints[1]
        assert 0.0 <= x <= w and 0.0 <= y <= h

    def test_same_rng_seed_same_walk(self):
        state = make_state({1: (5.0, 5.0), 2: (1.0, 1.0)},
                           {1: (5.0, 5.0), 2: (1.0, 1.0)},
                           {1: 3.0, 2: 7.0})
        a, b = state, state
        for _ in range(10):
            a = step_mobility(a, random.Random("walk"))
        # rebuild the rng the same way: identical positions
        a2 = state
        for _ in range(10):
            a2 = step_mobility(a2, random.Random("walk"))
        assert a.positions == a2.positions

    def test_zero_speed_node_never_moves(self):
        state = make_state({1: (2.0, 2.0)}, {1: (2.0, 2.0)}, {1: 0.0})
        rng = random.Random(1)
        for _ in range(5):
            state = step_mobility(state, rng)
        assert state.positions[1] == (2.0, 2.0)

    def test_access_points_are_not_walked(self):
        # node 0 has no waypoint entry: it is immobile infrastructure
        state = MobilityState((100.0, 100.0), {0: (1.0, 1.0), 1: (2.0, 2.0)},
                              {1: (9.0, 2.0)}, {1: 1.0}, frozenset({0}))
        stepped = step_mobility(state, random.Random(0))
        assert stepped.positions[0] == (1.0, 1.0)
        assert stepped.positions[1] == (3.0, 2.0)


class TestBuildAdjacency:
    def test_boundary_distance_is_connected(self):
        snap = build_adjacency({1: (0.0, 0.0), 2: (10.0, 0.0)}, radius=10.0)
        assert 2 in snap.neighbors(1)

    def test_just_beyond_radius_is_not_connected(self):
        snap = build_adjacency({1: (0.0, 0.0), 2: (10.001, 0.0)}, radius=10.0)
        assert snap.neighbors(1) == set()

    def test_irreflexive(self):
        snap = build_adjacency({1: (0.0, 0.0), 2: (1.0, 0.0)}, radius=5.0)
        assert 1 not in snap.neighbors(1)

    def test_rejects_nonpositive_radius(self):
        with pytest.raises(ValueError):
            build_adjacency({1: (0.0, 0.0)}, radius=0.0)

    @given(st.lists(st.tuples(st.floats(0, 100), st.floats(0, 100)),
                    min_size=2, max_size=12))
    def test_symmetric_for_random_positions(self, coords):
        positions = {i: c for i, c in enumerate(coords)}
        snap = build_adjacency(positions, radius=30.0)
        for node, peers in snap.adjacency.items():
            for peer in peers:
                assert node in snap.adjacency[peer]
                assert peer != node


def line_snapshot(n):
    """0 - 1 - 2 - ... - (n-1), unit spacing, radius 1."""
    return build_adjacency({i: (float(i), 0.0) for i in range(n)}, radius=1.0)


class TestComputeDist:
    def test_self_distance_is_zero(self):
        assert compute_dist(line_snapshot(3), 1, 1) == 0

    def test_line_hop_counts(self):
        snap = line_snapshot(5)
        assert compute_dist(snap, 0, 4) == 4
        assert compute_dist(snap, 3, 4) == 1

    def test_unreachable_is_none(self):
        snap = build_adjacency({1: (0.0, 0.0), 2: (50.0, 0.0)}, radius=1.0)
        assert compute_dist(snap, 1, 2) is None

    def test_takes_the_shortcut(self):
        positions = {0: (0.0, 0.0), 1: (1.0, 0.0), 2: (2.0, 0.0), 3: (1.0, 0.9)}
        snap = build_adjacency(positions, radius=1.4)
        # 0-3 and 3-2 are both within 1.4, so 0 -> 2 takes 2 hops
        assert compute_dist(snap, 0, 2) == 2

    def test_unknown_node_raises(self):
        with pytest.raises(KeyError):
            compute_dist(line_snapshot(2), 0, 9)

    def test_neighbors_helper_matches_snapshot(self):
        snap = line_snapshot(4)
        assert neighbors(snap, 1) == {0, 2}


class TestRoutingView:
    def test_matches_per_pair_bfs(self):
        snap = line_snapshot(6)
        view = RoutingView(snap)
        for node in snap.nodes():
            for dest in snap.nodes():
                assert view.dist(node, dest) == compute_dist(snap, node, dest)

    def test_neighbor_distances_differ_by_at_most_one(self):
        rng = random.Random(99)
        positions = {i: (rng.uniform(0, 60), rng.uniform(0, 60)) for i in range(25)}
        snap = build_adjacency(positions, radius=18.0)
        view = RoutingView(snap)
        for node in snap.nodes():
            for peer in snap.neighbors(node):
                for dest in snap.nodes():
                    a, b = view.dist(node, dest), view.dist(peer, dest)
                    if a is not None and b is not None:
                        assert abs(a - b) <= 1

    def test_unreachable_is_none_not_a_sentinel(self):
        snap = build_adjacency({0: (0.0, 0.0), 1: (99.0, 0.0)}, radius=1.0)
        view = RoutingView(snap)
        assert view.dist(0, 1) is None
