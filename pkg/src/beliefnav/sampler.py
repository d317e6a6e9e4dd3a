"""Waypoint graph construction by RRT growth under landmark potential fields.

Samples near a landmark are pulled toward it until the landmark has collected
its quota of nearby waypoints; later samples are pushed away so the remaining
budget explores the rest of the map. The raw tree is then densified by
connecting every collision-free pair within ``connect_radius``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .world import GridMap, Landmark, Pose, is_free, segment_free

GRAPH_FORMAT = "waypoint-graph v1"


class DisconnectedGraph(RuntimeError):
    pass


@dataclass(frozen=True)
class SamplerParams:
    max_nodes: int = 40
    steer_step: float = 1.5
    attraction_radius: float = 1.5
    quota_per_landmark: int = 3
    connect_radius: float = 2.5
    rng_seed: int = 0
    goal_bias: float = 0.1
    landmark_bias: float = 0.3
    robot_radius: float = 0.2
    max_attempts_factor: int = 200

    def __post_init__(self):
        for name in ("max_nodes", "steer_step", "attraction_radius", "connect_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.quota_per_landmark < 1:
            raise ValueError("quota_per_landmark must be at least 1")
        if self.max_nodes < 2:
            raise ValueError("max_nodes must leave room for start and goal")

    @property
    def field_gain(self) -> float:
        return 0.5 * self.steer_step


@dataclass(frozen=True)
class Waypoint:
    id: int
    pose: Pose

    @property
    def name(self) -> str:
        return f"wp{self.id}"


@dataclass
class WaypointGraph:
    waypoints: list[Waypoint]
    edges: dict[tuple[int, int], float] = field(default_factory=dict)
    start_id: int = 1
    goal_id: int = 2

    def __post_init__(self):
        self._by_id = {w.id: w for w in self.waypoints}

    def __getitem__(self, wid: int) -> Waypoint:
        return self._by_id[wid]

    def ids(self) -> list[int]:
        return [w.id for w in self.waypoints]

    def add_edge(self, a: int, b: int) -> None:
        if a == b:
            return
        i, j = min(a, b), max(a, b)
        self.edges[(i, j)] = self[i].pose.distance_to(self[j].pose)

    def neighbors(self) -> dict[int, list[tuple[int, float]]]:
        adj: dict[int, list[tuple[int, float]]] = {w.id: [] for w in self.waypoints}
        for (i, j), length in sorted(self.edges.items()):
            adj[i].append((j, length))
            adj[j].append((i, length))
        return adj

    def component_of(self, wid: int) -> set[int]:
        adj = self.neighbors()
        seen = {wid}
        stack = [wid]
        while stack:
            for n, _ in adj[stack.pop()]:
                if n not in seen:
                    seen.add(n)
                    stack.append(n)
        return seen

    def shortest_distances_to(self, target: int) -> dict[int, float]:
        """Graph distance from every waypoint to ``target`` (``inf`` if unreachable)."""
        adj = self.neighbors()
        dist = {w: math.inf for w in adj}
        dist[target] = 0.0
        heap = [(0.0, target)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            for v, length in adj[u]:
                nd = d + length
                if nd < dist[v]:
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        return dist

    def to_text(self) -> str:
        lines = [GRAPH_FORMAT, f"start {self.start_id}", f"goal {self.goal_id}"]
        for w in self.waypoints:
            lines.append(f"w {w.id} {w.pose.x!r} {w.pose.y!r} {w.pose.theta!r}")
        for (i, j), length in sorted(self.edges.items()):
            lines.append(f"e {i} {j} {length!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "WaypointGraph":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not lines or lines[0] != GRAPH_FORMAT:
            raise ValueError(f"not a {GRAPH_FORMAT} file")
        start = goal = None
        wps: list[Waypoint] = []
        edges: dict[tuple[int, int], float] = {}
        for ln in lines[1:]:
            tag, *rest = ln.split()
            if tag == "start":
                start = int(rest[0])
            elif tag == "goal":
                goal = int(rest[0])
            elif tag == "w":
                wps.append(Waypoint(int(rest[0]), Pose(*map(float, rest[1:4]))))
            elif tag == "e":
                i, j = sorted((int(rest[0]), int(rest[1])))
                edges[(i, j)] = float(rest[2])
            else:
                raise ValueError(f"unknown graph line: {ln!r}")
        if start is None or goal is None:
            raise ValueError("graph file lacks start/goal")
        return cls(wps, edges, start, goal)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "WaypointGraph":
        return cls.from_text(Path(path).read_text())


def nearest(nodes: Sequence[Waypoint], point) -> Waypoint:
    """Closest waypoint in the plane; ties go to the lower id."""
    px, py = point
    return min(nodes, key=lambda w: (math.hypot(w.pose.x - px, w.pose.y - py), w.id))


def _field_force(p: np.ndarray, lms: Sequence[Landmark], params: SamplerParams,
                 landmark_fill: dict[int, int]) -> np.ndarray:
    force = np.zeros(2)
    R = params.attraction_radius
    for lm in lms:
        to_lm = np.array(lm.position) - p
        d = float(np.hypot(*to_lm))
        if d >= R or d == 0.0:
            continue
        mag = params.field_gain * (1.0 - d / R)
        if landmark_fill.get(lm.id, 0) < params.quota_per_landmark:
            # stop a robot radius short of the landmark
            force += min(mag, max(d - params.robot_radius, 0.0)) * to_lm / d
        else:
            force -= mag * to_lm / d
    return force


def steer(from_pose: Pose, toward, lms: Sequence[Landmark], params: SamplerParams,
          landmark_fill: dict[int, int]) -> Pose:
    """RRT extension of at most ``steer_step`` displaced by the landmark potential field."""
    start = np.array([from_pose.x, from_pose.y])
    d = np.array(toward, dtype=float) - start
    dist = float(np.hypot(*d))
    p = start + d * min(1.0, params.steer_step / dist) if dist > 0 else start.copy()
    p = p + _field_force(p, lms, params, landmark_fill)
    motion = p - start
    theta = math.atan2(motion[1], motion[0]) if np.any(motion) else from_pose.theta
    return Pose(p[0], p[1], theta)


def connect_neighbors(m: GridMap, graph: WaypointGraph, params: SamplerParams) -> WaypointGraph:
    """Add an edge between every pair within ``connect_radius`` whose segment is free."""
    wps = graph.waypoints
    for a in range(len(wps)):
        for b in range(a + 1, len(wps)):
            wa, wb = wps[a], wps[b]
            length = wa.pose.distance_to(wb.pose)
            if length <= 0 or length > params.connect_radius:
                continue
            key = (min(wa.id, wb.id), max(wa.id, wb.id))
            if key in graph.edges:
                continue
            if segment_free(m, wa.pose, wb.pose, params.robot_radius):
                graph.edges[key] = length
    return graph


def sample_graph(m: GridMap, lms: Sequence[Landmark], start: Pose, goal: Pose,
                 params: SamplerParams) -> WaypointGraph:
    """Grow a landmark-aware RRT from ``start`` and densify it into a waypoint graph.

    Waypoint 1 is the start and waypoint 2 the goal. Raises ``DisconnectedGraph``
    if the two end up in different components.
    """
    r = params.robot_radius
    for name, p in (("start", start), ("goal", goal)):
        if not is_free(m, p, r):
            raise ValueError(f"{name} pose in collision")
    rng = np.random.default_rng(params.rng_seed)
    x0, y0, x1, y1 = m.bounds
    tree = [Waypoint(1, start)]
    goal_wp = Waypoint(2, goal)
    fill = {lm.id: 0 for lm in lms}
    tree_edges: list[tuple[int, int]] = []

    def note_fill(p: Pose) -> None:
        for lm in lms:
            if math.hypot(lm.x - p.x, lm.y - p.y) <= params.attraction_radius:
                fill[lm.id] += 1

    note_fill(start)
    note_fill(goal)
    next_id = 3
    attempts = 0
    while next_id <= params.max_nodes and attempts < params.max_attempts_factor * params.max_nodes:
        attempts += 1
        roll = rng.random()
        unfilled = [lm for lm in lms if fill[lm.id] < params.quota_per_landmark]
        if roll < params.goal_bias:
            target = (goal.x, goal.y)
        elif unfilled and roll < params.goal_bias + params.landmark_bias:
            lm = unfilled[int(rng.integers(len(unfilled)))]
            ang = rng.uniform(-math.pi, math.pi)
            rad = params.attraction_radius * math.sqrt(rng.random())
            target = (lm.x + rad * math.cos(ang), lm.y + rad * math.sin(ang))
        else:
            target = (rng.uniform(x0, x1), rng.uniform(y0, y1))
        near = nearest(tree, target)
        new = steer(near.pose, target, lms, params, fill)
        if not m.in_bounds(new.x, new.y):
            continue
        if near.pose.distance_to(new) < 1e-6:
            continue
        if min(w.pose.distance_to(new) for w in tree + [goal_wp]) < 1e-6:
            continue
        if not is_free(m, new, r) or not segment_free(m, near.pose, new, r):
            continue
        wp = Waypoint(next_id, new)
        next_id += 1
        tree.append(wp)
        tree_edges.append((near.id, wp.id))
        note_fill(new)

    wps = sorted(tree + [goal_wp], key=lambda w: w.id)
    graph = WaypointGraph(wps, {}, start_id=1, goal_id=2)
    for a, b in tree_edges:
        graph.add_edge(a, b)
    connect_neighbors(m, graph, params)
    if graph.goal_id not in graph.component_of(graph.start_id):
        raise DisconnectedGraph("disconnected start/goal")
    return graph


def landmark_counts(graph: WaypointGraph, lms: Sequence[Landmark], radius: float) -> dict[int, int]:
    return {
        lm.id: sum(1 for w in graph.waypoints
                   if math.hypot(w.pose.x - lm.x, w.pose.y - lm.y) <= radius)
        for lm in lms
    }
