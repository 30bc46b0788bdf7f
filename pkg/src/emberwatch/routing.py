"""Waypoint graphs, MST tours, k-opt improvement, and waypoint reduction.

Everything here is deterministic for a fixed input ordering: MST ties
break on (weight, node pair), tour construction visits children in id
order, and the k-opt scan order is fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidSplit
from .geometry import smallest_enclosing_circle

_IMPROVE_EPS = 1e-12


@dataclass(frozen=True)
class Tour:
    """A closed cycle over node indices with its Euclidean length."""

    order: tuple[int, ...]
    length: float


@dataclass(frozen=True)
class SteinerWaypoint:
    """One reduced waypoint covering the member fire points."""

    position: np.ndarray  # (2,)
    members: tuple[int, ...]  # covered fire ids


def tour_length(nodes: np.ndarray, order) -> float:
    """Length of the closed cycle visiting `order`."""
    nodes = np.asarray(nodes, dtype=float)
    if len(order) < 2:
        return 0.0
    pts = nodes[list(order)]
    return float(np.linalg.norm(pts - np.roll(pts, -1, axis=0), axis=1).sum())


def build_mst(nodes) -> tuple[list[tuple[int, int]], float]:
    """Minimum spanning tree by Kruskal with (weight, i, j) tie-breaking."""
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    if n == 0:
        raise ValueError("need at least one node")
    if n == 1:
        return [], 0.0

    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            edges.append((float(np.linalg.norm(nodes[i] - nodes[j])), i, j))
    edges.sort()

    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree: list[tuple[int, int]] = []
    total = 0.0
    for w, i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            tree.append((i, j))
            total += w
            if len(tree) == n - 1:
                break
    return tree, total


def tour_from_mst(nodes, mst_edges) -> Tour:
    """Preorder depth-first walk of the MST from node 0 with shortcutting.

    The resulting cycle is at most twice the MST length.
    """
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    if n == 1:
        return Tour(order=(0,), length=0.0)

    adj: dict[int, list[int]] = {i: [] for i in range(n)}
    for i, j in mst_edges:
        adj[i].append(j)
        adj[j].append(i)
    for neighbors in adj.values():
        neighbors.sort()

    order: list[int] = []
    seen = [False] * n
    stack = [0]
    while stack:
        node = stack.pop()
        if seen[node]:
            continue
        seen[node] = True
        order.append(node)
        for neighbor in reversed(adj[node]):
            if not seen[neighbor]:
                stack.append(neighbor)
    return Tour(order=tuple(order), length=tour_length(nodes, order))


def k_opt_improve(tour: Tour, nodes, k: int = 2, max_passes: int = 50) -> Tour:
    """Local-search improvement: 2-opt passes, optionally one 3-opt polish.

    First-improvement with a fixed scan order; the length never increases.
    With k=3 a single 3-opt pass runs after 2-opt converges, followed by
    more 2-opt passes.
    """
    if k not in (2, 3):
        raise ValueError(f"k must be 2 or 3, got {k}")
    nodes = np.asarray(nodes, dtype=float)
    order = list(tour.order)
    if len(order) < 4:
        return Tour(order=tuple(order), length=tour_length(nodes, order))

    passes = _two_opt(order, nodes, max_passes)
    if k == 3 and passes < max_passes:
        if _three_opt_pass(order, nodes):
            _two_opt(order, nodes, max_passes - passes)
    return Tour(order=tuple(order), length=tour_length(nodes, order))


def _dist(nodes, a: int, b: int) -> float:
    return float(np.linalg.norm(nodes[a] - nodes[b]))


def _two_opt(order: list[int], nodes, max_passes: int) -> int:
    n = len(order)
    passes = 0
    improved = True
    while improved and passes < max_passes:
        improved = False
        passes += 1
        for i in range(1, n - 1):
            for j in range(i + 1, n):
                if i == 1 and j == n - 1:
                    continue  # reverses the whole cycle
                a, b = order[i - 1], order[i]
                c, d = order[j], order[(j + 1) % n]
                delta = _dist(nodes, a, c) + _dist(nodes, b, d) - _dist(nodes, a, b) - _dist(nodes, c, d)
                if delta < -_IMPROVE_EPS:
                    order[i : j + 1] = reversed(order[i : j + 1])
                    improved = True
    return passes


def _three_opt_pass(order: list[int], nodes) -> bool:
    """One first-improvement 3-opt sweep; returns True if a move applied."""
    n = len(order)
    improved = False
    for i in range(n - 2):
        for j in range(i + 1, n - 1):
            for m in range(j + 1, n):
                best = _best_three_opt_move(order, nodes, i, j, m)
                if best is not None:
                    order[:] = best
                    improved = True
    return improved


def _best_three_opt_move(order, nodes, i, j, m):
    n = len(order)
    a, b = order[i], order[i + 1]
    c, d = order[j], order[j + 1]
    e, f = order[m], order[(m + 1) % n]
    d0 = _dist(nodes, a, b) + _dist(nodes, c, d) + _dist(nodes, e, f)

    seg1 = order[i + 1 : j + 1]
    seg2 = order[j + 1 : m + 1]
    best_delta = -_IMPROVE_EPS
    best = None
    candidates = (
        (seg1[::-1], seg2, _dist(nodes, a, c) + _dist(nodes, b, d) + _dist(nodes, e, f)),
        (seg1, seg2[::-1], _dist(nodes, a, b) + _dist(nodes, c, e) + _dist(nodes, d, f)),
        (seg1[::-1], seg2[::-1], _dist(nodes, a, c) + _dist(nodes, b, e) + _dist(nodes, d, f)),
        (seg2, seg1, _dist(nodes, a, d) + _dist(nodes, e, b) + _dist(nodes, c, f)),
        (seg2, seg1[::-1], _dist(nodes, a, d) + _dist(nodes, e, c) + _dist(nodes, b, f)),
        (seg2[::-1], seg1, _dist(nodes, a, e) + _dist(nodes, d, b) + _dist(nodes, c, f)),
        (seg2[::-1], seg1[::-1], _dist(nodes, a, e) + _dist(nodes, d, c) + _dist(nodes, b, f)),
    )
    for first, second, cost in candidates:
        delta = cost - d0
        if delta < best_delta:
            best_delta = delta
            best = order[: i + 1] + list(first) + list(second) + order[m + 1 :]
    return best


def steiner_reduce(points, fov_width: float, ids=None, max_members: int | None = None) -> list[SteinerWaypoint]:
    """Merge fire points into waypoints whose enclosing circle fits the footprint.

    Greedy in id order: each unassigned point seeds a group, then the
    remaining unassigned points are tried nearest-first and kept while the
    group's smallest enclosing circle stays within radius fov_width / 2.
    The waypoint sits at that circle's center, so every member is within
    fov_width / 2 of it. `max_members` optionally caps the group size,
    which keeps worst-case traverse bounds splittable for dense clusters.
    """
    if fov_width <= 0:
        raise ValueError(f"fov_width must be > 0, got {fov_width}")
    points = np.asarray(points, dtype=float)
    n = len(points)
    if ids is None:
        ids = list(range(n))
    ids = list(ids)
    order = sorted(range(n), key=lambda k: ids[k])

    radius_limit = fov_width / 2.0
    assigned = [False] * n
    waypoints: list[SteinerWaypoint] = []
    for seed in order:
        if assigned[seed]:
            continue
        group = [seed]
        assigned[seed] = True
        candidates = [
            k
            for k in order
            if not assigned[k] and np.linalg.norm(points[k] - points[seed]) <= fov_width
        ]
        candidates.sort(key=lambda k: (float(np.linalg.norm(points[k] - points[seed])), ids[k]))
        center, radius = points[seed], 0.0
        for cand in candidates:
            if max_members is not None and len(group) >= max_members:
                break
            trial = group + [cand]
            trial_center, trial_radius = smallest_enclosing_circle(points[trial])
            if trial_radius <= radius_limit:
                group = trial
                assigned[cand] = True
                center, radius = trial_center, trial_radius
        waypoints.append(
            SteinerWaypoint(
                position=np.asarray(center, dtype=float),
                members=tuple(ids[k] for k in group),
            )
        )
    return waypoints


def partition_path(tour: Tour, nodes, parts: int = 2) -> list[list[int]]:
    """Split the cycle into contiguous segments of near-equal length.

    A greedy walk closes a segment whenever the accumulated length crosses
    the next multiple of total/parts, while leaving at least one node for
    every remaining segment.
    """
    order = list(tour.order)
    return split_sequence(order, nodes, parts, cyclic=True)


def split_sequence(order: list[int], nodes, parts: int, cyclic: bool = False) -> list[list[int]]:
    """Greedy near-equal-length split of a node sequence into open paths."""
    nodes = np.asarray(nodes, dtype=float)
    n = len(order)
    if parts < 1:
        raise InvalidSplit(f"parts must be >= 1, got {parts}")
    if parts > n:
        raise InvalidSplit(f"cannot split {n} nodes into {parts} parts")
    if parts == 1:
        return [list(order)]

    count = n if cyclic else n - 1
    total = sum(_dist(nodes, order[i], order[(i + 1) % n]) for i in range(count))
    target = total / parts

    segments: list[list[int]] = []
    current = [order[0]]
    walked = 0.0
    for i in range(1, n):
        walked += _dist(nodes, order[i - 1], order[i])
        remaining_nodes = n - i
        remaining_segments = parts - len(segments) - 1
        must_close = remaining_nodes == remaining_segments
        may_close = (
            remaining_segments >= 1
            and walked >= (len(segments) + 1) * target - 1e-12
        )
        if must_close or may_close:
            segments.append(current)
            current = []
        current.append(order[i])
    segments.append(current)
    return segments
