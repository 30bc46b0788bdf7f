"""Safety and coverage coordination of the UAV fleet.

The safety side builds a close-enough tour over the fires near a human
team, checks every track's uncertainty ratio against the traverse-time
bound, and recruits additional UAVs (splitting the worst segment) until
the check passes or the pool runs dry. The coverage side clusters the
remaining tracked fires, assigns UAVs to clusters at minimum total
distance, and replans when a partition's traverse bound expires.

Agents read a snapshot and are updated in ascending id order, which keeps
whole runs deterministic without a communication model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import tracking
from .bounds import (
    RATIO_PASS_TOL,
    BoundInputs,
    FleetParams,
    TraverseBound,
    fov_width,
    traverse_bound,
    uncertainty_ratio,
    worst_case_speed,
)
from .errors import NoUavAvailable
from .fire import EllipseParams
from .routing import SteinerWaypoint, build_mst, k_opt_improve, split_sequence, steiner_reduce, tour_from_mst

# Steps between coverage replans when a bound is infeasible or far out.
REPLAN_FALLBACK = 25
REPLAN_CAP = 200

KMEANS_MAX_ITER = 100


@dataclass(frozen=True)
class HumanTeam:
    id: int
    position: np.ndarray  # (2,)
    vicinity_radius: float = 150.0

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        if self.vicinity_radius <= 0:
            raise ValueError(f"vicinity_radius must be > 0, got {self.vicinity_radius}")


@dataclass
class UavAgent:
    """One UAV with its pose, camera, and current route."""

    id: int
    pose: np.ndarray  # (3,): x, y, altitude
    speed: float
    half_angle: float
    mode: str = "idle"  # idle | coverage | safety
    route: list = field(default_factory=list)  # waypoint positions, (2,) each
    route_cyclic: bool = True
    route_index: int = 0
    route_direction: int = 1
    replan_deadline: int = 0

    def __post_init__(self):
        self.pose = np.asarray(self.pose, dtype=float)

    def fleet(self) -> FleetParams:
        return FleetParams(speed=self.speed, altitude=float(self.pose[2]), half_angle=self.half_angle)


@dataclass
class SafetySegment:
    """A contiguous share of the vicinity tour owned by one UAV."""

    uav_id: int
    waypoints: list[SteinerWaypoint]
    fire_ids: list[int]


@dataclass(frozen=True)
class FeasibilityReport:
    passed: bool
    uncertainty_ratios: dict[int, float]
    bound: TraverseBound
    worst_speed: float
    waypoints: list[SteinerWaypoint]


@dataclass
class MissionPlan:
    """Safety assignment for one team's vicinity fires."""

    team_id: int
    segments: list[SafetySegment]
    uncertainty_ratios: dict[int, float]
    bounds: list[TraverseBound]
    feasible: bool
    fire_ids: tuple[int, ...]  # membership snapshot used to build the plan

    @property
    def recruited(self) -> int:
        return len(self.segments)


def vicinity_fires(
    tracks: Mapping[int, tracking.TrackEstimate], team: HumanTeam
) -> dict[int, tracking.TrackEstimate]:
    """Tracks whose estimated position lies within the team's vicinity."""
    out: dict[int, tracking.TrackEstimate] = {}
    for fid in sorted(tracks):
        pos = tracks[fid].mean.fire_position
        if float(np.linalg.norm(pos - team.position)) <= team.vicinity_radius:
            out[fid] = tracks[fid]
    return out


def fov_covers(pose: np.ndarray, half_angle: float, point: np.ndarray) -> bool:
    """True when the planar point is inside the square ground footprint."""
    half = pose[2] * math.tan(half_angle)
    return abs(point[0] - pose[0]) <= half and abs(point[1] - pose[1]) <= half


# ---------------------------------------------------------------------------
# safety module


# Cap on fires per safety waypoint: a waypoint cannot be split further, so
# bounded group sizes keep the spreading-case bound recoverable by
# recruiting more UAVs.
SAFETY_MAX_GROUP = 3


def feasibility_test(
    tracks: Mapping[int, tracking.TrackEstimate],
    uav: UavAgent,
    case: int,
    confidence_level: float,
    dt: float,
    params: EllipseParams,
    max_group: int | None = SAFETY_MAX_GROUP,
    ratio_mode: str = "trace",
) -> FeasibilityReport:
    """Can this single UAV keep every given track fresh over one tour?

    Builds the reduced waypoints and MST for the whole track set, computes
    the traverse bound for the scenario case, and evaluates each fire's
    uncertainty ratio over that horizon. Failure is a result, not an error.
    """
    if not tracks:
        raise ValueError("feasibility_test needs at least one track")
    fire_ids = sorted(tracks)
    fleet = uav.fleet()
    g = fov_width(fleet)
    positions = np.array([tracks[f].mean.fire_position for f in fire_ids])
    waypoints = steiner_reduce(positions, g, ids=fire_ids, max_members=max_group)
    segment = SafetySegment(uav_id=uav.id, waypoints=waypoints, fire_ids=fire_ids)
    return _segment_report(segment, tracks, fleet, case, confidence_level, dt, params, ratio_mode)


def _segment_report(
    segment: SafetySegment,
    tracks: Mapping[int, tracking.TrackEstimate],
    fleet: FleetParams,
    case: int,
    confidence_level: float,
    dt: float,
    params: EllipseParams,
    ratio_mode: str = "trace",
) -> FeasibilityReport:
    if not segment.fire_ids:
        bound = TraverseBound(seconds=0.0, case=case)
        return FeasibilityReport(True, {}, bound, 0.0, segment.waypoints)
    g = fov_width(fleet)
    centers = np.array([w.position for w in segment.waypoints])
    _, mst_length = build_mst(centers)
    segment_tracks = [tracks[f] for f in segment.fire_ids]
    speed = worst_case_speed(segment_tracks, confidence_level, params)
    inputs = BoundInputs(
        mst_length=mst_length,
        fire_count=len(segment.fire_ids),
        worst_speed=speed,
        fov_width=g,
        confidence_level=confidence_level,
    )
    bound = traverse_bound(case, inputs, fleet)
    ratios = {
        f: uncertainty_ratio(tracks[f], bound.seconds, dt, mode=ratio_mode)
        for f in segment.fire_ids
    }
    passed = bound.feasible and all(v <= 1.0 + RATIO_PASS_TOL for v in ratios.values())
    return FeasibilityReport(passed, ratios, bound, speed, segment.waypoints)


def plan_safety_tour(
    tracks: Mapping[int, tracking.TrackEstimate],
    assigned: list[UavAgent],
    idle: list[UavAgent],
    case: int,
    confidence_level: float,
    dt: float,
    params: EllipseParams,
    team: HumanTeam | None = None,
    uav_supply: Callable[[], UavAgent] | None = None,
    max_group: int | None = SAFETY_MAX_GROUP,
    ratio_mode: str = "trace",
) -> tuple[MissionPlan, list[UavAgent]]:
    """Build or rebuild a team's safety plan, recruiting as needed.

    `assigned` UAVs are kept (the tour is partitioned among them in
    order); more are pulled nearest-first from `idle`, or minted through
    `uav_supply` when given. Returns the plan and the full list of UAVs
    now assigned. Splitting stops when every failing segment is down to a
    single waypoint or no UAV can be recruited; the plan is then marked
    infeasible.
    """
    team_id = team.id if team is not None else -1
    fire_ids = tuple(sorted(tracks))
    if not fire_ids:
        return MissionPlan(team_id, [], {}, [], True, fire_ids), list(assigned)

    assigned = list(assigned)
    idle = sorted(idle, key=lambda a: a.id)
    anchor = team.position if team is not None else tracks[fire_ids[0]].mean.fire_position
    if not assigned:
        first = _take_nearest(idle, anchor, uav_supply)
        if first is None:
            raise NoUavAvailable("no UAV available for a safety request")
        assigned.append(first)

    fleet = assigned[0].fleet()
    g = fov_width(fleet)
    positions = np.array([tracks[f].mean.fire_position for f in fire_ids])
    waypoints = steiner_reduce(positions, g, ids=list(fire_ids), max_members=max_group)
    centers = np.array([w.position for w in waypoints])
    mst_edges, _ = build_mst(centers)
    tour = k_opt_improve(tour_from_mst(centers, mst_edges), centers, k=3)

    parts = min(len(assigned), len(waypoints))
    chunks = split_sequence(list(tour.order), centers, parts, cyclic=True)
    segments = [
        SafetySegment(
            uav_id=assigned[i].id,
            waypoints=[waypoints[k] for k in chunk],
            fire_ids=sorted(m for k in chunk for m in waypoints[k].members),
        )
        for i, chunk in enumerate(chunks)
    ]
    # Agents beyond the waypoint count hold with an empty share.
    for agent in assigned[parts:]:
        segments.append(SafetySegment(uav_id=agent.id, waypoints=[], fire_ids=[]))

    feasible = True
    while True:
        reports = [
            _segment_report(seg, tracks, fleet, case, confidence_level, dt, params, ratio_mode)
            for seg in segments
        ]
        failing = [i for i, r in enumerate(reports) if not r.passed]
        if not failing:
            break
        splittable = [i for i in failing if len(segments[i].waypoints) >= 2]
        if not splittable:
            feasible = False
            break
        worst = max(splittable, key=lambda i: (max(reports[i].uncertainty_ratios.values()), -i))
        seg = segments[worst]
        seg_centers = np.array([w.position for w in seg.waypoints])
        halves = split_sequence(list(range(len(seg.waypoints))), seg_centers, 2, cyclic=False)
        new_waypoints = [seg.waypoints[k] for k in halves[1]]
        recruit = _take_nearest(idle, new_waypoints[0].position, uav_supply)
        if recruit is None:
            feasible = False
            break
        assigned.append(recruit)
        segments[worst] = SafetySegment(
            uav_id=seg.uav_id,
            waypoints=[seg.waypoints[k] for k in halves[0]],
            fire_ids=sorted(m for k in halves[0] for w in [seg.waypoints[k]] for m in w.members),
        )
        segments.insert(
            worst + 1,
            SafetySegment(
                uav_id=recruit.id,
                waypoints=new_waypoints,
                fire_ids=sorted(m for w in new_waypoints for m in w.members),
            ),
        )

    uncertainty_ratios: dict[int, float] = {}
    for report in reports:
        uncertainty_ratios.update(report.uncertainty_ratios)
    plan = MissionPlan(
        team_id=team_id,
        segments=segments,
        uncertainty_ratios=uncertainty_ratios,
        bounds=[r.bound for r in reports],
        feasible=feasible,
        fire_ids=fire_ids,
    )
    return plan, assigned


def recruit_and_partition(
    tracks: Mapping[int, tracking.TrackEstimate],
    available: list[UavAgent],
    case: int,
    confidence_level: float,
    dt: float,
    params: EllipseParams,
    team: HumanTeam | None = None,
) -> MissionPlan:
    """One-shot safety planning from an idle pool (starts with one UAV)."""
    if not available:
        raise NoUavAvailable("no UAV available for a safety request")
    plan, assigned = plan_safety_tour(
        tracks, [], list(available), case, confidence_level, dt, params, team=team
    )
    apply_safety_plan(plan, {a.id: a for a in assigned})
    return plan


def apply_safety_plan(plan: MissionPlan, agents_by_id: Mapping[int, UavAgent]) -> None:
    """Write segment routes onto the assigned agents (ping-pong patrol).

    Each agent resumes at its nearest waypoint so that replanning does not
    reset patrol progress.
    """
    for segment in plan.segments:
        agent = agents_by_id[segment.uav_id]
        agent.mode = "safety"
        agent.route = [np.asarray(w.position, dtype=float) for w in segment.waypoints]
        agent.route_cyclic = False
        agent.route_index = (
            min(
                range(len(agent.route)),
                key=lambda i: (float(np.linalg.norm(agent.route[i] - agent.pose[:2])), i),
            )
            if agent.route
            else 0
        )
        agent.route_direction = 1


def patrol_step(agents: list[UavAgent], dt: float) -> None:
    """Advance every safety-mode agent along its segment (ping-pong)."""
    for agent in sorted((a for a in agents if a.mode == "safety"), key=lambda a: a.id):
        _follow_route(agent, dt)


def _take_nearest(
    idle: list[UavAgent], position: np.ndarray, uav_supply: Callable[[], UavAgent] | None
) -> UavAgent | None:
    if idle:
        best = min(idle, key=lambda a: (float(np.linalg.norm(a.pose[:2] - position)), a.id))
        idle.remove(best)
        return best
    if uav_supply is not None:
        return uav_supply()
    return None


# ---------------------------------------------------------------------------
# coverage module


def cluster_and_assign(
    points: np.ndarray, uavs: list[UavAgent], rng: np.random.Generator
) -> dict[int, list[int]]:
    """K-means partition of the points plus optimal UAV-to-cluster matching.

    k equals the UAV count (capped at the point count); seeding is
    k-means++ from the supplied generator, Lloyd iterations are capped,
    and the final one-to-one assignment minimizes total planar distance
    from each UAV to its cluster center.
    """
    points = np.asarray(points, dtype=float)
    uavs = sorted(uavs, key=lambda a: a.id)
    if not uavs:
        raise ValueError("need at least one UAV")
    if len(points) == 0:
        raise ValueError("need at least one point")
    k = min(len(uavs), len(points))

    centers = _kmeans_pp_init(points, k, rng)
    labels = np.zeros(len(points), dtype=int)
    for _ in range(KMEANS_MAX_ITER):
        dists = np.linalg.norm(points[:, None, :] - centers[None, :, :], axis=2)
        new_labels = np.argmin(dists, axis=1)
        for c in range(k):
            members = points[new_labels == c]
            if len(members) > 0:
                centers[c] = members.mean(axis=0)
            else:
                # Re-seed an empty cluster at the point farthest from its center.
                far = int(np.argmax(dists[np.arange(len(points)), new_labels]))
                centers[c] = points[far]
                new_labels[far] = c
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels

    cost = np.array(
        [[float(np.linalg.norm(a.pose[:2] - centers[c])) for c in range(k)] for a in uavs]
    )
    rows, cols = linear_sum_assignment(cost)
    result: dict[int, list[int]] = {a.id: [] for a in uavs}
    for r, c in zip(rows, cols):
        result[uavs[r].id] = [int(i) for i in np.nonzero(labels == c)[0]]
    return result


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [points[int(rng.integers(len(points)))]]
    while len(centers) < k:
        d2 = np.min(
            [np.sum((points - c) ** 2, axis=1) for c in centers], axis=0
        )
        total = d2.sum()
        if total <= 0:
            remaining = [i for i in range(len(points)) if d2[i] == 0]
            centers.append(points[remaining[len(centers) % len(remaining)]])
            continue
        centers.append(points[int(rng.choice(len(points), p=d2 / total))])
    return np.array(centers, dtype=float)


def coverage_step(
    agents: list[UavAgent],
    tracks: Mapping[int, tracking.TrackEstimate],
    case: int,
    confidence_level: float,
    dt: float,
    params: EllipseParams,
    rng: np.random.Generator,
    step: int,
    force_replan: bool = False,
) -> dict[int, list[int]]:
    """Advance every coverage UAV; replan partitions when deadlines expire.

    Returns, per agent id, the tracked fires inside its footprint after
    the move. The caller applies actual sensing against ground truth.
    """
    cov = sorted((a for a in agents if a.mode == "coverage"), key=lambda a: a.id)
    if not cov:
        return {}

    fire_ids = sorted(tracks)
    needs_replan = force_replan or any(
        a.replan_deadline <= step or not a.route for a in cov
    )
    if fire_ids and needs_replan:
        _replan_coverage(cov, tracks, fire_ids, case, confidence_level, dt, params, rng, step)

    observed: dict[int, list[int]] = {}
    for agent in cov:
        _follow_route(agent, dt)
        observed[agent.id] = [
            f
            for f in fire_ids
            if fov_covers(agent.pose, agent.half_angle, tracks[f].mean.fire_position)
        ]
    return observed


def _replan_coverage(
    cov: list[UavAgent],
    tracks: Mapping[int, tracking.TrackEstimate],
    fire_ids: list[int],
    case: int,
    confidence_level: float,
    dt: float,
    params: EllipseParams,
    rng: np.random.Generator,
    step: int,
) -> None:
    g = fov_width(cov[0].fleet())
    positions = np.array([tracks[f].mean.fire_position for f in fire_ids])
    waypoints = steiner_reduce(positions, g, ids=fire_ids)
    centers = np.array([w.position for w in waypoints])
    clusters = cluster_and_assign(centers, cov, rng)

    for agent in cov:
        idxs = clusters.get(agent.id, [])
        if not idxs:
            agent.route = []
            agent.replan_deadline = step + REPLAN_FALLBACK
            continue
        pts = centers[idxs]
        mst_edges, mst_length = build_mst(pts)
        tour = k_opt_improve(tour_from_mst(pts, mst_edges), pts, k=3)
        agent.route = [pts[i].copy() for i in tour.order]
        agent.route_cyclic = True
        agent.route_index = 0
        agent.route_direction = 1

        member_fires = sorted({m for i in idxs for m in waypoints[i].members})
        speed = worst_case_speed([tracks[f] for f in member_fires], confidence_level, params)
        bound = traverse_bound(
            case,
            BoundInputs(
                mst_length=mst_length,
                fire_count=len(member_fires),
                worst_speed=speed,
                fov_width=g,
                confidence_level=confidence_level,
            ),
            agent.fleet(),
        )
        if bound.feasible and bound.seconds > 0:
            horizon = min(max(math.ceil(bound.seconds / dt), 1), REPLAN_CAP)
        else:
            horizon = REPLAN_FALLBACK
        agent.replan_deadline = step + horizon


def _follow_route(agent: UavAgent, dt: float) -> None:
    """Move along the route at constant speed, cyclic or ping-pong."""
    if not agent.route:
        return
    budget = agent.speed * dt
    guard = 2 * len(agent.route) + 2
    while budget > 1e-12 and guard > 0:
        guard -= 1
        target = agent.route[agent.route_index]
        delta = target - agent.pose[:2]
        dist = float(np.linalg.norm(delta))
        if dist <= budget:
            agent.pose[:2] = target
            budget -= dist
            if len(agent.route) == 1:
                break
            if agent.route_cyclic:
                agent.route_index = (agent.route_index + 1) % len(agent.route)
            else:
                nxt = agent.route_index + agent.route_direction
                if nxt < 0 or nxt >= len(agent.route):
                    agent.route_direction *= -1
                    nxt = agent.route_index + agent.route_direction
                agent.route_index = nxt
        else:
            agent.pose[:2] += delta * (budget / dist)
            budget = 0.0
