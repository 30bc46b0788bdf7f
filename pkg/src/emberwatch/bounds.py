"""Closed-form traverse-time bounds and the uncertainty-ratio safety test.

Three bounds, one per fire scenario: stationary fronts need only the
doubled-MST tour time; moving fronts stretch the tour edges at the
confidence-bounded worst-case fire speed; spreading fronts additionally
force a scan of the area each front may engulf, which turns the bound
into the smaller positive root of a quadratic self-consistency equation.

Infeasibility is a value, not an exception: callers branch on it to
trigger UAV recruitment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.stats import norm

from . import tracking
from .errors import DomainError
from .fire import EllipseParams, WindFuelState, front_velocity, front_velocity_jacobian

# Slack when comparing an uncertainty ratio against 1.
RATIO_PASS_TOL = 1e-12


@dataclass(frozen=True)
class FleetParams:
    """Homogeneous UAV parameters relevant to the bounds."""

    speed: float  # m/s
    altitude: float  # m
    half_angle: float  # camera half-angle, rad

    def __post_init__(self):
        if self.speed <= 0:
            raise DomainError(f"speed must be > 0, got {self.speed}")
        if self.altitude <= 0:
            raise DomainError(f"altitude must be > 0, got {self.altitude}")
        if not 0 < self.half_angle < math.pi / 2:
            raise DomainError(f"half_angle must be in (0, pi/2), got {self.half_angle}")


@dataclass(frozen=True)
class BoundInputs:
    """Scalars feeding the traverse-time bounds."""

    mst_length: float  # total MST edge length, m
    fire_count: int
    worst_speed: float  # confidence-bounded fastest fire speed, m/s
    fov_width: float  # ground footprint side, m
    confidence_level: float

    def __post_init__(self):
        if self.mst_length < 0:
            raise DomainError(f"mst_length must be >= 0, got {self.mst_length}")
        if self.fire_count < 1:
            raise DomainError(f"fire_count must be >= 1, got {self.fire_count}")
        if self.worst_speed < 0:
            raise DomainError(f"worst_speed must be >= 0, got {self.worst_speed}")
        if not 0 < self.confidence_level < 1:
            raise DomainError(
                f"confidence_level must be in (0, 1), got {self.confidence_level}"
            )


@dataclass(frozen=True)
class TraverseBound:
    """A traverse-time upper bound with its case tag and diagnostics.

    gamma/beta/delta are the coefficients of the spreading-case quadratic
    gamma*T^2 - beta*T + delta = 0 (None for the other cases). When
    infeasible, seconds is +inf.
    """

    seconds: float
    case: int
    feasible: bool = True
    gamma: float | None = None
    beta: float | None = None
    delta: float | None = None


def _infeasible(case: int, gamma=None, beta=None, delta=None) -> TraverseBound:
    return TraverseBound(
        seconds=math.inf, case=case, feasible=False, gamma=gamma, beta=beta, delta=delta
    )


def fov_width(fleet: FleetParams) -> float:
    """Side length of the ground footprint: 2 * altitude * tan(half_angle)."""
    return 2.0 * fleet.altitude * math.tan(fleet.half_angle)


def worst_case_speed(
    tracks: Iterable[tracking.TrackEstimate],
    confidence_level: float,
    params: EllipseParams,
) -> float:
    """Upper confidence bound on the fastest fire speed across tracks.

    Each per-axis speed is bounded by |mean| + z * std, with the std
    taken from the weather block of P pushed through the velocity
    sensitivity. The two axes are maximized over fires independently, so
    the result can combine the x-bound of one fire with the y-bound of
    another.
    """
    z = float(norm.ppf(1.0 - confidence_level))
    x_bound = 0.0
    y_bound = 0.0
    for track in tracks:
        s = track.mean
        jac = front_velocity_jacobian(s.spread_rate, s.wind_speed, s.wind_azimuth, params)
        weather_cov = track.covariance[5:8, 5:8]
        vel_cov = jac @ weather_cov @ jac.T
        vel = front_velocity(
            WindFuelState(
                spread_rate=max(s.spread_rate, 0.0),
                wind_speed=max(s.wind_speed, 0.0),
                wind_azimuth=s.wind_azimuth,
            ),
            params,
        )
        x_bound = max(x_bound, abs(vel[0]) + z * math.sqrt(max(vel_cov[0, 0], 0.0)))
        y_bound = max(y_bound, abs(vel[1]) + z * math.sqrt(max(vel_cov[1, 1], 0.0)))
    return math.hypot(x_bound, y_bound)


def bound_stationary(inputs: BoundInputs, fleet: FleetParams) -> TraverseBound:
    """Case 1: twice the MST length at UAV speed. Always feasible."""
    return TraverseBound(seconds=2.0 * inputs.mst_length / fleet.speed, case=1)


def bound_moving(inputs: BoundInputs, fleet: FleetParams) -> TraverseBound:
    """Case 2: MST / (v/2 - 2 * worst_speed * (count - 1)).

    Infeasible when the tour edges stretch faster than the UAV halves the
    distance, i.e. the denominator is not positive.
    """
    denom = fleet.speed / 2.0 - 2.0 * inputs.worst_speed * (inputs.fire_count - 1)
    if denom <= 0:
        return _infeasible(2)
    return TraverseBound(seconds=inputs.mst_length / denom, case=2)


def bound_spreading(inputs: BoundInputs, fleet: FleetParams) -> TraverseBound:
    """Case 3: smaller positive root of gamma*T^2 - beta*T + delta = 0.

    T must satisfy T = delta + a*T*(b*T + 1) with a = 2*count*speed/v and
    b = 2*speed/g: the moving-case time plus the scan of every front's
    growth box. gamma = a*b and beta = 1 - a; the bound fails when the
    fleet cannot outrun the growth (a >= 1 or negative discriminant).
    """
    if inputs.fov_width <= 0:
        raise DomainError(f"fov_width must be > 0, got {inputs.fov_width}")
    moving = bound_moving(inputs, fleet)
    if not moving.feasible:
        return _infeasible(3)
    delta = moving.seconds
    a = 2.0 * inputs.fire_count * inputs.worst_speed / fleet.speed
    b = 2.0 * inputs.worst_speed / inputs.fov_width
    gamma = a * b
    beta = 1.0 - a
    if beta <= 0:
        return _infeasible(3, gamma=gamma, beta=beta, delta=delta)
    disc = beta * beta - 4.0 * gamma * delta
    if disc < 0:
        return _infeasible(3, gamma=gamma, beta=beta, delta=delta)
    # Smaller positive root in the cancellation-free form; reduces to the
    # linear solution delta/beta as gamma -> 0.
    seconds = 2.0 * delta / (beta + math.sqrt(disc))
    return TraverseBound(seconds=seconds, case=3, gamma=gamma, beta=beta, delta=delta)


def traverse_bound(case: int, inputs: BoundInputs, fleet: FleetParams) -> TraverseBound:
    """Dispatch on the scenario case."""
    if case == 1:
        return bound_stationary(inputs, fleet)
    if case == 2:
        return bound_moving(inputs, fleet)
    if case == 3:
        return bound_spreading(inputs, fleet)
    raise DomainError(f"case must be 1, 2 or 3, got {case}")


def joint_confidence(fire_count: int, confidence_level: float) -> tuple[float, float]:
    """((1-alpha)^n, 1 - (1-alpha)^n): joint confidence and its complement."""
    if fire_count < 0:
        raise DomainError(f"fire_count must be >= 0, got {fire_count}")
    joint = (1.0 - confidence_level) ** fire_count
    return joint, 1.0 - joint


def uncertainty_ratio(
    track: tracking.TrackEstimate,
    horizon_seconds: float,
    dt: float,
    mode: str = "trace",
) -> float:
    """Forecast residual covariance over the horizon divided by the current one.

    The horizon is converted to steps with ceil (conservative) and floored
    at one step. A value <= 1 certifies that the track will not have
    degraded by the time the tour returns; +inf signals an infeasible
    horizon.
    """
    if not math.isfinite(horizon_seconds):
        return math.inf
    if track.prior_mean is None:
        raise ValueError("uncertainty_ratio requires a predicted track")
    steps = max(1, math.ceil(horizon_seconds / dt))
    _, forecast = tracking.multi_step_predict(track, steps)
    H = tracking.observation_jacobian(track.prior_mean)
    current = tracking.innovation_covariance(
        track.prior_covariance, H, track.observation_noise
    )
    if mode == "trace":
        num = float(np.trace(forecast))
        den = float(np.trace(current))
    elif mode == "max_eig":
        num = float(np.linalg.eigvalsh(forecast).max())
        den = float(np.linalg.eigvalsh(current).max())
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if den <= 0:
        return math.inf
    return num / den
