"""Cloud-side controller: LQR state feedback plus potential-field repulsion.

The baseline command is u = -K x.  Obstacle scenarios add a Khatib-style
repulsive acceleration on the force channels, computed against spherical
obstacles that may drift at constant velocity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InsideObstacle


@dataclass
class Obstacle:
    """Sphere of the given radius; center drifts as center0 + velocity * t."""

    center0: np.ndarray
    velocity: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        self.center0 = np.asarray(self.center0, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)
        if self.center0.shape != (3,) or self.velocity.shape != (3,):
            raise DimensionMismatch("obstacle center and velocity must be 3-vectors")
        if self.radius < 0:
            raise DimensionMismatch("obstacle radius must be >= 0")

    def center(self, t: float) -> np.ndarray:
        return self.center0 + self.velocity * t


@dataclass
class RepulsionParams:
    """Khatib potential-field parameters: gain, influence distance, and a
    per-component clamp on the commanded repulsive acceleration."""

    gain: float = 1.0
    influence_radius: float = 15.0
    u_max: float = 1.0

    def __post_init__(self) -> None:
        if self.gain < 0:
            raise DimensionMismatch("repulsion gain must be >= 0")
        if self.influence_radius <= 0:
            raise DimensionMismatch("influence radius must be positive")


@dataclass
class CloudPolicy:
    """Immutable cloud control law: LQR gain plus an obstacle set."""

    k_gain: np.ndarray
    obstacles: list[Obstacle] = field(default_factory=list)
    repulsion: RepulsionParams = field(default_factory=RepulsionParams)

    def __post_init__(self) -> None:
        self.k_gain = np.asarray(self.k_gain, dtype=float)
        if self.k_gain.ndim != 2:
            raise DimensionMismatch("LQR gain must be a 2-D matrix")
        if not np.all(np.isfinite(self.k_gain)):
            raise DimensionMismatch("LQR gain must be finite")

    @property
    def n_inputs(self) -> int:
        return self.k_gain.shape[0]


def lqr_control(policy: CloudPolicy, x: np.ndarray) -> np.ndarray:
    """State feedback u = -K x."""
    x = np.asarray(x, dtype=float)
    if x.shape != (policy.k_gain.shape[1],):
        raise DimensionMismatch(
            f"state length {x.shape} does not match gain columns {policy.k_gain.shape[1]}"
        )
    return -(policy.k_gain @ x)


def repulsive_accel(
    p: np.ndarray, obstacle: Obstacle, t: float, params: RepulsionParams
) -> np.ndarray:
    """Khatib repulsion from one obstacle at position p and time t.

    With d the distance from p to the obstacle surface and d0 the influence
    radius: zero for d >= d0, otherwise
    gain * (1/d - 1/d0) / d^2 * unit(p - center), each component clamped to
    +-u_max.  Raises ``InsideObstacle`` when p is on or inside the surface.
    """
    p = np.asarray(p, dtype=float)
    center = obstacle.center(t)
    offset = p - center
    dist_center = float(np.linalg.norm(offset))
    d = dist_center - obstacle.radius
    if d <= 0.0:
        raise InsideObstacle(
            f"plant at distance {dist_center:.3f} m penetrated obstacle "
            f"(radius {obstacle.radius:.3f} m) at t={t:.1f} s"
        )
    if d >= params.influence_radius:
        return np.zeros(3)
    magnitude = params.gain * (1.0 / d - 1.0 / params.influence_radius) / d**2
    accel = magnitude * offset / dist_center
    return np.clip(accel, -params.u_max, params.u_max)


def cloud_step(policy: CloudPolicy, x: np.ndarray, t: float) -> np.ndarray:
    """Full cloud command: LQR feedback plus repulsion summed over obstacles.

    Repulsion acts on the force channels, i.e. the last three state
    derivatives of the rendezvous plant; for obstacle-free scenarios this is
    exactly ``lqr_control``.
    """
    u = lqr_control(policy, x)
    if policy.obstacles:
        p = np.asarray(x, dtype=float)[:3]
        for obstacle in policy.obstacles:
            u = u + repulsive_accel(p, obstacle, t, policy.repulsion)
    return u
