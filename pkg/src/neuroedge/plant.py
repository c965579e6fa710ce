"""State-space plant models and a fixed-step RK4 integrator.

Two scenario plants are provided: a 2-state marginally stable workbench
oscillator and the 6-state linearized Clohessy-Wiltshire relative-motion
model for satellite rendezvous (state ordered [x, y, z, xdot, ydot, zdot],
positions in meters, mean motion in rad/s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonFiniteState

# An RK4 micro-step no longer than this keeps the accumulated zero-input
# propagation error below 1e-7 relative over a 10 s horizon even for the
# fastest mode simulated here (|lambda| = sqrt(2) rad/s).
_MAX_MICRO_STEP = 0.0125


@dataclass
class LtiPlant:
    """Linear time-invariant plant xdot = A x + B u stepped at a fixed dt."""

    a: np.ndarray
    b: np.ndarray
    x: np.ndarray
    dt: float

    def __post_init__(self) -> None:
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.x = np.asarray(self.x, dtype=float).copy()
        n = self.a.shape[0]
        if self.a.ndim != 2 or self.a.shape[1] != n:
            raise DimensionMismatch(f"A must be square, got {self.a.shape}")
        if self.b.ndim != 2 or self.b.shape[0] != n:
            raise DimensionMismatch(f"B rows must match A, got {self.b.shape}")
        if self.x.shape != (n,):
            raise DimensionMismatch(f"state must have length {n}, got {self.x.shape}")
        if not self.dt > 0:
            raise DimensionMismatch("dt must be positive")

    @property
    def n_states(self) -> int:
        return self.a.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.b.shape[1]


@dataclass
class CwParams:
    """Clohessy-Wiltshire constants: gravitational parameter (km^3/s^2),
    target orbital radius (km), and the derived mean motion n (rad/s)."""

    mu_earth: float = 398600.0
    r0_km: float = 6771.0
    mean_motion: float = field(init=False)

    def __post_init__(self) -> None:
        if self.mu_earth <= 0 or self.r0_km <= 0:
            raise DimensionMismatch("mu_earth and r0_km must be positive")
        self.mean_motion = math.sqrt(self.mu_earth / self.r0_km**3)


def rk4_propagate(a: np.ndarray, b: np.ndarray, x: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    """Advance xdot = A x + B u over dt with u held constant (zero-order hold).

    The interval is subdivided into classical RK4 micro-steps so the local
    truncation error stays negligible at the simulator's dt = 0.1 s.
    """
    n_micro = max(1, math.ceil(dt / _MAX_MICRO_STEP))
    h = dt / n_micro
    bu = b @ u

    def deriv(state: np.ndarray) -> np.ndarray:
        return a @ state + bu

    for _ in range(n_micro):
        k1 = deriv(x)
        k2 = deriv(x + 0.5 * h * k1)
        k3 = deriv(x + 0.5 * h * k2)
        k4 = deriv(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def rk4_step(plant: LtiPlant, u: np.ndarray) -> np.ndarray:
    """One fixed-dt RK4 step of the plant; stores and returns the new state."""
    u = np.asarray(u, dtype=float)
    if u.shape != (plant.n_inputs,):
        raise DimensionMismatch(
            f"input must have length {plant.n_inputs}, got {u.shape}"
        )
    if not np.all(np.isfinite(u)):
        raise NonFiniteState("control input is not finite")
    x_next = rk4_propagate(plant.a, plant.b, plant.x, u, plant.dt)
    if not np.all(np.isfinite(x_next)):
        raise NonFiniteState("plant state diverged (non-finite after step)")
    plant.x = x_next
    return x_next


def make_workbench(x0=(5.0, 2.0), dt: float = 0.1) -> LtiPlant:
    """2-state workbench oscillator: xdot = [[0, 1], [-2, 0]] x + [0, 1]^T u.

    Marginally stable (eigenvalues +-i sqrt(2)); default initial state [5, 2].
    """
    a = np.array([[0.0, 1.0], [-2.0, 0.0]])
    b = np.array([[0.0], [1.0]])
    return LtiPlant(a=a, b=b, x=np.asarray(x0, dtype=float), dt=dt)


def make_cw(params: CwParams, r0, v0, dt: float = 0.1) -> LtiPlant:
    """6-state Clohessy-Wiltshire relative-motion plant with thrust on all axes.

    State [x, y, z, xdot, ydot, zdot]; the acceleration rows couple the
    velocities through the mean motion n:

        xddot =  2 n zdot + u_x
        yddot = -n^2 ydot + u_y
        zddot = -2 n xdot + 2 n^2 zdot + u_z

    B routes each input to the matching acceleration channel.
    """
    n = params.mean_motion
    a = np.zeros((6, 6))
    a[0, 3] = 1.0
    a[1, 4] = 1.0
    a[2, 5] = 1.0
    a[3, 5] = 2.0 * n
    a[4, 4] = -(n**2)
    a[5, 3] = -2.0 * n
    a[5, 5] = 2.0 * n**2
    b = np.vstack([np.zeros((3, 3)), np.eye(3)])
    x0 = np.concatenate([np.asarray(r0, dtype=float), np.asarray(v0, dtype=float)])
    if x0.shape != (6,):
        raise DimensionMismatch("r0 and v0 must each have 3 components")
    return LtiPlant(a=a, b=b, x=x0, dt=dt)
