"""Edge-side spiking network: an efficient balanced network of LIF neurons
that learns online to reproduce a supervising control signal.

Core quantities, for a network of N neurons decoding a K-dimensional signal
through P nonlinear basis functions:

- decoder        D (K x N): readout u_hat = D r from filtered rates r.
- encoder        F = D^T:   projects the command input into the membranes.
- fast weights   D^T D + mu I: applied instantaneously on each spike, they
  redistribute activity and reset the firing neuron.
- slow weights   (N x P, learned): drive the membranes through the dendritic
  basis psi(r) = tanh(M^T r + theta) and end up implementing the supervised
  signal's dynamics.
- thresholds     T_i = (D_i^T D_i + nu + mu) / 2.

Learning is local: slow_weights += eta * (D^T e) psi(r)^T, using only the
neuron-local projected error and the pre-synaptic basis activity.  A
supervision gate decides per step whether the teacher signal is requested:
always during an initial warmup, then only on periodic check steps unless a
component of |e| exceeds its threshold, which triggers relearning until the
error re-enters the band.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, InvalidDimension, NonFiniteState


@dataclass
class NetworkParams:
    """Fixed parameters of the edge network (immutable after init)."""

    n_neurons: int
    decoded_dim: int
    n_basis: int
    decoder: np.ndarray  # K x N
    encoder: np.ndarray  # N x K, decoder transpose
    fast_weights: np.ndarray  # N x N, decoder^T decoder + rate_l2_cost * I
    basis_weights: np.ndarray  # N x P, fixed random
    basis_offsets: np.ndarray  # P, fixed random
    thresholds: np.ndarray  # N
    leak: float
    rate_l2_cost: float
    spike_l1_cost: float
    feedback_gain: float
    learning_rate: float


@dataclass
class NetworkState:
    """Mutable network state owned by the edge loop."""

    potentials: np.ndarray  # N membrane potentials
    rates: np.ndarray  # N filtered spike trains
    slow_weights: np.ndarray  # N x P, learned online
    spike_log: list = field(default_factory=list)  # (step, substep, neuron)


@dataclass
class LearningConfig:
    """Supervision schedule and discretization of the edge loop.

    ``substeps_per_step`` sets the network integration grid within one
    control step; it must keep the error-feedback drive per substep well
    below the firing thresholds (feedback_gain * dt_sub << 1).
    ``weight_update_period`` is the simulated time between applications of
    the local plasticity rule, snapped to the substep grid.
    """

    error_threshold: np.ndarray
    warmup_steps: int = 50
    check_interval: int = 50
    substeps_per_step: int = 1000
    max_spikes_per_substep: int = 1
    weight_update_period: float = 0.01

    def __post_init__(self) -> None:
        self.error_threshold = np.atleast_1d(
            np.asarray(self.error_threshold, dtype=float)
        )
        if np.any(self.error_threshold <= 0):
            raise InvalidDimension("error thresholds must be positive componentwise")
        if self.warmup_steps < 0 or self.check_interval < 1:
            raise InvalidDimension("warmup_steps >= 0 and check_interval >= 1 required")
        if self.substeps_per_step < 1 or self.max_spikes_per_substep < 1:
            raise InvalidDimension("substeps and spike cap must be >= 1")
        if self.weight_update_period <= 0:
            raise InvalidDimension("weight_update_period must be positive")

    def update_every(self, dt: float) -> int:
        """Weight-update cadence in substeps within one control step."""
        dt_sub = dt / self.substeps_per_step
        return max(1, round(min(self.weight_update_period, dt) / dt_sub))

    def update_step_stride(self, dt: float) -> int:
        """Steps between weight-updating control steps (1 when the period
        fits inside a single step)."""
        return max(1, round(self.weight_update_period / dt))


class GateMode(Enum):
    WARMUP = "warmup"
    AUTONOMOUS = "autonomous"
    RELEARN = "relearn"


@dataclass
class SupervisionGate:
    """Learning-mode state machine: warmup, autonomous checks, relearning."""

    mode: GateMode = GateMode.WARMUP
    steps_in_mode: int = 0
    relearn_windows: list = field(default_factory=list)  # closed (start, end) pairs
    _open_window_start: int | None = None

    def close_window(self, end_step: int) -> None:
        """Close a relearn window still open when the run ends."""
        if self._open_window_start is not None:
            self.relearn_windows.append((self._open_window_start, end_step))
            self._open_window_start = None


@dataclass
class GateDecision:
    learn: bool
    request_supervision: bool


def init_network(
    seed: int,
    n_neurons: int,
    decoded_dim: int,
    n_basis: int,
    decoder_variance: float,
    leak: float,
    rate_l2_cost: float,
    spike_l1_cost: float,
    feedback_gain: float,
    learning_rate: float,
) -> tuple[NetworkParams, NetworkState]:
    """Draw the fixed random structure and zero the mutable state.

    Decoder entries are i.i.d. Normal(0, decoder_variance); the dendritic
    matrix uses Normal(0, 1/N) so pre-activations stay O(1) regardless of
    network size; offsets are standard normal.  One seeded generator produces
    every draw in a fixed order, so equal seeds give bit-identical networks.
    Warns (non-fatally) when N <= 2K, below the noise-robustness margin.
    """
    if n_neurons < 1 or decoded_dim < 1 or n_basis < 1:
        raise InvalidDimension("n_neurons, decoded_dim, and n_basis must be >= 1")
    if decoder_variance <= 0:
        raise InvalidDimension("decoder_variance must be positive")
    if n_neurons <= 2 * decoded_dim:
        warnings.warn(
            f"N={n_neurons} <= 2K={2 * decoded_dim}: network may not be noise-robust",
            stacklevel=2,
        )
    rng = np.random.default_rng(seed)
    decoder = rng.normal(0.0, np.sqrt(decoder_variance), size=(decoded_dim, n_neurons))
    basis_weights = rng.normal(0.0, 1.0 / np.sqrt(n_neurons), size=(n_neurons, n_basis))
    basis_offsets = rng.normal(0.0, 1.0, size=n_basis)
    params = NetworkParams(
        n_neurons=n_neurons,
        decoded_dim=decoded_dim,
        n_basis=n_basis,
        decoder=decoder,
        encoder=decoder.T.copy(),
        fast_weights=decoder.T @ decoder + rate_l2_cost * np.eye(n_neurons),
        basis_weights=basis_weights,
        basis_offsets=basis_offsets,
        thresholds=compute_thresholds(decoder, rate_l2_cost, spike_l1_cost),
        leak=leak,
        rate_l2_cost=rate_l2_cost,
        spike_l1_cost=spike_l1_cost,
        feedback_gain=feedback_gain,
        learning_rate=learning_rate,
    )
    state = NetworkState(
        potentials=np.zeros(n_neurons),
        rates=np.zeros(n_neurons),
        slow_weights=np.zeros((n_neurons, n_basis)),
    )
    return params, state


def compute_thresholds(decoder: np.ndarray, rate_l2_cost: float, spike_l1_cost: float) -> np.ndarray:
    """Firing thresholds T_i = (D_i^T D_i + nu + mu) / 2 per neuron."""
    decoder = np.asarray(decoder, dtype=float)
    return (np.sum(decoder * decoder, axis=0) + spike_l1_cost + rate_l2_cost) / 2.0


def dendritic_basis(basis_weights: np.ndarray, basis_offsets: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """Unstructured dendritic nonlinearity psi_j = tanh(M_j^T r + theta_j)."""
    return np.tanh(basis_weights.T @ rates + basis_offsets)


def decode_control(params: NetworkParams, state: NetworkState) -> np.ndarray:
    """Linear readout u_hat = D r."""
    return params.decoder @ state.rates


def network_substep(
    params: NetworkParams,
    state: NetworkState,
    command: np.ndarray | None,
    error: np.ndarray | None,
    dt_sub: float,
    step: int = 0,
    substep: int = 0,
    max_spikes: int = 1,
) -> list[int]:
    """Advance the network one substep; returns the neurons that fired.

    Exact order: (1) forward-Euler membrane update with leak, command
    encoding, slow-weight drive, and (when supervised) the error feedback
    feedback_gain * D^T e; (2) winner-take-all firing, at most ``max_spikes``
    events, each applying the fast-weight column instantaneously and
    incrementing the firing neuron's rate; (3) exponential rate decay.
    """
    if dt_sub <= 0:
        raise DimensionMismatch("dt_sub must be positive")
    sigma = state.potentials
    rates = state.rates
    psi = dendritic_basis(params.basis_weights, params.basis_offsets, rates)
    drive = -params.leak * sigma + state.slow_weights @ psi
    if command is not None:
        drive = drive + params.encoder @ np.asarray(command, dtype=float)
    if error is not None:
        drive = drive + params.feedback_gain * (
            params.decoder.T @ np.asarray(error, dtype=float)
        )
    sigma = sigma + dt_sub * drive

    fired: list[int] = []
    over = sigma - params.thresholds
    for _ in range(max_spikes):
        j = int(np.argmax(over))
        if over[j] <= 0.0:
            break
        sigma = sigma - params.fast_weights[:, j]
        rates[j] += 1.0
        fired.append(j)
        state.spike_log.append((step, substep, j))
        over = sigma - params.thresholds

    state.potentials = sigma
    state.rates = rates * (1.0 - params.leak * dt_sub)
    if not np.all(np.isfinite(state.potentials)):
        raise NonFiniteState("membrane potentials diverged")
    return fired


def plasticity_update(params: NetworkParams, state: NetworkState, error: np.ndarray) -> None:
    """Local weight update slow_weights += eta * (D^T e) psi(r)^T.

    Uses only the projected error at each neuron and the current pre-synaptic
    basis activity; rows scale with D^T e, columns with psi(r).
    """
    error = np.asarray(error, dtype=float)
    if error.shape != (params.decoded_dim,):
        raise DimensionMismatch(
            f"error must have length {params.decoded_dim}, got {error.shape}"
        )
    if not np.all(np.isfinite(error)):
        raise NonFiniteState("supervision error is not finite")
    psi = dendritic_basis(params.basis_weights, params.basis_offsets, state.rates)
    projected = params.decoder.T @ error
    state.slow_weights += params.learning_rate * np.outer(projected, psi)


def supervision_due(gate: SupervisionGate, cfg: LearningConfig, step: int) -> bool:
    """Whether the gate will request the teacher signal at this step (pure)."""
    mode = gate.mode
    if mode is GateMode.WARMUP and step >= cfg.warmup_steps:
        mode = GateMode.AUTONOMOUS
    if mode is GateMode.WARMUP or mode is GateMode.RELEARN:
        return True
    return step % cfg.check_interval == 0


def gate_step(
    gate: SupervisionGate,
    cfg: LearningConfig,
    step: int,
    error: np.ndarray | None,
) -> GateDecision:
    """Advance the supervision gate for one step and decide whether to learn.

    ``error`` is the error measured through this step's supervised exchange,
    or None when no exchange happened.  Semantics:

    - Warmup (step < warmup_steps): supervised and learning every step.
    - Autonomous: supervision only on periodic check steps; a check measures
      without learning, and a componentwise threshold crossing arms
      relearning from the next step.
    - Relearn: supervised and learning every step.  The threshold comparison
      happens only on check steps (the crossing test is periodic in both
      directions), so relearn windows span whole check intervals; an in-band
      error at a check returns the gate to autonomous from the next step.

    Without a measured error there is never learning (and the runner applies
    no error feedback).  Relearn windows, the spans of steps whose
    supervision was requested by relearn mode, are recorded on the gate.
    """
    if gate.mode is GateMode.WARMUP and step >= cfg.warmup_steps:
        gate.mode = GateMode.AUTONOMOUS
        gate.steps_in_mode = 0
    requested = supervision_due(gate, cfg, step)
    check = step % cfg.check_interval == 0
    learn = False

    if gate.mode is GateMode.WARMUP:
        learn = error is not None
    elif gate.mode is GateMode.RELEARN:
        if gate._open_window_start is None:
            gate._open_window_start = step
        learn = error is not None
        if (
            check
            and error is not None
            and np.all(np.abs(error) <= cfg.error_threshold)
        ):
            gate.relearn_windows.append((gate._open_window_start, step + 1))
            gate._open_window_start = None
            gate.mode = GateMode.AUTONOMOUS
            gate.steps_in_mode = 0
    else:  # autonomous
        if (
            check
            and error is not None
            and np.any(np.abs(error) > cfg.error_threshold)
        ):
            gate.mode = GateMode.RELEARN
            gate.steps_in_mode = 0

    gate.steps_in_mode += 1
    return GateDecision(learn=learn, request_supervision=requested)
