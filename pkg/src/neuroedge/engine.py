"""Hot loop for the edge network: advance a whole control step of substeps.

The semantics per substep are identical to ``snn.network_substep`` plus the
runner's learning cadence:

1. When learning and on the weight-update cadence, apply the local rule
   slow_weights += eta * (D^T e) psi(r)^T with the live error e = u - D r.
2. Membrane update sigma += dt_sub * (-leak*sigma + F c + slow_weights psi
   + k_fb D^T e), the error term only while learning.
3. Winner-take-all firing (argmax over-threshold, ties to the lowest index,
   at most ``max_spikes`` per substep), each spike applying its fast-weight
   column and bumping the firing neuron's rate.
4. Rate decay r *= (1 - leak*dt_sub).

A numba-compiled kernel provides the speed; a pure-numpy twin with the same
operation order is used when numba is unavailable.  Both are deterministic.
"""

from __future__ import annotations

import numpy as np

try:  # pragma: no cover - exercised implicitly by which path runs
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True)
def _advance_kernel(
    sigma,
    rates,
    slow_w,
    decoder,
    basis_w,
    basis_off,
    thresholds,
    fast_w,
    u_target,
    command,
    use_command,
    learn,
    update_weights,
    k_fb,
    leak,
    eta,
    dt_sub,
    substeps,
    update_every,
    max_spikes,
    spike_sub,
    spike_neuron,
):
    n = sigma.shape[0]
    n_spikes = 0
    for m in range(substeps):
        psi = np.tanh(basis_w.T @ rates + basis_off)
        if learn:
            err = u_target - decoder @ rates
            if update_weights and m % update_every == 0:
                proj = decoder.T @ err
                for i in range(n):
                    slow_w[i, :] += eta * proj[i] * psi
        drive = -leak * sigma + slow_w @ psi
        if use_command:
            drive = drive + decoder.T @ command
        if learn:
            drive = drive + k_fb * (decoder.T @ err)
        sigma += dt_sub * drive
        for _ in range(max_spikes):
            best = 0
            margin = sigma[0] - thresholds[0]
            for i in range(1, n):
                over = sigma[i] - thresholds[i]
                if over > margin:
                    margin = over
                    best = i
            if margin <= 0.0:
                break
            sigma -= fast_w[:, best]
            rates[best] += 1.0
            spike_sub[n_spikes] = m
            spike_neuron[n_spikes] = best
            n_spikes += 1
        rates *= 1.0 - leak * dt_sub
    return n_spikes


def _advance_numpy(
    sigma,
    rates,
    slow_w,
    decoder,
    basis_w,
    basis_off,
    thresholds,
    fast_w,
    u_target,
    command,
    use_command,
    learn,
    update_weights,
    k_fb,
    leak,
    eta,
    dt_sub,
    substeps,
    update_every,
    max_spikes,
    spike_sub,
    spike_neuron,
):
    n_spikes = 0
    for m in range(substeps):
        psi = np.tanh(basis_w.T @ rates + basis_off)
        if learn:
            err = u_target - decoder @ rates
            if update_weights and m % update_every == 0:
                slow_w += eta * np.outer(decoder.T @ err, psi)
        drive = -leak * sigma + slow_w @ psi
        if use_command:
            drive = drive + decoder.T @ command
        if learn:
            drive = drive + k_fb * (decoder.T @ err)
        sigma += dt_sub * drive
        for _ in range(max_spikes):
            over = sigma - thresholds
            best = int(np.argmax(over))
            if over[best] <= 0.0:
                break
            sigma -= fast_w[:, best]
            rates[best] += 1.0
            spike_sub[n_spikes] = m
            spike_neuron[n_spikes] = best
            n_spikes += 1
        rates *= 1.0 - leak * dt_sub
    return n_spikes


def advance_step(
    params,
    state,
    u_target: np.ndarray | None,
    command: np.ndarray | None,
    dt_sub: float,
    substeps: int,
    update_every: int,
    max_spikes: int,
    step: int,
    update_weights: bool = True,
) -> int:
    """Run one control step's substeps in place; returns the spike count.

    ``u_target`` is the supervising control signal for this step (None when
    unsupervised); learning and error feedback are active exactly when it is
    present.  Spikes are appended to ``state.spike_log`` as
    (step, substep, neuron).
    """
    learn = u_target is not None
    k = params.decoded_dim
    target = np.zeros(k) if u_target is None else np.asarray(u_target, dtype=float)
    cmd = np.zeros(k) if command is None else np.asarray(command, dtype=float)
    cap = spike_capacity = substeps * max_spikes
    spike_sub = np.empty(cap, dtype=np.int64)
    spike_neuron = np.empty(spike_capacity, dtype=np.int64)
    kernel = _advance_kernel if _HAVE_NUMBA else _advance_numpy
    n_spikes = kernel(
        state.potentials,
        state.rates,
        state.slow_weights,
        params.decoder,
        params.basis_weights,
        params.basis_offsets,
        params.thresholds,
        params.fast_weights,
        target,
        cmd,
        command is not None,
        learn,
        learn and update_weights,
        params.feedback_gain,
        params.leak,
        params.learning_rate,
        dt_sub,
        substeps,
        update_every,
        max_spikes,
        spike_sub,
        spike_neuron,
    )
    if not np.all(np.isfinite(state.potentials)):
        from .errors import NonFiniteState

        raise NonFiniteState("membrane potentials diverged")
    for idx in range(n_spikes):
        state.spike_log.append((step, int(spike_sub[idx]), int(spike_neuron[idx])))
    return n_spikes
