"""Scratch: dynamics variants for the edge loop (not part of the package)."""
import numpy as np

from neuroedge.config import default_config
from neuroedge.linalg import lqr_gain
from neuroedge.plant import make_workbench, rk4_propagate, rk4_step
from neuroedge.snn import (
    GateMode, SupervisionGate, decode_control, gate_step, init_network,
    network_substep, plasticity_update, supervision_due,
)
from neuroedge.cloud import CloudPolicy, cloud_step


def run(seed=0, n_neurons=30, substeps=10, cap=1, fresh_error=True, n_basis=512,
        horizon=10.0, verbose=False, plasticity="substep", m_scale=None,
        plast_every=1):
    cfg = default_config('workbench')
    cfg.seed = seed
    cfg.network.n_neurons = n_neurons
    cfg.network.n_basis = n_basis
    cfg.learning.substeps_per_step = substeps
    cfg.learning.max_spikes_per_substep = cap
    cfg.horizon = horizon

    plant = make_workbench(x0=cfg.x0, dt=cfg.dt)
    gain = lqr_gain(plant.a, plant.b, cfg.q_weight, cfg.r_weight)
    policy = CloudPolicy(k_gain=gain)
    net = cfg.network
    params, state = init_network(cfg.seed, net.n_neurons, 1, net.n_basis,
                                 net.decoder_variance, net.leak, net.rate_l2_cost,
                                 net.spike_l1_cost, net.feedback_gain, net.learning_rate)
    if m_scale is not None:
        # rescale dendritic matrix std from 1/sqrt(N) to m_scale/sqrt(N)
        params.basis_weights *= m_scale
    lcfg = cfg.learning
    gate = SupervisionGate()
    steps = cfg.steps
    dt_sub = cfg.dt / lcfg.substeps_per_step
    x_ref = cfg.x0.copy()
    u_refs, u_hats = [], []
    for s in range(steps):
        t = s * cfg.dt
        u_hat_pre = decode_control(params, state)
        due = supervision_due(gate, lcfg, s)
        if due:
            u_cloud = cloud_step(policy, plant.x, t)
            error = u_cloud - u_hat_pre
        else:
            u_cloud, error = None, None
        decision = gate_step(gate, lcfg, s, error)
        u_for_ref = u_cloud if due else cloud_step(policy, x_ref, t)
        x_ref = rk4_propagate(plant.a, plant.b, x_ref, u_for_ref, cfg.dt)
        if decision.learn and plasticity == "step":
            plasticity_update(params, state, error)
        e_acc = np.zeros(1)
        for sub in range(lcfg.substeps_per_step):
            if decision.learn:
                e_sub = (u_cloud - decode_control(params, state)) if fresh_error else error
                e_acc += e_sub
                if plasticity == "substep" and sub % plast_every == 0:
                    plasticity_update(params, state, e_sub)
            else:
                e_sub = None
            network_substep(params, state, None, e_sub if decision.learn else None,
                            dt_sub, step=s, substep=sub, max_spikes=cap)
        if decision.learn and plasticity == "meane":
            class _S: pass
            plasticity_update(params, state, e_acc / lcfg.substeps_per_step)
        u_hat = decode_control(params, state)
        rk4_step(plant, u_hat)
        u_refs.append(u_for_ref.copy())
        u_hats.append(u_hat.copy())
        if verbose and s % 5 == 0:
            print(f's={s:3d} mode={gate.mode.value:10s} spikes={len(state.spike_log):5d} '
                  f'u_ref={u_for_ref[0]:+9.4f} u_hat={u_hat[0]:+9.4f} |x|={np.linalg.norm(plant.x):9.3f}')
    u_refs, u_hats = np.array(u_refs), np.array(u_hats)
    w = lcfg.warmup_steps
    nte = (np.sum(np.abs(u_refs[w:] - u_hats[w:])) / np.sum(np.abs(u_refs[w:]))
           if steps > w else float('nan'))
    gate.close_window(steps)
    return dict(spikes=len(state.spike_log), nte_control=float(nte),
                final_norm=float(np.linalg.norm(plant.x)),
                windows=list(gate.relearn_windows))


if __name__ == "__main__":
    import itertools, sys
    print("== fresh error, varying cap ==")
    for cap in (1, 2, 5, 30, 90):
        r = run(cap=cap, fresh_error=True)
        print(f"cap={cap:3d} fresh: {r}")
    print("== frozen error, substeps=100, cap=1 ==")
    r = run(substeps=100, cap=1, fresh_error=False)
    print(f"substeps=100 frozen: {r}")
    print("== fresh error, substeps=100, cap=1 ==")
    r = run(substeps=100, cap=1, fresh_error=True)
    print(f"substeps=100 fresh: {r}")
