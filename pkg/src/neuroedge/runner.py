"""Closed-loop orchestration: cloud service, edge loop, plant, and link.

Per control step the edge decodes its current output, asks the gate whether
supervision is due, exchanges StateReport -> ControlSignal with the cloud
when it is, measures the step's error before the substeps run, then advances
the spiking network and actuates the plant with the decoded control.  The
cloud keeps its own reference trajectory: on contact steps it advances with
the control it transmitted, between contacts with its own closed-loop
prediction.  That reference is the "expected" trajectory all tracking
metrics compare against.

The whole run is a pure function of (config, seed): one seeded generator,
fixed iteration order, and an exact-round-trip wire codec make the inproc
and TCP transports produce identical telemetry.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import linalg
from .cloud import CloudPolicy, cloud_step
from .config import ScenarioConfig
from .errors import InsideObstacle, ValidationError
from .link import (
    ControlSignal,
    InprocTransport,
    LinkStats,
    StateReport,
    SupervisionRequest,
    TcpTransport,
    supervision_count,
)
from .engine import advance_step
from .plant import CwParams, LtiPlant, make_cw, make_workbench, rk4_propagate, rk4_step
from .snn import (
    GateMode,
    LearningConfig,
    SupervisionGate,
    decode_control,
    gate_step,
    init_network,
    supervision_due,
)
from .telemetry import (
    ENERGY_PER_SPIKE_PJ,
    RunSummary,
    StepRecord,
    normalized_tracking_error,
    spiking_cost,
    write_run,
)

log = logging.getLogger(__name__)


@dataclass
class SweepSpec:
    base: ScenarioConfig
    n_values: list[int]
    seeds: list[int]

    def validate(self) -> None:
        if not self.n_values or not self.seeds:
            raise ValidationError(["sweep requires non-empty n_values and seeds"])


@dataclass
class RunResult:
    summary: RunSummary
    records: list[StepRecord]
    relearn_windows: list
    link_stats: LinkStats
    spike_log: list
    final_state: np.ndarray
    min_obstacle_distance: float
    spike_budget: int
    diagnostic_cost: float
    paths: dict | None = None


class CloudService:
    """Cloud endpoint: answers each StateReport with the control command."""

    def __init__(self, policy: CloudPolicy, dt: float):
        self.policy = policy
        self.dt = dt

    def handle(self, msg):
        if isinstance(msg, SupervisionRequest):
            return None
        if isinstance(msg, StateReport):
            u = cloud_step(self.policy, msg.vector(), msg.step * self.dt)
            return ControlSignal(step=msg.step, u=tuple(float(v) for v in u))
        raise ValidationError([f"cloud cannot service message {type(msg).__name__}"])


def build_plant(cfg: ScenarioConfig) -> LtiPlant:
    if cfg.scenario == "workbench":
        return make_workbench(x0=cfg.x0, dt=cfg.dt)
    params = CwParams(mu_earth=cfg.cw.mu_earth, r0_km=cfg.cw.r0_km)
    return make_cw(params, r0=cfg.x0[:3], v0=cfg.x0[3:], dt=cfg.dt)


def build_policy(cfg: ScenarioConfig, plant: LtiPlant) -> CloudPolicy:
    gain = linalg.lqr_gain(plant.a, plant.b, cfg.q_weight, cfg.r_weight)
    return CloudPolicy(k_gain=gain, obstacles=list(cfg.obstacles), repulsion=cfg.repulsion)


def _obstacle_clearance(cfg: ScenarioConfig, position: np.ndarray, t: float) -> float:
    clearance = np.inf
    for obstacle in cfg.obstacles:
        d = float(np.linalg.norm(position - obstacle.center(t))) - obstacle.radius
        clearance = min(clearance, d)
    return clearance


def _open_transport(cfg: ScenarioConfig, service: CloudService):
    """Returns (transport, cleanup callable)."""
    if cfg.link == "inproc":
        return InprocTransport(service), lambda: None
    address = cfg.link[len("tcp://") :]
    host, _, port_text = address.partition(":")
    requested_port = int(port_text) if port_text else 0
    bound_port, stop = TcpTransport.serve(service, host=host or "127.0.0.1", port=requested_port)
    transport = TcpTransport(host or "127.0.0.1", bound_port)

    def cleanup() -> None:
        transport.close()
        stop()

    return transport, cleanup


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> RunResult:
    """Execute one closed-loop scenario; optionally write telemetry files."""
    cfg.validate()
    plant = build_plant(cfg)
    policy = build_policy(cfg, plant)
    n_inputs = plant.n_inputs
    if cfg.command_input == "plant_state" and plant.n_states != n_inputs:
        raise ValidationError(
            ["command_input='plant_state' needs matching state and input dimensions"]
        )

    net = cfg.network
    params, state = init_network(
        seed=cfg.seed,
        n_neurons=net.n_neurons,
        decoded_dim=n_inputs,
        n_basis=net.n_basis,
        decoder_variance=net.decoder_variance,
        leak=net.leak,
        rate_l2_cost=net.rate_l2_cost,
        spike_l1_cost=net.spike_l1_cost,
        feedback_gain=net.feedback_gain,
        learning_rate=net.learning_rate,
    )
    lcfg = cfg.learning
    if lcfg.error_threshold.shape != (n_inputs,):
        raise ValidationError(
            [
                f"error_threshold length {lcfg.error_threshold.shape[0]} does not "
                f"match control dimension {n_inputs}"
            ]
        )
    gate = SupervisionGate()
    service = CloudService(policy, cfg.dt)
    transport, cleanup = _open_transport(cfg, service)

    steps = cfg.steps
    dt_sub = cfg.dt / lcfg.substeps_per_step
    update_every = lcfg.update_every(cfg.dt)
    update_stride = lcfg.update_step_stride(cfg.dt)
    x_ref = np.asarray(cfg.x0, dtype=float).copy()
    records: list[StepRecord] = []
    ref_controls = np.zeros((steps, n_inputs))
    hat_controls = np.zeros((steps, n_inputs))
    ref_states = np.zeros((steps, plant.n_states))
    plant_states = np.zeros((steps, plant.n_states))
    rate_history = np.zeros((steps, net.n_neurons))
    cumulative_spikes = 0
    min_clearance = np.inf

    try:
        for s in range(steps):
            t = s * cfg.dt
            if cfg.obstacles:
                clearance = _obstacle_clearance(cfg, plant.x[:3], t)
                min_clearance = min(min_clearance, clearance)
                if clearance <= 0.0:
                    raise InsideObstacle(
                        f"plant penetrated an obstacle at t={t:.1f} s"
                    )

            u_hat_pre = decode_control(params, state)
            due = supervision_due(gate, lcfg, s)
            if due:
                reply = transport.exchange(
                    [
                        SupervisionRequest(step=s),
                        StateReport(step=s, x=tuple(float(v) for v in plant.x)),
                    ]
                )
                u_cloud = reply.vector()
                error = u_cloud - u_hat_pre
            else:
                u_cloud = None
                error = None
            decision = gate_step(gate, lcfg, s, error)

            # The cloud's reference is its own closed-loop prediction from the
            # shared initial state: the "expected" trajectory the plant is
            # compared against.  It stays decoupled from the plant so that
            # actuation noise cannot leak into the comparison baseline.
            u_for_ref = cloud_step(policy, x_ref, t)
            x_ref = rk4_propagate(plant.a, plant.b, x_ref, u_for_ref, cfg.dt)

            command = plant.x.copy() if cfg.command_input == "plant_state" else None
            step_spikes = advance_step(
                params,
                state,
                u_cloud if decision.learn else None,
                command,
                dt_sub,
                lcfg.substeps_per_step,
                update_every,
                lcfg.max_spikes_per_substep,
                step=s,
                update_weights=s % update_stride == 0,
            )
            cumulative_spikes += step_spikes

            u_hat = decode_control(params, state)
            u_act = u_hat
            if cfg.cloud_actuates_warmup and gate.mode is GateMode.WARMUP and due:
                u_act = u_cloud
            rk4_step(plant, u_act)

            ref_controls[s] = u_for_ref
            hat_controls[s] = u_hat
            ref_states[s] = x_ref
            plant_states[s] = plant.x
            rate_history[s] = state.rates
            records.append(
                StepRecord(
                    t=(s + 1) * cfg.dt,
                    x_plant=plant.x.copy(),
                    x_cloud_ref=x_ref.copy(),
                    u_cloud=None if u_cloud is None else u_cloud.copy(),
                    u_hat=u_hat.copy(),
                    spikes=step_spikes,
                    energy_step=ENERGY_PER_SPIKE_PJ * step_spikes,
                    energy_cum=ENERGY_PER_SPIKE_PJ * cumulative_spikes,
                    mode=gate.mode.value,
                    supervised=due,
                )
            )
        if cfg.obstacles:
            clearance = _obstacle_clearance(cfg, plant.x[:3], steps * cfg.dt)
            min_clearance = min(min_clearance, clearance)
    finally:
        cleanup()
    gate.close_window(steps)

    start = min(lcfg.warmup_steps, steps - 1)
    nte_control = normalized_tracking_error(ref_controls, hat_controls, start)
    nte_states = normalized_tracking_error(ref_states, plant_states, start)
    budget = net.n_neurons * steps * lcfg.substeps_per_step
    total_spikes = cumulative_spikes
    summary = RunSummary(
        total_spikes=total_spikes,
        total_energy_pj=ENERGY_PER_SPIKE_PJ * total_spikes,
        spike_fraction=total_spikes / budget,
        nte_states=nte_states,
        nte_control=nte_control,
        supervision_messages=transport.stats.messages_sent["control"],
    )
    diagnostic = spiking_cost(
        ref_controls,
        hat_controls,
        rate_history,
        net.spike_l1_cost,
        net.rate_l2_cost,
        cfg.horizon,
    )
    log.info(
        "run %s seed=%d: %d spikes of budget %d (%.2f%%; per-step budget %d), "
        "%d supervision messages, nte_control=%.4g, nte_states=%.4g, cost=%.4g",
        cfg.scenario,
        cfg.seed,
        total_spikes,
        budget,
        100.0 * total_spikes / budget,
        net.n_neurons * steps,
        summary.supervision_messages,
        nte_control,
        nte_states,
        diagnostic,
    )
    expected = supervision_count(steps, lcfg, gate.relearn_windows)
    if expected != summary.supervision_messages:
        log.warning(
            "supervision accounting mismatch: schedule formula %d, observed %d",
            expected,
            summary.supervision_messages,
        )

    paths = None
    target_dir = out_dir or cfg.out_dir
    if target_dir is not None:
        paths = write_run(
            records,
            summary,
            state.spike_log,
            target_dir,
            n_states=plant.n_states,
            n_inputs=n_inputs,
        )
    return RunResult(
        summary=summary,
        records=records,
        relearn_windows=list(gate.relearn_windows),
        link_stats=transport.stats,
        spike_log=list(state.spike_log),
        final_state=plant.x.copy(),
        min_obstacle_distance=float(min_clearance),
        spike_budget=budget,
        diagnostic_cost=diagnostic,
        paths=paths,
    )


def run_sweep(spec: SweepSpec, out_dir=None) -> list[dict]:
    """Run the (N, seed) grid and emit sweep.csv rows."""
    from dataclasses import replace

    spec.validate()
    rows = []
    for n_neurons in spec.n_values:
        for seed in spec.seeds:
            cfg = replace(
                spec.base,
                network=replace(spec.base.network, n_neurons=n_neurons),
                seed=seed,
                out_dir=None,
            )
            result = run_scenario(cfg)
            rows.append(
                {
                    "N": n_neurons,
                    "seed": seed,
                    "nte_control": result.summary.nte_control,
                    "nte_states": result.summary.nte_states,
                    "total_spikes": result.summary.total_spikes,
                    "total_energy_pJ": result.summary.total_energy_pj,
                    "supervision_messages": result.summary.supervision_messages,
                }
            )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        header = [
            "N",
            "seed",
            "nte_control",
            "nte_states",
            "total_spikes",
            "total_energy_pJ",
            "supervision_messages",
        ]
        with (out / "sweep.csv").open("w") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(
                    ",".join(
                        repr(row[col]) if isinstance(row[col], float) else str(row[col])
                        for col in header
                    )
                    + "\n"
                )
    return rows
