"""Scenario configuration: table-backed defaults plus JSON overrides.

Two base scenarios are built in.  The 2-state workbench runs 10 s at 0.1 s
with a 30-neuron network (decoder variance 10, leak/costs 1e-3, feedback
gain 500, error threshold 0.1).  The 6-state rendezvous runs 360 s at 0.1 s
with 50 neurons (decoder variance 1e-3, leak/costs 1e-4, feedback gain 250,
thresholds 1e-4 per input channel).  The obstacle variants reuse the
rendezvous defaults and add a spherical obstacle on the nominal approach
path; obstacle geometry is a tuning choice, not a claim.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .cloud import Obstacle, RepulsionParams
from .errors import ParseError, ValidationError
from .snn import LearningConfig

SCENARIOS = (
    "workbench",
    "rendezvous",
    "rendezvous_static_obstacle",
    "rendezvous_dynamic_obstacle",
)


@dataclass
class NetworkConfig:
    n_neurons: int
    n_basis: int
    decoder_variance: float
    leak: float
    rate_l2_cost: float
    spike_l1_cost: float
    feedback_gain: float
    learning_rate: float


@dataclass
class CwConfig:
    mu_earth: float = 398600.0
    r0_km: float = 6771.0


@dataclass
class ScenarioConfig:
    scenario: str
    horizon: float
    dt: float
    x0: np.ndarray
    q_weight: np.ndarray
    r_weight: np.ndarray
    network: NetworkConfig
    learning: LearningConfig
    obstacles: list[Obstacle] = field(default_factory=list)
    repulsion: RepulsionParams = field(default_factory=RepulsionParams)
    cw: CwConfig = field(default_factory=CwConfig)
    seed: int = 0
    out_dir: str | None = None
    link: str = "inproc"
    command_input: str = "zero"
    cloud_actuates_warmup: bool = False

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def validate(self) -> None:
        problems = []
        if self.scenario not in SCENARIOS:
            problems.append(f"unknown scenario {self.scenario!r}")
        if not self.dt > 0:
            problems.append("dt must be positive")
        else:
            steps = round(self.horizon / self.dt)
            if steps < 1 or abs(self.horizon - steps * self.dt) > 1e-9 * max(
                1.0, self.horizon
            ):
                problems.append("horizon must be a positive integer multiple of dt")
        if self.network.n_neurons < 1 or self.network.n_basis < 1:
            problems.append("network sizes must be >= 1")
        if self.network.decoder_variance <= 0:
            problems.append("decoder_variance must be positive")
        if np.any(self.learning.error_threshold <= 0):
            problems.append("error thresholds must be positive")
        if self.command_input not in ("zero", "plant_state"):
            problems.append(f"unknown command_input {self.command_input!r}")
        if self.link != "inproc" and not self.link.startswith("tcp://"):
            problems.append(f"link must be 'inproc' or 'tcp://HOST:PORT', got {self.link!r}")
        for obstacle in self.obstacles:
            if obstacle.radius < 0:
                problems.append("obstacle radius must be >= 0")
        if problems:
            raise ValidationError(problems)


def _workbench_defaults() -> ScenarioConfig:
    return ScenarioConfig(
        scenario="workbench",
        horizon=10.0,
        dt=0.1,
        x0=np.array([5.0, 2.0]),
        q_weight=np.eye(2),
        r_weight=np.array([[1.0]]),
        network=NetworkConfig(
            n_neurons=30,
            n_basis=512,
            decoder_variance=10.0,
            leak=0.001,
            rate_l2_cost=0.001,
            spike_l1_cost=0.001,
            feedback_gain=500.0,
            learning_rate=0.001,
        ),
        learning=LearningConfig(error_threshold=np.array([0.1])),
    )


def _rendezvous_defaults(scenario: str = "rendezvous") -> ScenarioConfig:
    obstacles: list[Obstacle] = []
    horizon = 360.0
    # Geometry tuned so the repulsion window opens a few tens of seconds into
    # the approach; the moving obstacle drifts into the deflected corridor and
    # shadows the chaser for longer than the static one, so it costs more
    # control effort and more spikes.  Obstacle scenarios run to the 200 s
    # energy-comparison mark; the interactions are over well before that.
    if scenario == "rendezvous_static_obstacle":
        horizon = 200.0
        obstacles = [
            Obstacle(
                center0=np.array([28.4, 11.9, 0.15]),
                velocity=np.zeros(3),
                radius=4.5,
            )
        ]
    elif scenario == "rendezvous_dynamic_obstacle":
        horizon = 200.0
        obstacles = [
            Obstacle(
                center0=np.array([28.4, 9.9, 0.15]),
                velocity=np.array([0.07, 0.028, 0.0]),
                radius=6.0,
            )
        ]
    return ScenarioConfig(
        scenario=scenario,
        horizon=horizon,
        dt=0.1,
        x0=np.array([70.0, 30.0, -5.0, -1.7, -0.9, 0.25]),
        q_weight=1e-6 * np.eye(6),
        r_weight=np.eye(3),
        network=NetworkConfig(
            n_neurons=50,
            n_basis=512,
            decoder_variance=1e-3,
            leak=1e-4,
            rate_l2_cost=1e-4,
            spike_l1_cost=1e-4,
            feedback_gain=250.0,
            learning_rate=0.001,
        ),
        learning=LearningConfig(
            error_threshold=np.array([1e-4, 1e-4, 1e-4]),
            substeps_per_step=100,
            weight_update_period=0.1,
        ),
        obstacles=obstacles,
        repulsion=RepulsionParams(gain=60.0, influence_radius=15.0, u_max=1.0),
    )


def default_config(scenario: str) -> ScenarioConfig:
    if scenario == "workbench":
        return _workbench_defaults()
    if scenario in ("rendezvous", "rendezvous_static_obstacle", "rendezvous_dynamic_obstacle"):
        return _rendezvous_defaults(scenario)
    raise ValidationError([f"unknown scenario {scenario!r}"])


def _override_dataclass(obj, data: dict, path: str):
    updates = {}
    for key, value in data.items():
        if not hasattr(obj, key):
            raise ValidationError([f"unknown field {path}.{key}"])
        updates[key] = value
    return replace(obj, **updates)


def config_from_dict(data: dict) -> ScenarioConfig:
    """Build a ScenarioConfig from a parsed JSON object; missing fields take
    the named scenario's defaults."""
    if "scenario" not in data:
        raise ValidationError(["missing required field 'scenario'"])
    cfg = default_config(data["scenario"])
    simple = {
        "horizon": float,
        "dt": float,
        "seed": int,
        "out_dir": str,
        "link": str,
        "command_input": str,
        "cloud_actuates_warmup": bool,
    }
    for key, cast in simple.items():
        if key in data:
            setattr(cfg, key, cast(data[key]))
    if "x0" in data:
        cfg.x0 = np.asarray(data["x0"], dtype=float)
    if "Q" in data:
        cfg.q_weight = np.asarray(data["Q"], dtype=float)
    if "R" in data:
        cfg.r_weight = np.asarray(data["R"], dtype=float)
    if "network" in data:
        cfg.network = _override_dataclass(cfg.network, data["network"], "network")
    if "learning" in data:
        learning = dict(data["learning"])
        if "error_threshold" in learning:
            learning["error_threshold"] = np.atleast_1d(
                np.asarray(learning["error_threshold"], dtype=float)
            )
        cfg.learning = _override_dataclass(cfg.learning, learning, "learning")
    if "cw" in data:
        cfg.cw = _override_dataclass(cfg.cw, data["cw"], "cw")
    if "repulsion" in data:
        cfg.repulsion = _override_dataclass(cfg.repulsion, data["repulsion"], "repulsion")
    if "obstacles" in data:
        cfg.obstacles = [
            Obstacle(
                center0=np.asarray(item["center"], dtype=float),
                velocity=np.asarray(item.get("velocity", [0.0, 0.0, 0.0]), dtype=float),
                radius=float(item["radius"]),
            )
            for item in data["obstacles"]
        ]
    cfg.validate()
    return cfg


def load_config(path) -> ScenarioConfig:
    """Parse a JSON scenario file; raises ``ParseError`` with position info
    on bad JSON and ``ValidationError`` listing violated invariants."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top-level JSON value must be an object")
    try:
        return config_from_dict(data)
    except (TypeError, KeyError) as exc:
        raise ValidationError([f"malformed field in {path}: {exc}"]) from exc
