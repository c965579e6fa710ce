"""neuroedge: deterministic cloud-edge control simulator.

A cloud-side LQR controller supervises a plant while an edge-side spiking
network learns online, through a local plasticity rule with threshold-gated
updates, to reproduce the control signal and take over actuation with
per-spike energy accounting and explicit communication bookkeeping.
"""

from . import cloud, config, linalg, link, plant, runner, snn, telemetry  # noqa: F401

__version__ = "0.1.0"
