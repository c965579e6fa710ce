"""Per-step records, energy accounting, tracking metrics, and file output.

Energy uses a fixed per-spike cost of 23.6 pJ (Loihi-class hardware figure);
cumulative energy is always computed as 23.6 * cumulative spike count so the
total-energy identity holds exactly in float64.

Files written per run:
- run.csv:    one row per control step (states, controls, spikes, energy,
              gate mode, supervision flag).
- spikes.csv: one row per spike event (step, substep, neuron).
- summary.json: the run summary, verbatim.

All floats are written with Python's repr (shortest exact round-trip for
float64); empty cells encode absent vectors.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateTarget, DimensionMismatch, IoError

ENERGY_PER_SPIKE_PJ = 23.6


@dataclass
class StepRecord:
    """Telemetry row for one control step (states recorded post-step)."""

    t: float
    x_plant: np.ndarray
    x_cloud_ref: np.ndarray
    u_cloud: np.ndarray | None
    u_hat: np.ndarray
    spikes: int
    energy_step: float
    energy_cum: float
    mode: str
    supervised: bool


@dataclass
class RunSummary:
    total_spikes: int
    total_energy_pj: float
    spike_fraction: float
    nte_states: float
    nte_control: float
    supervision_messages: int

    def to_dict(self) -> dict:
        return {
            "total_spikes": self.total_spikes,
            "total_energy_pJ": self.total_energy_pj,
            "spike_fraction": self.spike_fraction,
            "nte_states": self.nte_states,
            "nte_control": self.nte_control,
            "supervision_messages": self.supervision_messages,
        }


def spike_energy(count: int) -> float:
    """Energy in pJ for a spike count: 23.6 * count, exact in float64."""
    if count < 0:
        raise DimensionMismatch("spike count must be >= 0")
    return ENERGY_PER_SPIKE_PJ * count


def normalized_tracking_error(target, actual, start_step: int = 0) -> float:
    """Accumulated L2 deviation over accumulated L2 magnitude of the target.

    Sums over steps >= start_step so warmup transients can be excluded.
    Raises ``DegenerateTarget`` when the target is identically zero on the
    evaluated span.
    """
    target = np.atleast_2d(np.asarray(target, dtype=float))
    actual = np.atleast_2d(np.asarray(actual, dtype=float))
    if target.shape != actual.shape:
        raise DimensionMismatch(
            f"target {target.shape} and actual {actual.shape} differ"
        )
    if not 0 <= start_step < target.shape[0]:
        raise DimensionMismatch("start_step out of range")
    tail_target = target[start_step:]
    tail_actual = actual[start_step:]
    denom = float(np.sum(np.linalg.norm(tail_target, axis=1)))
    if denom == 0.0:
        raise DegenerateTarget("target series is identically zero on the tail")
    num = float(np.sum(np.linalg.norm(tail_target - tail_actual, axis=1)))
    return num / denom


def spiking_cost(
    x_series,
    x_hat_series,
    rate_series,
    nu: float,
    mu: float,
    horizon: float,
) -> float:
    """Diagnostic spiking objective: time-averaged squared tracking error
    plus L1 and L2 rate penalties, (1/t) * sum dt*(err^2 + nu|r|_1 + mu|r|_2^2)."""
    x_series = np.atleast_2d(np.asarray(x_series, dtype=float))
    x_hat_series = np.atleast_2d(np.asarray(x_hat_series, dtype=float))
    rate_series = np.atleast_2d(np.asarray(rate_series, dtype=float))
    steps = x_series.shape[0]
    if steps == 0 or horizon <= 0:
        return 0.0
    dt = horizon / steps
    err_sq = np.sum((x_series - x_hat_series) ** 2, axis=1)
    l1 = np.sum(np.abs(rate_series), axis=1)
    l2 = np.sum(rate_series**2, axis=1)
    return float(np.sum(dt * (err_sq + nu * l1 + mu * l2)) / horizon)


def _fmt(value: float) -> str:
    return repr(float(value))


def _vector_cells(vec: np.ndarray | None, width: int) -> list[str]:
    if vec is None:
        return [""] * width
    return [_fmt(v) for v in np.asarray(vec, dtype=float)]


def run_header(n_states: int, n_inputs: int) -> list[str]:
    cols = ["t"]
    cols += [f"x_plant_{i}" for i in range(n_states)]
    cols += [f"x_cloud_ref_{i}" for i in range(n_states)]
    cols += [f"u_cloud_{i}" for i in range(n_inputs)]
    cols += [f"u_hat_{i}" for i in range(n_inputs)]
    cols += ["spikes", "energy_step", "energy_cum", "mode", "supervised"]
    return cols


def write_run(
    records: list[StepRecord],
    summary: RunSummary,
    spike_log: list,
    out_dir,
    n_states: int | None = None,
    n_inputs: int | None = None,
) -> dict:
    """Write run.csv, spikes.csv, and summary.json under ``out_dir``.

    Dimensions are inferred from the first record unless given (needed for
    header-only output of an empty run).  Returns the paths written.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if records:
            n_states = len(records[0].x_plant)
            n_inputs = len(records[0].u_hat)
        if n_states is None or n_inputs is None:
            raise DimensionMismatch("empty run needs explicit n_states/n_inputs")

        run_path = out / "run.csv"
        with run_path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(run_header(n_states, n_inputs))
            for rec in records:
                row = [_fmt(rec.t)]
                row += _vector_cells(rec.x_plant, n_states)
                row += _vector_cells(rec.x_cloud_ref, n_states)
                row += _vector_cells(rec.u_cloud, n_inputs)
                row += _vector_cells(rec.u_hat, n_inputs)
                row += [
                    str(rec.spikes),
                    _fmt(rec.energy_step),
                    _fmt(rec.energy_cum),
                    rec.mode,
                    str(rec.supervised),
                ]
                writer.writerow(row)

        spikes_path = out / "spikes.csv"
        with spikes_path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "substep", "neuron"])
            for step, substep, neuron in spike_log:
                writer.writerow([step, substep, neuron])

        summary_path = out / "summary.json"
        with summary_path.open("w") as fh:
            json.dump(summary.to_dict(), fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"could not write run output to {out}: {exc}") from exc
    return {"run": run_path, "spikes": spikes_path, "summary": summary_path}


def read_run(path) -> list[StepRecord]:
    """Parse a run.csv back into records (exact float round-trip)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n_states = sum(1 for c in header if c.startswith("x_plant_"))
        n_inputs = sum(1 for c in header if c.startswith("u_cloud_"))
        records = []
        for row in reader:
            idx = 1
            x_plant = np.array([float(v) for v in row[idx : idx + n_states]])
            idx += n_states
            x_ref = np.array([float(v) for v in row[idx : idx + n_states]])
            idx += n_states
            u_cells = row[idx : idx + n_inputs]
            u_cloud = (
                None if u_cells[0] == "" else np.array([float(v) for v in u_cells])
            )
            idx += n_inputs
            u_hat = np.array([float(v) for v in row[idx : idx + n_inputs]])
            idx += n_inputs
            records.append(
                StepRecord(
                    t=float(row[0]),
                    x_plant=x_plant,
                    x_cloud_ref=x_ref,
                    u_cloud=u_cloud,
                    u_hat=u_hat,
                    spikes=int(row[idx]),
                    energy_step=float(row[idx + 1]),
                    energy_cum=float(row[idx + 2]),
                    mode=row[idx + 3],
                    supervised=row[idx + 4] == "True",
                )
            )
    return records
