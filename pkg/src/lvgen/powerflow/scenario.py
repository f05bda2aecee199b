"""Day-long load-flow scenarios and the model-versus-real comparison harness."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .network import NetworkModel, build_ybus
from .solver import BusInjection, nr_solve

NOMINAL_KV = 11.0


def load_buses(network: NetworkModel) -> np.ndarray:
    """PQ buses that take a substation profile: the lowest-voltage PQ buses
    other than transformer secondaries (the busbar carries no load)."""
    pq = network.pq
    kv = np.array([network.buses[i].kv for i in pq])
    lv = pq[kv == kv.min()]
    feeder_heads = {network.index(t.to_bus) for t in network.trafos}
    return np.array([i for i in lv if i not in feeder_heads], dtype=np.int64)


def default_assignment(n_buses: int, n_profiles: int) -> np.ndarray:
    """Bus position i takes profile i mod n_profiles."""
    if n_profiles < 1:
        raise ValueError("need at least one profile")
    return np.arange(n_buses) % n_profiles


@dataclass
class ScenarioResult:
    bus_ids: list[int]
    v: np.ndarray  # (T, n_bus) p.u.
    theta: np.ndarray  # (T, n_bus) degrees
    converged: np.ndarray  # (T,)
    iterations: np.ndarray  # (T,)
    slack_id: int | None = None

    @property
    def n_failed(self) -> int:
        return int((~self.converged).sum())

    @property
    def timesteps(self) -> int:
        return self.v.shape[0]

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bus_id", "timestep", "v_pu", "theta_deg", "converged"])
            for t in range(self.timesteps):
                for j, bid in enumerate(self.bus_ids):
                    w.writerow([bid, t, repr(float(self.v[t, j])), repr(float(self.theta[t, j])),
                                int(self.converged[t])])
        return path


def read_scenario_csv(path, slack_id: int | None = None) -> ScenarioResult:
    rows = list(csv.DictReader(open(path, newline="")))
    bus_ids = sorted({int(r["bus_id"]) for r in rows})
    steps = sorted({int(r["timestep"]) for r in rows})
    col = {b: j for j, b in enumerate(bus_ids)}
    v = np.full((len(steps), len(bus_ids)), np.nan)
    th = np.full_like(v, np.nan)
    conv = np.zeros(len(steps), dtype=bool)
    for r in rows:
        t, j = int(r["timestep"]), col[int(r["bus_id"])]
        v[t, j], th[t, j] = float(r["v_pu"]), float(r["theta_deg"])
        conv[t] = r["converged"] == "1"
    return ScenarioResult(bus_ids, v, th, conv, np.zeros(len(steps), dtype=int), slack_id)


def scenario_run(network: NetworkModel, profiles, assignment=None, tol: float = 1e-8,
                 max_iter: int = 50, load_scale: float = 1.0) -> ScenarioResult:
    """One load flow per half-hour slot.

    ``profiles`` holds (P kW, Q kVAr) day curves, either DayProfile objects
    or an (N, 2, L) array. ``assignment[j]`` names the profile placed on the
    j-th load bus.
    """
    if isinstance(profiles, np.ndarray):
        arr = np.asarray(profiles, dtype=float)
    else:
        arr = np.array([p.as_array() if hasattr(p, "as_array") else p for p in profiles], dtype=float)
    if arr.ndim != 3 or arr.shape[1] != 2:
        raise ValueError(f"profiles must be (N, 2, L), got {arr.shape}")
    buses = load_buses(network)
    assignment = default_assignment(buses.size, arr.shape[0]) if assignment is None else np.asarray(assignment)
    if assignment.shape != (buses.size,):
        raise ValueError(f"assignment must name one profile per load bus ({buses.size})")
    ybus = build_ybus(network)
    steps = arr.shape[2]
    n = network.n_bus
    v = np.empty((steps, n))
    th = np.empty((steps, n))
    conv = np.zeros(steps, dtype=bool)
    iters = np.zeros(steps, dtype=int)
    for t in range(steps):
        p = np.zeros(n)
        q = np.zeros(n)
        # kW -> MW
        p[buses] = arr[assignment, 0, t] * load_scale / 1000.0
        q[buses] = arr[assignment, 1, t] * load_scale / 1000.0
        res = nr_solve(network, BusInjection(p, q), tol=tol, max_iter=max_iter, ybus=ybus)
        v[t], th[t], conv[t], iters[t] = res.v, res.theta, res.converged, res.iterations
    return ScenarioResult(network.bus_ids, v, th, conv, iters, network.buses[network.slack].id)


@dataclass(frozen=True)
class ComparisonStats:
    mae: float
    r2: float
    p5_abs_error: float
    p95_abs_error: float
    n: int = 0
    excluded_steps: int = 0

    def as_dict(self) -> dict:
        return {"mae": self.mae, "r2": self.r2, "p5_abs_error": self.p5_abs_error,
                "p95_abs_error": self.p95_abs_error, "n": self.n, "excluded_steps": self.excluded_steps}


def error_stats(truth, candidate, excluded: int = 0) -> ComparisonStats:
    truth = np.asarray(truth, dtype=float).ravel()
    candidate = np.asarray(candidate, dtype=float).ravel()
    if truth.shape != candidate.shape:
        raise ValueError(f"misaligned comparison grids: {truth.shape} vs {candidate.shape}")
    if truth.size == 0:
        raise ValueError("no bus-timesteps to compare")
    err = np.abs(candidate - truth)
    ss_res = float(np.sum((candidate - truth) ** 2))
    ss_tot = float(np.sum((truth - truth.mean()) ** 2))
    if ss_tot == 0:
        r2 = 1.0 if ss_res == 0 else float("-inf")
    else:
        r2 = 1.0 - ss_res / ss_tot
    p5, p95 = np.percentile(err, [5, 95])
    return ComparisonStats(float(err.mean()), r2, float(p5), float(p95), truth.size, excluded)


def compare_results(truth: ScenarioResult, candidate: ScenarioResult, buses=None,
                    nominal_kv: float = NOMINAL_KV) -> dict[str, ComparisonStats]:
    """Voltage error in volts at ``nominal_kv`` and angle error in degrees.

    Slots where either run failed to converge are dropped and counted.
    ``buses`` restricts the comparison to those bus ids; by default every
    bus except the slack, whose state is fixed.
    """
    if truth.bus_ids != candidate.bus_ids or truth.v.shape != candidate.v.shape:
        raise ValueError("misaligned bus/timestep grids")
    ok = truth.converged & candidate.converged
    keep = set(buses) if buses is not None else set(truth.bus_ids) - {truth.slack_id}
    cols = [j for j, b in enumerate(truth.bus_ids) if b in keep]
    excluded = int((~ok).sum())
    volts = 1000.0 * nominal_kv
    return {
        "v": error_stats(truth.v[ok][:, cols] * volts, candidate.v[ok][:, cols] * volts, excluded),
        "theta": error_stats(truth.theta[ok][:, cols], candidate.theta[ok][:, cols], excluded),
    }


@dataclass
class Band:
    mean: np.ndarray
    lo: np.ndarray
    hi: np.ndarray


def repeat_and_band(runs) -> Band:
    """Pointwise mean and min/max envelope across repeated series."""
    arr = np.asarray([np.asarray(r, dtype=float) for r in runs])
    if arr.shape[0] < 2:
        raise ValueError("need at least two runs for a band")
    return Band(arr.mean(axis=0), arr.min(axis=0), arr.max(axis=0))
