"""Polar Newton-Raphson load flow.

The unknowns are angle and magnitude at every PQ bus, ordered
``[theta_pq; V_pq]``; the residual is ``[dP_pq; dQ_pq]`` with
``d = computed injection - specified injection``. Loads are consumption
positive, so the specified injection is minus the demand.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .._accel import njit, select
from .network import NetworkModel, build_ybus


@njit
def bus_power_loop(v, theta, g, b):
    n = v.shape[0]
    p = np.zeros(n)
    q = np.zeros(n)
    for i in range(n):
        for k in range(n):
            if g[i, k] == 0.0 and b[i, k] == 0.0:
                continue
            d = theta[i] - theta[k]
            c, s = math.cos(d), math.sin(d)
            p[i] += v[i] * v[k] * (g[i, k] * c + b[i, k] * s)
            q[i] += v[i] * v[k] * (g[i, k] * s - b[i, k] * c)
    return p, q


def bus_power_numpy(v, theta, g, b):
    e = v * np.exp(1j * theta)
    s = e * np.conj((g + 1j * b) @ e)
    return s.real.copy(), s.imag.copy()


@njit
def jacobian_loop(v, theta, g, b, pq):
    p, q = bus_power_loop(v, theta, g, b)
    m = pq.shape[0]
    jac = np.zeros((2 * m, 2 * m))
    for a in range(m):
        i = pq[a]
        for c in range(m):
            k = pq[c]
            if i == k:
                jac[a, c] = -q[i] - b[i, i] * v[i] * v[i]
                jac[a, m + c] = p[i] / v[i] + g[i, i] * v[i]
                jac[m + a, c] = p[i] - g[i, i] * v[i] * v[i]
                jac[m + a, m + c] = q[i] / v[i] - b[i, i] * v[i]
            else:
                if g[i, k] == 0.0 and b[i, k] == 0.0:
                    continue
                d = theta[i] - theta[k]
                cs, sn = math.cos(d), math.sin(d)
                gs_bc = g[i, k] * sn - b[i, k] * cs
                gc_bs = g[i, k] * cs + b[i, k] * sn
                jac[a, c] = v[i] * v[k] * gs_bc
                jac[a, m + c] = v[i] * gc_bs
                jac[m + a, c] = -v[i] * v[k] * gc_bs
                jac[m + a, m + c] = v[i] * gs_bc
    return jac


def jacobian_numpy(v, theta, g, b, pq):
    """Complex-derivative form: dS/dtheta and dS/d|V| as dense matrices."""
    y = g + 1j * b
    e = v * np.exp(1j * theta)
    cur = y @ e
    ds_dth = 1j * np.diag(e) @ np.conj(np.diag(cur) - y * e[None, :])
    unit = e / v
    ds_dv = np.diag(e) @ np.conj(y * unit[None, :]) + np.diag(np.conj(cur) * unit)
    sub = np.ix_(pq, pq)
    return np.block([[ds_dth[sub].real, ds_dv[sub].real], [ds_dth[sub].imag, ds_dv[sub].imag]])


_bus_power = select(bus_power_loop, bus_power_numpy)
_jacobian = select(jacobian_loop, jacobian_numpy)


def _parts(ybus):
    return np.ascontiguousarray(ybus.real), np.ascontiguousarray(ybus.imag)


def bus_power(v, theta, ybus) -> tuple[np.ndarray, np.ndarray]:
    """Computed P and Q injections (p.u.) at every bus."""
    g, b = _parts(ybus)
    return _bus_power(np.asarray(v, float), np.asarray(theta, float), g, b)


def mismatch(v, theta, p_demand, q_demand, ybus, pq) -> tuple[np.ndarray, np.ndarray]:
    """(dP, dQ) at the PQ buses, angles in radians, demands in p.u."""
    p, q = bus_power(v, theta, ybus)
    pq = np.asarray(pq)
    return p[pq] + np.asarray(p_demand, float)[pq], q[pq] + np.asarray(q_demand, float)[pq]


def jacobian(v, theta, ybus, pq) -> np.ndarray:
    g, b = _parts(ybus)
    return _jacobian(np.asarray(v, float), np.asarray(theta, float), g, b, np.asarray(pq, dtype=np.int64))


@dataclass
class BusInjection:
    """Per-bus demand in MW / MVAr, consumption positive."""

    p_mw: np.ndarray
    q_mvar: np.ndarray

    def __post_init__(self):
        self.p_mw = np.asarray(self.p_mw, dtype=float)
        self.q_mvar = np.asarray(self.q_mvar, dtype=float)
        if self.p_mw.shape != self.q_mvar.shape or self.p_mw.ndim != 1:
            raise ValueError("P and Q demand must be equal-length vectors")
        if not (np.all(np.isfinite(self.p_mw)) and np.all(np.isfinite(self.q_mvar))):
            raise ValueError("bus demand must be finite")

    @classmethod
    def zeros(cls, n: int) -> "BusInjection":
        return cls(np.zeros(n), np.zeros(n))

    def scaled(self, factor: float) -> "BusInjection":
        return BusInjection(self.p_mw * factor, self.q_mvar * factor)


@dataclass
class LoadFlowResult:
    v: np.ndarray  # p.u.
    theta: np.ndarray  # degrees
    iterations: int
    max_mismatch: float
    converged: bool
    history: list[float] = field(default_factory=list)
    diverged_at: int | None = None

    @property
    def theta_rad(self) -> np.ndarray:
        return np.deg2rad(self.theta)


def nr_solve(network: NetworkModel, injections: BusInjection, tol: float = 1e-8, max_iter: int = 50,
             ybus: np.ndarray | None = None) -> LoadFlowResult:
    """Flat-start Newton-Raphson. Non-convergence is reported, not raised."""
    n = network.n_bus
    if injections.p_mw.size != n:
        raise ValueError(f"{injections.p_mw.size} bus demands for a {n}-bus network")
    s = network.slack
    if injections.p_mw[s] != 0 or injections.q_mvar[s] != 0:
        raise ValueError("the slack bus takes no specified injection")
    ybus = build_ybus(network) if ybus is None else ybus
    pq = network.pq
    m = pq.size
    pd = injections.p_mw / network.base_mva
    qd = injections.q_mvar / network.base_mva
    v = np.ones(n)
    th = np.zeros(n)
    history = []
    it = 0
    while True:
        dp, dq = mismatch(v, th, pd, qd, ybus, pq)
        f = np.concatenate([dp, dq])
        err = float(np.max(np.abs(f))) if f.size else 0.0
        history.append(err)
        if not math.isfinite(err):
            return LoadFlowResult(v, np.rad2deg(th), it, err, False, history, diverged_at=it)
        if err <= tol:
            return LoadFlowResult(v, np.rad2deg(th), it, err, True, history)
        if it >= max_iter:
            return LoadFlowResult(v, np.rad2deg(th), it, err, False, history)
        jac = jacobian(v, th, ybus, pq)
        try:
            dx = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            return LoadFlowResult(v, np.rad2deg(th), it, err, False, history, diverged_at=it)
        if not np.all(np.isfinite(dx)):
            return LoadFlowResult(v, np.rad2deg(th), it, err, False, history, diverged_at=it)
        it += 1
        th[pq] += dx[:m]
        v[pq] += dx[m:]
        if np.any(v[pq] <= 0):
            return LoadFlowResult(v, np.rad2deg(th), it, err, False, history, diverged_at=it)


def branch_flows(network: NetworkModel, result: LoadFlowResult) -> dict[str, tuple[complex, complex]]:
    """Complex power (p.u.) entering each branch at its from and to ends."""
    e = result.v * np.exp(1j * result.theta_rad)
    out = {}
    for ln in network.lines:
        i, j = network.index(ln.from_bus), network.index(ln.to_bus)
        ys = 1.0 / complex(ln.r, ln.x)
        sh = 0.5j * ln.b
        i_f = (ys + sh) * e[i] - ys * e[j]
        i_t = (ys + sh) * e[j] - ys * e[i]
        out[ln.id] = (e[i] * np.conj(i_f), e[j] * np.conj(i_t))
    for tr in network.trafos:
        i, j = network.index(tr.from_bus), network.index(tr.to_bus)
        ys = 1.0 / complex(tr.r, tr.x)
        t = tr.tap
        i_f = ys / (t * t) * e[i] - ys / t * e[j]
        i_t = ys * e[j] - ys / t * e[i]
        out[tr.id] = (e[i] * np.conj(i_f), e[j] * np.conj(i_t))
    return out


def losses(network: NetworkModel, result: LoadFlowResult) -> complex:
    return complex(sum(a + b for a, b in branch_flows(network, result).values()))


def slack_power(network: NetworkModel, result: LoadFlowResult, ybus=None) -> complex:
    ybus = build_ybus(network) if ybus is None else ybus
    p, q = bus_power(result.v, result.theta_rad, ybus)
    return complex(p[network.slack], q[network.slack])
