"""Newton-Raphson power flow for the static case."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .case import NetworkCase, PQ, PV, SLACK
from .errors import PowerFlowDivergenceError
from .ybus import build_ybus


@dataclass(frozen=True)
class PowerFlowSolution:
    voltages: np.ndarray  # complex, case bus order
    machine_p: np.ndarray  # per machine, case machine order
    machine_q: np.ndarray
    iterations: int
    mismatch: float

    def voltage_at(self, case: NetworkCase, bus_id: int) -> complex:
        return self.voltages[case.bus_index(bus_id)]


def _injections(case: NetworkCase):
    """Specified net P, Q per bus (generation minus load)."""
    n = case.n_bus
    p = np.zeros(n)
    q = np.zeros(n)
    for m in case.machines:
        p[case.bus_index(m.bus)] += m.scheduled_power
    for ld in case.loads:
        i = case.bus_index(ld.bus)
        p[i] -= ld.active_power
        q[i] -= ld.reactive_power
    return p, q


def solve_power_flow(case: NetworkCase, tol: float = 1e-8,
                     max_iter: int = 40) -> PowerFlowSolution:
    """Solve the AC power flow. Mismatch at every PQ/PV bus ends below ``tol``.

    Raises ``PowerFlowDivergenceError`` with the final mismatch norm when
    Newton iteration fails to converge.
    """
    n = case.n_bus
    y = build_ybus(case).complex
    types = [b.type for b in case.buses]
    pv = np.array([i for i, t in enumerate(types) if t == PV], dtype=int)
    pq = np.array([i for i, t in enumerate(types) if t == PQ], dtype=int)
    slack = types.index(SLACK)
    non_slack = np.array([i for i in range(n) if i != slack], dtype=int)

    p_spec, q_spec = _injections(case)

    vm = np.ones(n)
    va = np.zeros(n)
    for m in case.machines:
        vm[case.bus_index(m.bus)] = m.voltage_setpoint

    mismatch = np.inf
    for it in range(max_iter):
        v = vm * np.exp(1j * va)
        s_calc = v * np.conj(y @ v)
        dp = p_spec[non_slack] - s_calc.real[non_slack]
        dq = q_spec[pq] - s_calc.imag[pq]
        mismatch = max(np.max(np.abs(dp), initial=0.0),
                       np.max(np.abs(dq), initial=0.0))
        if mismatch < tol:
            machine_p = np.empty(len(case.machines))
            machine_q = np.empty(len(case.machines))
            for k, m in enumerate(case.machines):
                i = case.bus_index(m.bus)
                p_load = sum(ld.active_power for ld in case.loads_at(m.bus))
                q_load = sum(ld.reactive_power for ld in case.loads_at(m.bus))
                machine_p[k] = s_calc.real[i] + p_load
                machine_q[k] = s_calc.imag[i] + q_load
            return PowerFlowSolution(voltages=v, machine_p=machine_p,
                                     machine_q=machine_q, iterations=it,
                                     mismatch=float(mismatch))
        if not np.isfinite(mismatch):
            break

        # complex-form Jacobian blocks (standard polar NR)
        i_inj = y @ v
        dv = np.diag(v)
        di = np.diag(i_inj)
        dvn = np.diag(v / vm)
        ds_dva = 1j * dv @ np.conj(di - y @ dv)
        ds_dvm = dvn @ np.conj(di) + dv @ np.conj(y @ dvn)

        j11 = ds_dva.real[np.ix_(non_slack, non_slack)]
        j12 = ds_dvm.real[np.ix_(non_slack, pq)]
        j21 = ds_dva.imag[np.ix_(pq, non_slack)]
        j22 = ds_dvm.imag[np.ix_(pq, pq)]
        jac = np.block([[j11, j12], [j21, j22]])
        rhs = np.concatenate([dp, dq])
        try:
            dx = np.linalg.solve(jac, rhs)
        except np.linalg.LinAlgError as exc:
            raise PowerFlowDivergenceError(
                f"singular Jacobian at iteration {it}",
                mismatch=float(mismatch), iterations=it) from exc
        va[non_slack] += dx[: len(non_slack)]
        vm[pq] += dx[len(non_slack):]
        if np.any(vm <= 0) or not np.all(np.isfinite(vm)):
            break

    raise PowerFlowDivergenceError(
        f"power flow did not converge in {max_iter} iterations "
        f"(final mismatch {mismatch:.3e} p.u.)",
        mismatch=float(mismatch), iterations=max_iter)


def load_admittances(case: NetworkCase, pf: PowerFlowSolution) -> dict:
    """Constant-impedance equivalents of all loads at the solved voltages."""
    out: dict = {}
    for ld in case.loads:
        v = abs(pf.voltages[case.bus_index(ld.bus)])
        yl = (ld.active_power - 1j * ld.reactive_power) / v ** 2
        out[ld.bus] = out.get(ld.bus, 0j) + yl
    return out
