"""Machine dynamics, equilibrium initialization and the DAE stepping engine.

Model stack per machine: two-axis (4-state) synchronous machine, first-order
static exciter with field limits, first-order droop governor with mechanical
limits, and a stabilizer (washout plus two lead-lag stages) feeding the
exciter summing junction. Loads are constant-impedance and live in the
network matrix, so each algebraic solve is a direct factorized solve plus a
small fixed-point correction for rotor saliency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .case import NetworkCase
from .errors import InitializationError, VoltageCollapseError
from .integrator import IntegratorConfig
from .powerflow import PowerFlowSolution, load_admittances
from .ybus import build_ybus

# machine state vector columns
IDX_DELTA = 0  # rotor angle, rad
IDX_OMEGA = 1  # speed deviation, p.u.
IDX_EQ = 2  # q-axis transient EMF
IDX_ED = 3  # d-axis transient EMF
IDX_EFD = 4  # exciter field voltage
IDX_PM = 5  # governor mechanical power
IDX_PSS1 = 6  # washout state
IDX_PSS2 = 7  # first lead-lag state
IDX_PSS3 = 8  # second lead-lag state
N_MACHINE_STATES = 9


@dataclass
class DynamicState:
    t: float
    machines: np.ndarray  # (n_machines, N_MACHINE_STATES)
    bus_voltages: np.ndarray  # complex, case bus order

    def copy(self) -> "DynamicState":
        return DynamicState(self.t, self.machines.copy(),
                            self.bus_voltages.copy())


@dataclass
class NetworkOperator:
    """Factorized network matrix for one topology/load configuration."""

    lu: tuple
    faulted_bus: int | None
    tripped_branch: int | None


class GridDynamics:
    """Vectorized dynamic model bound to one case and power-flow solution."""

    def __init__(self, case: NetworkCase, pf: PowerFlowSolution):
        self.case = case
        self.pf = pf
        self.n_bus = case.n_bus
        mach = case.machines
        self.n_mach = len(mach)
        self.mach_idx = np.array([case.bus_index(m.bus) for m in mach])
        self.omega_s = 2.0 * np.pi * case.frequency

        self.h_const = np.array([m.inertia for m in mach])
        self.damping = np.array([m.damping for m in mach])
        self.xd = np.array([m.x_d for m in mach])
        self.xq = np.array([m.x_q for m in mach])
        self.xdp = np.array([m.x_d_prime for m in mach])
        self.xqp = np.array([m.x_q_prime for m in mach])
        self.td0 = np.array([m.t_d0_prime for m in mach])
        self.tq0 = np.array([m.t_q0_prime for m in mach])
        self.ka = np.array([m.exciter.gain for m in mach])
        self.ta = np.array([m.exciter.time_constant for m in mach])
        self.efd_min = np.array([m.exciter.efd_min for m in mach])
        self.efd_max = np.array([m.exciter.efd_max for m in mach])
        self.droop = np.array([m.governor.droop for m in mach])
        self.tg = np.array([m.governor.time_constant for m in mach])
        self.pm_min = np.array([m.governor.pm_min for m in mach])
        self.pm_max = np.array([m.governor.pm_max for m in mach])
        self.kpss = np.array([m.pss.gain for m in mach])
        self.tw = np.array([m.pss.washout for m in mach])
        self.t1 = np.array([m.pss.lead_lag[0][0] for m in mach])
        self.t2 = np.array([m.pss.lead_lag[0][1] for m in mach])
        self.t3 = np.array([m.pss.lead_lag[1][0] for m in mach])
        self.t4 = np.array([m.pss.lead_lag[1][1] for m in mach])
        self.pss_lim = np.array([m.pss.output_limit for m in mach])

        # Norton decomposition of the stator equations: the voltage-behind-
        # reactance source uses the mean transient admittance, saliency
        # enters as a lagged conjugate correction.
        a = 1.0 / self.xdp
        b = 1.0 / self.xqp
        self.y_avg = -0.5j * (a + b)
        self.y_sal = 0.5j * (b - a)

        # reciprocal constants, hoisted out of the per-pass derivative call
        self._inv_xdp = 1.0 / self.xdp
        self._inv_xqp = 1.0 / self.xqp
        self._inv_2h = 0.5 / self.h_const
        self._inv_td0 = 1.0 / self.td0
        self._inv_tq0 = 1.0 / self.tq0
        self._inv_ta = 1.0 / self.ta
        self._inv_tg = 1.0 / self.tg
        self._inv_tw = 1.0 / self.tw
        self._inv_t2 = 1.0 / self.t2
        self._inv_t4 = 1.0 / self.t4
        self._t1_t2 = self.t1 / self.t2
        self._t3_t4 = self.t3 / self.t4
        self._inv_droop = 1.0 / self.droop
        self._xd_minus_xdp = self.xd - self.xdp
        self._xq_minus_xqp = self.xq - self.xqp
        self._xqp_minus_xdp = self.xqp - self.xdp

        self.base_load_admittances = load_admittances(case, pf)

        # controller references, filled by _initialize
        self.v_ref = np.zeros(self.n_mach)
        self.p_ref = np.zeros(self.n_mach)
        self._x0 = self._initialize()

    # -- initialization ----------------------------------------------------

    def _initialize(self) -> np.ndarray:
        v = self.pf.voltages[self.mach_idx]
        s = self.pf.machine_p + 1j * self.pf.machine_q
        i_net = np.conj(s / v)

        delta = np.angle(v + 1j * self.xq * i_net)
        rot = np.exp(1j * (delta - np.pi / 2.0))
        v_m = v * np.conj(rot)
        i_m = i_net * np.conj(rot)
        vd, vq = v_m.real, v_m.imag
        id_, iq = i_m.real, i_m.imag

        eq = vq + self.xdp * id_
        ed = vd - self.xqp * iq
        efd = eq + (self.xd - self.xdp) * id_
        pe = ed * id_ + eq * iq + (self.xqp - self.xdp) * id_ * iq
        pm = pe

        for k, m in enumerate(self.case.machines):
            if not (self.efd_min[k] <= efd[k] <= self.efd_max[k]):
                raise InitializationError(
                    f"machine at bus {m.bus}: field voltage {efd[k]:.3f} "
                    f"outside [{self.efd_min[k]}, {self.efd_max[k]}]")
            if not (self.pm_min[k] <= pm[k] <= self.pm_max[k]):
                raise InitializationError(
                    f"machine at bus {m.bus}: mechanical power {pm[k]:.3f} "
                    f"outside [{self.pm_min[k]}, {self.pm_max[k]}]")

        self.v_ref = np.abs(v) + efd / self.ka
        self.p_ref = pm.copy()

        x = np.zeros((self.n_mach, N_MACHINE_STATES))
        x[:, IDX_DELTA] = delta
        x[:, IDX_EQ] = eq
        x[:, IDX_ED] = ed
        x[:, IDX_EFD] = efd
        x[:, IDX_PM] = pm
        return x

    def initial_state(self) -> DynamicState:
        return DynamicState(0.0, self._x0.copy(), self.pf.voltages.copy())

    # -- machine equations ---------------------------------------------------

    def machine_currents(self, mach: np.ndarray, v_bus: np.ndarray):
        """d-q axis currents of every machine at the given bus voltages."""
        rot = np.exp(1j * (mach[:, IDX_DELTA] - np.pi / 2.0))
        v_m = v_bus[self.mach_idx] * np.conj(rot)
        id_ = (mach[:, IDX_EQ] - v_m.imag) / self.xdp
        iq = (v_m.real - mach[:, IDX_ED]) / self.xqp
        return id_, iq, rot

    def derivatives(self, mach: np.ndarray, v_bus: np.ndarray) -> np.ndarray:
        omega = mach[:, IDX_OMEGA]
        eq = mach[:, IDX_EQ]
        ed = mach[:, IDX_ED]
        efd = mach[:, IDX_EFD]
        pm = mach[:, IDX_PM]
        x1 = mach[:, IDX_PSS1]
        x2 = mach[:, IDX_PSS2]
        x3 = mach[:, IDX_PSS3]

        v_m = v_bus[self.mach_idx] * np.exp(1j * (np.pi / 2.0 - mach[:, IDX_DELTA]))
        id_ = (eq - v_m.imag) * self._inv_xdp
        iq = (v_m.real - ed) * self._inv_xqp
        pe = ed * id_ + eq * iq + self._xqp_minus_xdp * id_ * iq
        vt = np.abs(v_m)

        u = self.kpss * omega
        yw = u - x1
        y1 = x2 + self._t1_t2 * (yw - x2)
        y2 = x3 + self._t3_t4 * (y1 - x3)
        vpss = np.minimum(np.maximum(y2, -self.pss_lim), self.pss_lim)

        dot = np.empty_like(mach)
        dot[:, IDX_DELTA] = self.omega_s * omega
        dot[:, IDX_OMEGA] = (pm - pe - self.damping * omega) * self._inv_2h
        dot[:, IDX_EQ] = (efd - eq - self._xd_minus_xdp * id_) * self._inv_td0
        dot[:, IDX_ED] = (self._xq_minus_xqp * iq - ed) * self._inv_tq0
        dot[:, IDX_EFD] = (self.ka * (self.v_ref - vt + vpss) - efd) * self._inv_ta
        dot[:, IDX_PM] = (self.p_ref - omega * self._inv_droop - pm) * self._inv_tg
        dot[:, IDX_PSS1] = (u - x1) * self._inv_tw
        dot[:, IDX_PSS2] = (yw - x2) * self._inv_t2
        dot[:, IDX_PSS3] = (y1 - x3) * self._inv_t4
        return dot

    def _clamp(self, mach: np.ndarray) -> np.ndarray:
        np.minimum(np.maximum(mach[:, IDX_EFD], self.efd_min, out=mach[:, IDX_EFD]),
                   self.efd_max, out=mach[:, IDX_EFD])
        np.minimum(np.maximum(mach[:, IDX_PM], self.pm_min, out=mach[:, IDX_PM]),
                   self.pm_max, out=mach[:, IDX_PM])
        return mach

    # -- network solve -------------------------------------------------------

    def network_operator(self, load_scaling: dict | None = None,
                         faulted_bus: int | None = None,
                         tripped_branch: int | None = None) -> NetworkOperator:
        """Factorize the network matrix for one topology and load state.

        ``load_scaling`` maps bus id -> remaining fraction of the base
        constant-impedance load (1.0 when nothing was shed).
        """
        loads = dict(self.base_load_admittances)
        if load_scaling:
            for bus_id, frac in load_scaling.items():
                if bus_id in loads:
                    loads[bus_id] = loads[bus_id] * frac
        y = build_ybus(self.case, faulted_bus=faulted_bus,
                       tripped_branch=tripped_branch,
                       load_admittances=loads).complex
        y[self.mach_idx, self.mach_idx] += self.y_avg
        return NetworkOperator(lu=lu_factor(y), faulted_bus=faulted_bus,
                               tripped_branch=tripped_branch)

    def _network_pass(self, mach: np.ndarray, net: NetworkOperator,
                      v_prev: np.ndarray) -> np.ndarray:
        delta = mach[:, IDX_DELTA]
        rot = np.exp(1j * (delta - np.pi / 2.0))
        e_net = (mach[:, IDX_ED] + 1j * mach[:, IDX_EQ]) * rot
        inj = self.y_avg * e_net + self.y_sal * np.exp(2j * delta) * np.conj(
            e_net - v_prev[self.mach_idx])
        rhs = np.zeros(self.n_bus, dtype=complex)
        rhs[self.mach_idx] = inj
        return lu_solve(net.lu, rhs, check_finite=False)

    def solve_network(self, mach: np.ndarray, net: NetworkOperator,
                      v_guess: np.ndarray, tol: float = 1e-10,
                      max_iters: int = 50, t: float = 0.0) -> np.ndarray:
        v = v_guess
        for _ in range(max_iters):
            v_new = self._network_pass(mach, net, v)
            if not np.all(np.isfinite(v_new)):
                raise VoltageCollapseError(
                    f"network solve produced non-finite voltages at t={t:.3f}s",
                    time=t)
            err = np.max(np.abs(v_new - v))
            v = v_new
            if err < tol:
                return v
        raise VoltageCollapseError(
            f"network solve did not converge at t={t:.3f}s", time=t)

    def network_residual(self, state: DynamicState, net: NetworkOperator) -> float:
        """Max algebraic residual |V - solve(V)| of a state (consistency check)."""
        v_new = self._network_pass(state.machines, net, state.bus_voltages)
        return float(np.max(np.abs(v_new - state.bus_voltages)))

    # -- time stepping ---------------------------------------------------------

    def step(self, state: DynamicState, net: NetworkOperator,
             config: IntegratorConfig) -> DynamicState:
        """Advance one step: explicit predictor, iterated trapezoidal corrector
        with one direct network solve per corrector pass.

        Raises ``VoltageCollapseError`` when the coupled iteration diverges.
        """
        h = config.step
        x0 = state.machines
        v0 = state.bus_voltages
        f0 = self.derivatives(x0, v0)

        x = self._clamp(x0 + h * f0)
        v = self._network_pass(x, net, v0)
        t_next = state.t + h

        converged = False
        half_h = 0.5 * h
        for _ in range(config.max_corrector_iterations):
            fx = self.derivatives(x, v)
            x_new = self._clamp(x0 + half_h * (f0 + fx))
            v_new = self._network_pass(x_new, net, v)
            dx = np.max(np.abs(x_new - x))
            dv2 = np.max(np.abs(v_new - v))
            x, v = x_new, v_new
            if dx < config.corrector_tol * (1.0 + np.max(np.abs(x))) \
                    and dv2 < config.algebraic_tol * 10.0:
                converged = True
                break
        if not np.all(np.isfinite(v)) or np.max(np.abs(v)) > 20.0:
            raise VoltageCollapseError(
                f"algebraic solve diverged at t={t_next:.3f}s", time=t_next)
        if not converged:
            raise VoltageCollapseError(
                f"corrector iteration stalled at t={t_next:.3f}s", time=t_next)

        v = self.solve_network(x, net, v, tol=config.algebraic_tol,
                               max_iters=config.max_algebraic_iterations,
                               t=t_next)
        return DynamicState(t_next, x, v)


def init_dynamic_state(case: NetworkCase, pf: PowerFlowSolution,
                       derivative_tol: float = 1e-8) -> DynamicState:
    """Equilibrium state from a converged power flow.

    All machine state derivatives vanish at t = 0 (checked against
    ``derivative_tol``) and controller references hold the operating point.
    """
    dyn = GridDynamics(case, pf)
    state = dyn.initial_state()
    dot = dyn.derivatives(state.machines, state.bus_voltages)
    norm = float(np.max(np.abs(dot)))
    if norm > derivative_tol:
        raise InitializationError(
            f"initialization residual {norm:.2e} exceeds {derivative_tol:.0e}")
    return state
