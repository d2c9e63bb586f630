"""Event-driven horizon simulation: faults, load shedding, trajectories."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .case import NetworkCase
from .dynamics import DynamicState, GridDynamics
from .errors import CaseValidationError
from .integrator import IntegratorConfig
from .powerflow import solve_power_flow


@dataclass(frozen=True)
class FaultEvent:
    branch: int  # index into case.branches
    bus: int  # near-end bus carrying the fault shunt
    apply_time: float
    clear_time: float
    trip_on_clear: bool = False


@dataclass(frozen=True)
class ShedEvent:
    time: float
    bus: int
    fraction: float  # of the load present at that moment


@dataclass(frozen=True)
class EventSchedule:
    fault: FaultEvent | None = None
    shed_events: tuple = ()

    def __post_init__(self):
        if self.fault is not None:
            if not self.fault.apply_time < self.fault.clear_time:
                raise CaseValidationError("fault must clear after it applies")
        times = [ev.time for ev in self.shed_events]
        if times != sorted(times):
            raise CaseValidationError("shed events must be time-ordered")
        for ev in self.shed_events:
            if not 0.0 <= ev.fraction <= 1.0:
                raise CaseValidationError("shed fractions must be in [0, 1]")

    def validate_against(self, case: NetworkCase) -> None:
        if self.fault is not None:
            if not 0 <= self.fault.branch < len(case.branches):
                raise CaseValidationError(f"unknown branch {self.fault.branch}")
            br = case.branches[self.fault.branch]
            if not br.status:
                raise CaseValidationError("faulted branch is out of service")
            if self.fault.bus not in (br.from_bus, br.to_bus):
                raise CaseValidationError(
                    "fault bus must be an endpoint of the faulted branch")
        for ev in self.shed_events:
            if ev.bus not in case.controlled_buses:
                raise CaseValidationError(
                    f"shed event at non-controlled bus {ev.bus}")


def grid_time(t: float, h: float) -> float:
    """Snap a time to the first integration grid point at or after it."""
    return float(np.ceil(t / h - 1e-9) * h) + 0.0


@dataclass
class LoadAccounting:
    """Shedding bookkeeping for the controlled buses.

    Tracks the nominal (dispatch-level) active power of each controlled
    load. Fractions apply multiplicatively to the load present when the
    shed is taken.
    """

    buses: tuple
    p_nominal: np.ndarray  # initial P per controlled bus (episode start)
    q_nominal: np.ndarray
    remaining: np.ndarray = field(default=None)
    last_shed: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.remaining is None:
            self.remaining = np.ones(len(self.buses))
        if self.last_shed is None:
            self.last_shed = np.zeros(len(self.buses))

    @classmethod
    def for_case(cls, case: NetworkCase) -> "LoadAccounting":
        p = np.array([sum(ld.active_power for ld in case.loads_at(b))
                      for b in case.controlled_buses])
        q = np.array([sum(ld.reactive_power for ld in case.loads_at(b))
                      for b in case.controlled_buses])
        return cls(buses=tuple(case.controlled_buses), p_nominal=p, q_nominal=q)

    @property
    def initial_total(self) -> float:
        return float(np.sum(self.p_nominal))

    @property
    def p_current(self) -> np.ndarray:
        return self.p_nominal * self.remaining

    @property
    def remaining_fraction(self) -> float:
        return float(np.sum(self.p_current) / np.sum(self.p_nominal))

    def begin_step(self) -> None:
        self.last_shed[:] = 0.0

    def scaling(self) -> dict:
        return {b: float(f) for b, f in zip(self.buses, self.remaining)}


def apply_load_shed(acct: LoadAccounting, bus: int, fraction: float) -> None:
    """Shed ``fraction`` of the load currently connected at ``bus``."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    k = acct.buses.index(bus)
    shed = acct.p_nominal[k] * acct.remaining[k] * fraction
    acct.last_shed[k] += shed
    acct.remaining[k] *= 1.0 - fraction


@dataclass
class Trajectory:
    case: NetworkCase
    t: np.ndarray
    machines: np.ndarray  # (n_samples, n_mach, n_states)
    voltages: np.ndarray  # complex (n_samples, n_bus)

    def voltage_magnitudes(self, bus_ids=None) -> np.ndarray:
        if bus_ids is None:
            return np.abs(self.voltages)
        cols = [self.case.bus_index(b) for b in bus_ids]
        return np.abs(self.voltages[:, cols])

    def state(self, i: int) -> DynamicState:
        return DynamicState(float(self.t[i]), self.machines[i].copy(),
                            self.voltages[i].copy())

    def to_csv(self, path, provenance: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if provenance:
                fh.write(f"# {provenance}\n")
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"bus_{b.id}_vm" for b in self.case.buses])
            vm = np.abs(self.voltages)
            for i in range(len(self.t)):
                writer.writerow([repr(float(self.t[i]))]
                                + [repr(float(x)) for x in vm[i]])


class HorizonSimulator:
    """Steps a case through a fault/shedding schedule.

    Usable both for one-shot horizon runs (``simulate_horizon``) and
    incrementally by the MDP environment, which interleaves shed commands
    with ``advance_to`` calls.
    """

    def __init__(self, case: NetworkCase, config: IntegratorConfig,
                 fault: FaultEvent | None = None):
        self.case = case
        self.config = config
        self.h = config.step
        pf = solve_power_flow(case, tol=min(1e-10, config.algebraic_tol * 100))
        self.dynamics = GridDynamics(case, pf)
        self.accounting = LoadAccounting.for_case(case)
        self.state = self.dynamics.initial_state()
        self.fault = fault
        if fault is not None:
            self.fault_apply = grid_time(fault.apply_time, self.h)
            self.fault_clear = grid_time(fault.clear_time, self.h)
        else:
            self.fault_apply = None
            self.fault_clear = None
        self._fault_on = False
        self._cleared = fault is None
        self._net = None
        self._rebuild_network()

    @property
    def t(self) -> float:
        return self.state.t

    def _rebuild_network(self) -> None:
        faulted = self.fault.bus if self._fault_on else None
        tripped = None
        if (self.fault is not None and self._cleared
                and self.fault.trip_on_clear):
            tripped = self.fault.branch
        self._net = self.dynamics.network_operator(
            load_scaling=self.accounting.scaling(),
            faulted_bus=faulted, tripped_branch=tripped)
        # re-solve voltages under the new topology (states are continuous)
        self.state.bus_voltages = self.dynamics.solve_network(
            self.state.machines, self._net, self.state.bus_voltages,
            tol=self.config.algebraic_tol,
            max_iters=self.config.max_algebraic_iterations, t=self.state.t)

    def shed(self, bus: int, fraction: float) -> None:
        if fraction > 0.0:
            apply_load_shed(self.accounting, bus, fraction)
            self._rebuild_network()

    def _handle_events(self) -> None:
        t = self.state.t
        if self.fault is None:
            return
        if not self._fault_on and not self._cleared \
                and abs(t - self.fault_apply) < 1e-9:
            self._fault_on = True
            self._rebuild_network()
        elif self._fault_on and abs(t - self.fault_clear) < 1e-9:
            self._fault_on = False
            self._cleared = True
            self._rebuild_network()

    def step(self) -> DynamicState:
        """Advance by one integration step, applying due events first."""
        self._handle_events()
        self.state = self.dynamics.step(self.state, self._net, self.config)
        return self.state

    def advance_to(self, t_target: float, probe=None) -> None:
        n = int(round((t_target - self.state.t) / self.h))
        for _ in range(n):
            self.step()
            if probe is not None:
                probe(self.state)


def simulate_horizon(case: NetworkCase, events: EventSchedule,
                     config: IntegratorConfig | None = None,
                     probe=None) -> Trajectory:
    """Run the full horizon, returning the sampled trajectory.

    ``probe`` is called with each accepted ``DynamicState``. Event times are
    snapped to the integration grid. ``VoltageCollapseError`` propagates with
    the time of failure attached.
    """
    config = config or IntegratorConfig()
    events.validate_against(case)
    sim = HorizonSimulator(case, config, fault=events.fault)
    shed_queue = [(grid_time(ev.time, config.step), ev) for ev in events.shed_events]
    n_steps = config.n_steps

    times = [0.0]
    mstates = [sim.state.machines.copy()]
    volts = [sim.state.bus_voltages.copy()]
    if probe is not None:
        probe(sim.state)

    qi = 0
    for _ in range(n_steps):
        while qi < len(shed_queue) and abs(shed_queue[qi][0] - sim.t) < 1e-9:
            sim.shed(shed_queue[qi][1].bus, shed_queue[qi][1].fraction)
            qi += 1
        state = sim.step()
        if probe is not None:
            probe(state)
        times.append(state.t)
        mstates.append(state.machines.copy())
        volts.append(state.bus_voltages.copy())

    return Trajectory(case=case, t=np.array(times),
                      machines=np.array(mstates), voltages=np.array(volts))
