"""MDP environment wrapping the grid simulator.

Episode anatomy (times on the integration grid): the scenario's fault is
applied and cleared during the reset phase; control begins at the first
whole action-interval boundary at or after clearing and repeats every
``action_interval`` until the horizon. Observations are TVRC-deviation
frames collected at those boundaries; the agent state stacks the most
recent ``n_recent`` frames (earliest frame replicated while the episode is
younger than the stack).

TVRC violations are logged at every integrator step strictly after the
clearing instant, so success reflects the full trajectory, not just the
sampled frames.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .case import NetworkCase
from .envelope import Observation, TvrcEnvelope, compute_deltas
from .errors import (CaseValidationError, EpisodeFinishedError,
                     PowerFlowDivergenceError, ScenarioRejectedError,
                     VoltageCollapseError)
from .integrator import IntegratorConfig
from .scenarios import ScenarioSpec
from .simulate import FaultEvent, HorizonSimulator, LoadAccounting, grid_time

#: shed fraction commanded by an active action bit
SHED_UNIT = 0.1


@dataclass(frozen=True)
class EnvConfig:
    action_interval: float = 1.0  # s between control decisions
    horizon: float = 15.0  # s, episode length
    n_recent: int = 10  # stacked observation frames

    def __post_init__(self):
        if self.n_recent < 1:
            raise CaseValidationError("n_recent must be >= 1")
        if self.action_interval <= 0 or self.horizon <= 0:
            raise CaseValidationError("intervals must be positive")


@dataclass(frozen=True)
class StackedState:
    """The agent input: n_recent observation frames, oldest first."""

    frames: tuple

    def flat(self) -> np.ndarray:
        return np.concatenate([f.deltas for f in self.frames])

    @property
    def latest(self) -> Observation:
        return self.frames[-1]


@dataclass
class EpisodeResult:
    reward: float  # episode return, sum of per-step rewards
    success: int  # 1 when the TVRC envelope was never violated
    steps: list  # per action instant: {"t", "action", "reward", "min_delta"}
    final_remaining_fraction: float  # controllable load left, of initial
    collapse: bool
    scenario: ScenarioSpec | None = None


def decode_action(index: int, n: int) -> np.ndarray:
    """Shed-fraction vector for an action index (LSB = first controlled bus)."""
    if not 0 <= index < 2 ** n:
        raise ValueError(f"action index {index} out of range for n={n}")
    return np.array([SHED_UNIT if (index >> i) & 1 else 0.0 for i in range(n)])


def encode_action(fractions) -> int:
    index = 0
    for i, f in enumerate(fractions):
        if f > 0:
            index |= 1 << i
    return index


def reward(observation: Observation, accounting: LoadAccounting) -> float:
    """Per-step reward in percent units.

    Any monitored bus below the envelope: the sum of negative deviations
    (percent of 1 p.u.). Otherwise: the percentage of controllable load
    remaining after the action with respect to the pre-episode total.
    """
    deltas = observation.deltas
    if np.any(deltas < 0.0):
        return float(np.sum(np.minimum(deltas, 0.0)) * 100.0)
    return float(np.sum(accounting.p_current) / accounting.initial_total * 100.0)


def success_flag(violation_log) -> int:
    """1 unless any post-clearance step saw a bus below the envelope."""
    return 0 if any(v < 0.0 for _, v in violation_log) else 1


class UvlsEnv:
    """Load-shedding MDP over one network case.

    Single-threaded and stateful; build one instance per concurrent
    rollout. The dynamics are deterministic, so identical scenarios yield
    identical episodes (``ScenarioSpec.rng_seed`` is carried for
    reproducibility bookkeeping only).
    """

    def __init__(self, case: NetworkCase, config: EnvConfig | None = None,
                 integrator: IntegratorConfig | None = None,
                 envelope: TvrcEnvelope | None = None):
        self.case = case
        self.config = config or EnvConfig()
        self.integrator = integrator or IntegratorConfig(
            horizon=self.config.horizon)
        self.envelope = envelope or TvrcEnvelope()
        ratio = self.config.action_interval / self.integrator.step
        if abs(ratio - round(ratio)) > 1e-9:
            raise CaseValidationError(
                "action_interval must be a multiple of the integrator step")
        self.n_controlled = len(case.controlled_buses)
        self.n_monitored = len(case.monitored_buses)
        self._mon_idx = np.array([case.bus_index(b)
                                  for b in case.monitored_buses])
        self._sim = None
        self._terminal = True

    # -- episode control -----------------------------------------------------

    @property
    def action_space_size(self) -> int:
        return 2 ** self.n_controlled

    @property
    def state_size(self) -> int:
        return self.config.n_recent * self.n_monitored

    def reset(self, scenario: ScenarioSpec) -> StackedState:
        scenario.validate(self.case)
        scaled = self.case.scaled(scenario.load_scale)
        fault = None
        if scenario.fault_branch is not None:
            br = scaled.branches[scenario.fault_branch]
            fault = FaultEvent(branch=scenario.fault_branch, bus=br.from_bus,
                               apply_time=scenario.fault_apply_time,
                               clear_time=(scenario.fault_apply_time
                                           + scenario.fault_duration))
        try:
            self._sim = HorizonSimulator(scaled, self.integrator, fault=fault)
        except PowerFlowDivergenceError as exc:
            raise ScenarioRejectedError(
                f"pre-fault power flow diverged: {exc}") from exc

        h = self.integrator.step
        if fault is not None:
            self._t_fc = grid_time(fault.clear_time, h)
        else:
            self._t_fc = 0.0
        tm = self.config.action_interval
        self._t_first = grid_time(self._t_fc, tm)
        self._scenario = scenario
        self._history_t = [0.0]
        self._history_vm = [self._monitored_vm()]
        self._violations = []
        self._frames = []
        self._steps = []
        self._collapse = False
        self._terminal = False
        self._record_frame()

        try:
            t = 0.0
            while t < self._t_first - 1e-9:
                t = min(t + tm, self._t_first)
                self._sim.advance_to(t, probe=self._probe)
                self._record_frame()
        except VoltageCollapseError as exc:
            raise ScenarioRejectedError(
                f"collapse before the first action instant: {exc}") from exc
        return self._stacked()

    def step(self, action_index: int):
        """Apply an action, advance one interval; returns (state, r, terminal)."""
        if self._terminal:
            raise EpisodeFinishedError("episode is over; call reset()")
        fractions = decode_action(action_index, self.n_controlled)
        acct = self._sim.accounting
        acct.begin_step()
        for bus, f in zip(self.case.controlled_buses, fractions):
            if f > 0.0:
                self._sim.shed(bus, f)

        t_target = self._sim.t + self.config.action_interval
        try:
            self._sim.advance_to(t_target, probe=self._probe)
        except VoltageCollapseError:
            self._collapse = True
            self._terminal = True
            r = -100.0 * self.n_monitored
            self._violations.append((self._sim.t, -1.0))
            self._steps.append({"t": self._sim.t, "action": int(action_index),
                                "reward": r, "min_delta": -1.0,
                                "remaining_pct": acct.remaining_fraction * 100.0})
            return self._stacked(), r, True

        obs = self._record_frame()
        r = reward(obs, acct)
        self._terminal = t_target >= self.config.horizon - 1e-9
        self._steps.append({"t": float(t_target), "action": int(action_index),
                            "reward": r,
                            "min_delta": float(np.min(obs.deltas)),
                            "remaining_pct": acct.remaining_fraction * 100.0})
        return self._stacked(), r, self._terminal

    def episode_result(self) -> EpisodeResult:
        total = float(sum(s["reward"] for s in self._steps))
        alpha = 0 if self._collapse else success_flag(self._violations)
        return EpisodeResult(
            reward=total, success=alpha, steps=list(self._steps),
            final_remaining_fraction=self._sim.accounting.remaining_fraction,
            collapse=self._collapse, scenario=self._scenario)

    # -- inspection ------------------------------------------------------------

    @property
    def terminal(self) -> bool:
        return self._terminal

    @property
    def t_fc(self) -> float:
        return self._t_fc

    @property
    def first_action_time(self) -> float:
        return self._t_first

    def action_instants(self) -> list:
        tm = self.config.action_interval
        out = []
        t = self._t_first
        while t < self.config.horizon - 1e-9:
            out.append(round(t, 9))
            t += tm
        return out

    def monitored_history(self):
        """(times, magnitudes) at monitored buses for every step so far."""
        return np.array(self._history_t), np.array(self._history_vm)

    # -- internals ---------------------------------------------------------------

    def _monitored_vm(self) -> np.ndarray:
        return np.abs(self._sim.state.bus_voltages[self._mon_idx])

    def _probe(self, state) -> None:
        vm = np.abs(state.bus_voltages[self._mon_idx])
        self._history_t.append(state.t)
        self._history_vm.append(vm)
        if state.t > self._t_fc + 1e-9:
            thr = self.envelope.threshold(state.t - self._t_fc)
            self._violations.append((state.t, float(np.min(vm) - thr)))

    def _record_frame(self) -> Observation:
        obs = compute_deltas(self._monitored_vm(), self._sim.t, self._t_fc,
                             self.envelope)
        self._frames.append(obs)
        return obs

    def _stacked(self) -> StackedState:
        n = self.config.n_recent
        frames = self._frames[-n:]
        if len(frames) < n:
            frames = [frames[0]] * (n - len(frames)) + frames
        return StackedState(frames=tuple(frames))


def write_episode_trace(result: EpisodeResult, path, provenance=None) -> None:
    """Per-action-step episode record as CSV."""
    with open(path, "w", newline="") as fh:
        if provenance:
            fh.write(f"# {provenance}\n")
        writer = csv.writer(fh)
        writer.writerow(["t", "action_index", "r_t", "min_delta",
                         "remaining_load_pct"])
        for s in result.steps:
            writer.writerow([repr(float(s["t"])), s["action"],
                             repr(float(s["reward"])),
                             repr(float(s["min_delta"])),
                             repr(float(s["remaining_pct"]))])
