"""Staged under-voltage load-shedding relay: baseline policy and expert source.

The relay watches raw voltage magnitudes at the monitored buses. A stage
fires when any single bus has stayed below the stage threshold for the full
stage delay (and the relay is re-armed), producing the shed-at-every-
controlled-bus action. It has no knowledge of the time-varying recovery
envelope, which is exactly why it lags: by the time a sustained depression
has been timed out, the strict recovery deadlines have usually passed.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

import numpy as np

from .case import NetworkCase
from .env import UvlsEnv
from .errors import CaseValidationError, ScenarioRejectedError
from .replay import ORIGIN_EXPERT, Transition

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RelayStage:
    threshold: float  # p.u.
    delay: float  # s the voltage must stay below threshold
    fraction: float = 0.1  # shed fraction per controlled bus


@dataclass(frozen=True)
class RelayConfig:
    stages: tuple = (RelayStage(0.95, 3.0, 0.1), RelayStage(0.90, 0.5, 0.1))
    re_arm: float = 1.0  # s between successive sheds

    def __post_init__(self):
        thresholds = [s.threshold for s in self.stages]
        if thresholds != sorted(thresholds, reverse=True):
            raise CaseValidationError("stage thresholds must be nonincreasing")
        for s in self.stages:
            if s.delay <= 0:
                raise CaseValidationError("stage delays must be positive")
            if not 0.0 < s.fraction <= 1.0:
                raise CaseValidationError("stage fractions must be in (0, 1]")

    @property
    def highest_threshold(self) -> float:
        return max(s.threshold for s in self.stages)


@dataclass(frozen=True)
class RelayState:
    last_shed_time: float = float("-inf")


def relay_policy(times, voltages, now: float, n_controlled: int,
                 config: RelayConfig | None = None,
                 state: RelayState | None = None):
    """Evaluate the relay at one decision instant.

    ``times``/``voltages`` are the per-step monitored-bus history up to
    ``now`` (rows = samples). Returns ``(action_index, new_state)`` where the
    action is either no-op or the all-controlled-buses shed (the action
    space's shedding quantum applies regardless of the configured stage
    fraction).
    """
    config = config or RelayConfig()
    state = state or RelayState()
    times = np.asarray(times)
    voltages = np.asarray(voltages)

    for stage in config.stages:
        if now - state.last_shed_time < max(config.re_arm, stage.delay):
            continue
        window_start = now - stage.delay
        if times[0] > window_start + 1e-9:
            continue  # history does not yet cover the stage delay
        sel = times > window_start - 1e-9
        if not np.any(sel):
            continue
        below = np.all(voltages[sel] < stage.threshold, axis=0)
        if np.any(below):
            return (2 ** n_controlled - 1, RelayState(last_shed_time=now))
    return 0, state


class RelayController:
    """Adapter running the relay against the environment's voltage history."""

    def __init__(self, config: RelayConfig | None = None):
        self.config = config or RelayConfig()
        self.state = RelayState()

    def begin_episode(self) -> None:
        self.state = RelayState()

    def select_action(self, stacked, env: UvlsEnv) -> int:
        times, vm = env.monitored_history()
        action, self.state = relay_policy(times, vm, env._sim.t,
                                          env.n_controlled, self.config,
                                          self.state)
        return action


def generate_expert_transitions(case: NetworkCase, scenarios,
                                relay: RelayConfig | None = None,
                                env: UvlsEnv | None = None,
                                capacity: int = 2000) -> list:
    """Roll the relay through every scenario, collecting tagged transitions.

    The result is FIFO-capped at ``capacity`` (oldest dropped). Scenarios
    whose initialization fails are skipped with a log entry.
    """
    env = env or UvlsEnv(case)
    controller = RelayController(relay)
    out = deque(maxlen=capacity)
    for scenario in scenarios:
        try:
            stacked = env.reset(scenario)
        except ScenarioRejectedError as exc:
            log.warning("skipping scenario %s: %s", scenario, exc)
            continue
        controller.begin_episode()
        terminal = False
        while not terminal:
            action = controller.select_action(stacked, env)
            nxt, r, terminal = env.step(action)
            out.append(Transition(state=stacked.flat(), action=action,
                                  reward=r, next_state=nxt.flat(),
                                  terminal=terminal, origin=ORIGIN_EXPERT))
            stacked = nxt
    return list(out)
