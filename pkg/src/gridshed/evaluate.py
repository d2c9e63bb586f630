"""Greedy policy rollouts over scenario pools and trace export."""

from __future__ import annotations

import csv
import logging
import os


from .case import NetworkCase
from .dqn import GreedyPolicy
from .env import UvlsEnv, write_episode_trace
from .errors import ScenarioRejectedError
from .metrics import EvalReport, ScenarioRow
from .relay import RelayConfig, RelayController

log = logging.getLogger(__name__)


class NoopController:
    """The no-action reference policy."""

    def begin_episode(self) -> None:
        pass

    def select_action(self, stacked, env) -> int:
        return 0


class DqnController:
    """Greedy network policy adapter."""

    def __init__(self, params):
        self.policy = GreedyPolicy(params)

    def begin_episode(self) -> None:
        pass

    def select_action(self, stacked, env) -> int:
        return self.policy.act(stacked.flat())


def make_controller(method: str, params=None,
                    relay_config: RelayConfig | None = None):
    if method == "dqn":
        if params is None:
            raise ValueError("dqn evaluation needs network parameters")
        return DqnController(params)
    if method == "relay":
        return RelayController(relay_config)
    if method == "none":
        return NoopController()
    raise ValueError(f"unknown method {method!r}")


def _write_voltage_trace(env: UvlsEnv, path, provenance, t_fc) -> None:
    times, vm = env.monitored_history()
    with open(path, "w", newline="") as fh:
        if provenance:
            fh.write(f"# {provenance}\n")
        fh.write(f"# t_fc={t_fc!r}\n")
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"bus_{b}_vm" for b in env.case.monitored_buses])
        for i in range(len(times)):
            writer.writerow([repr(float(times[i]))]
                            + [repr(float(x)) for x in vm[i]])


def evaluate_policy(method: str, case: NetworkCase, scenarios,
                    params=None, relay_config: RelayConfig | None = None,
                    env: UvlsEnv | None = None, out_dir=None,
                    provenance=None) -> EvalReport:
    """Roll out every scenario without exploration and aggregate Q1/Q2.

    Rejected scenarios (infeasible pre-fault power flow) are skipped and
    logged; skipping is deterministic per scenario, so paired comparisons
    across methods stay aligned. With ``out_dir`` set, per-test episode
    traces and monitored-bus voltage trajectories are written.
    """
    env = env or UvlsEnv(case)
    controller = make_controller(method, params, relay_config)
    rows = []
    for idx, scenario in enumerate(scenarios):
        try:
            stacked = env.reset(scenario)
        except ScenarioRejectedError as exc:
            log.warning("eval %s: scenario %d rejected: %s", method, idx, exc)
            continue
        controller.begin_episode()
        terminal = False
        while not terminal:
            action = controller.select_action(stacked, env)
            stacked, _, terminal = env.step(action)
        result = env.episode_result()
        rows.append(ScenarioRow(scenario_id=idx, alpha=result.success,
                            episode_reward=result.reward,
                            q2=result.final_remaining_fraction * 100.0,
                            collapse=result.collapse))
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            write_episode_trace(
                result, os.path.join(out_dir, f"test_{idx:04d}_trace.csv"),
                provenance=provenance)
            _write_voltage_trace(
                env, os.path.join(out_dir, f"test_{idx:04d}_voltages.csv"),
                provenance, env.t_fc)
    return EvalReport(method=method, rows=tuple(rows))
