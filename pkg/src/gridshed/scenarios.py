"""Scenario specifications, randomized generation and file I/O."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .case import NetworkCase
from .errors import CaseValidationError, ConfigError

SCENARIO_FORMAT_VERSION = 1

DEFAULT_LOAD_RANGE = (0.9, 1.2)
DEFAULT_DURATION_RANGE = (0.05, 0.07)
DEFAULT_APPLY_TIME = 0.7


@dataclass(frozen=True)
class ScenarioSpec:
    load_scale: float
    fault_branch: int | None  # index into case.branches; None = no fault
    fault_duration: float
    fault_apply_time: float = DEFAULT_APPLY_TIME
    rng_seed: int = 0

    def validate(self, case: NetworkCase | None = None) -> None:
        if self.fault_branch is not None:
            if self.fault_duration <= 0:
                raise CaseValidationError("fault_duration must be positive")
            if self.fault_apply_time < 0:
                raise CaseValidationError("fault_apply_time must be >= 0")
            if case is not None and not (
                    0 <= self.fault_branch < len(case.branches)):
                raise CaseValidationError(
                    f"fault_branch {self.fault_branch} not in case")


def stressed_scenario() -> ScenarioSpec:
    """The bundled worst-case scenario: 120% loading, 0.06 s bolted fault on
    the inter-area corridor at the importing load bus, cleared exactly at the
    first action instant."""
    return ScenarioSpec(load_scale=1.2, fault_branch=9, fault_duration=0.06,
                        fault_apply_time=0.94, rng_seed=0)


def eligible_fault_branches(case: NetworkCase) -> list:
    """Branch indices whose outage keeps the network connected."""
    out = []
    for k, br in enumerate(case.branches):
        if not br.status:
            continue
        adj = {b.id: set() for b in case.buses}
        for j, other in enumerate(case.branches):
            if other.status and j != k:
                adj[other.from_bus].add(other.to_bus)
                adj[other.to_bus].add(other.from_bus)
        seen = {case.slack_bus}
        stack = [case.slack_bus]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(seen) == case.n_bus:
            out.append(k)
    return out


def generate_scenarios(case: NetworkCase, count: int, seed: int,
                       load_range=DEFAULT_LOAD_RANGE,
                       duration_range=DEFAULT_DURATION_RANGE,
                       apply_time: float = DEFAULT_APPLY_TIME) -> list:
    """Draw ``count`` scenarios: uniform load scale, duration and fault branch."""
    if not (DEFAULT_LOAD_RANGE[0] <= load_range[0] <= load_range[1]
            <= DEFAULT_LOAD_RANGE[1]):
        raise ConfigError(f"load range must lie within {DEFAULT_LOAD_RANGE}")
    if not (DEFAULT_DURATION_RANGE[0] <= duration_range[0] <= duration_range[1]
            <= DEFAULT_DURATION_RANGE[1]):
        raise ConfigError(f"duration range must lie within {DEFAULT_DURATION_RANGE}")
    branches = eligible_fault_branches(case)
    if not branches:
        raise ConfigError("case has no non-islanding fault branches")
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        out.append(ScenarioSpec(
            load_scale=float(rng.uniform(*load_range)),
            fault_branch=int(branches[rng.integers(len(branches))]),
            fault_duration=float(rng.uniform(*duration_range)),
            fault_apply_time=apply_time,
            rng_seed=int(seed) * 1000003 + k,
        ))
    return out


def save_scenarios(scenarios, path, seed=None, provenance=None) -> None:
    doc = {
        "format_version": SCENARIO_FORMAT_VERSION,
        "seed": seed,
        "provenance": provenance,
        "scenarios": [asdict(s) for s in scenarios],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_scenarios(path) -> list:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != SCENARIO_FORMAT_VERSION:
        raise ConfigError(f"unsupported scenario format in {path}")
    return [ScenarioSpec(**rec) for rec in doc["scenarios"]]
