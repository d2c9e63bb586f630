"""Evaluation metrics: success rate (Q1) and remaining load (Q2)."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError

REPORT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ScenarioRow:
    scenario_id: int
    alpha: int
    episode_reward: float
    q2: float  # percent of controllable load remaining at the end
    collapse: bool


@dataclass(frozen=True)
class EvalReport:
    method: str  # dqn | relay | none
    rows: tuple

    def __post_init__(self):
        for r in self.rows:
            if not (-1e-9 <= r.q2 <= 100.0 + 1e-9):
                raise ConfigError(f"Q2 out of range: {r.q2}")

    @property
    def test_count(self) -> int:
        return len(self.rows)

    @property
    def success_count(self) -> int:
        return sum(r.alpha for r in self.rows)

    @property
    def q1(self) -> float:
        if not self.rows:
            return 0.0
        return self.success_count / self.test_count * 100.0

    @property
    def q2_values(self) -> list:
        return [r.q2 for r in self.rows]

    @property
    def mean_q2(self) -> float:
        return float(np.mean(self.q2_values)) if self.rows else 0.0

    def summary(self) -> dict:
        return {
            "method": self.method,
            "tests": self.test_count,
            "successes": self.success_count,
            "q1_pct": self.q1,
            "mean_q2_pct": self.mean_q2,
        }


def q1_metric(success_count: int, test_count: int) -> float:
    """Success rate in percent (N_succ / M x 100)."""
    if test_count <= 0:
        raise ConfigError("test count must be positive")
    if success_count > test_count:
        raise ConfigError("successes exceed test count")
    return success_count / test_count * 100.0


def save_report(report: EvalReport, json_path, csv_path=None,
                provenance=None) -> None:
    doc = {
        "format_version": REPORT_FORMAT_VERSION,
        "provenance": provenance,
        **report.summary(),
        "rows": [asdict(r) for r in report.rows],
    }
    with open(json_path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            if provenance:
                fh.write(f"# {provenance}\n")
            writer = csv.writer(fh)
            writer.writerow(["scenario_id", "alpha", "episode_reward", "q2",
                             "collapse"])
            for r in report.rows:
                writer.writerow([r.scenario_id, r.alpha,
                                 repr(float(r.episode_reward)),
                                 repr(float(r.q2)), int(r.collapse)])


def load_report(json_path) -> EvalReport:
    with open(json_path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != REPORT_FORMAT_VERSION:
        raise ConfigError(f"unsupported report format in {json_path}")
    rows = tuple(ScenarioRow(**r) for r in doc["rows"])
    return EvalReport(method=doc["method"], rows=rows)
