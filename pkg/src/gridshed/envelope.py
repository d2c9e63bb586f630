"""Transient voltage recovery criterion: staged threshold and deviations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TvrcEnvelope:
    """Piecewise minimum-voltage requirement after fault clearance.

    ``stages`` maps time offsets since clearing to thresholds; the active
    threshold is a right-continuous step function of the offset.
    """

    stages: tuple = ((0.0, 0.70), (0.33, 0.80), (0.5, 0.90), (1.5, 0.95))

    def __post_init__(self):
        offsets = [o for o, _ in self.stages]
        levels = [v for _, v in self.stages]
        if offsets != sorted(set(offsets)):
            raise ValueError("stage offsets must be strictly increasing")
        if offsets[0] != 0.0:
            raise ValueError("first stage must start at offset 0")
        if levels != sorted(levels):
            raise ValueError("thresholds must be nondecreasing")

    @property
    def offsets(self) -> np.ndarray:
        return np.array([o for o, _ in self.stages])

    @property
    def levels(self) -> np.ndarray:
        return np.array([v for _, v in self.stages])

    def threshold(self, dt_since_clear: float) -> float:
        """Required minimum voltage ``dt_since_clear`` seconds after clearing."""
        if dt_since_clear < 0:
            raise ValueError("dt_since_clear must be >= 0")
        i = int(np.searchsorted(self.offsets, dt_since_clear, side="right")) - 1
        return float(self.levels[i])


@dataclass(frozen=True)
class Observation:
    """One frame of TVRC deviations at the monitored buses."""

    t: float
    deltas: np.ndarray  # V_j - threshold, per monitored bus


def compute_deltas(bus_voltage_magnitudes, t: float, t_fc: float,
                   envelope: TvrcEnvelope | None = None) -> Observation:
    """Deviation of each monitored voltage from the active TVRC threshold.

    Before clearance (t <= t_fc) the envelope clock has not started; the
    first-stage threshold is used so observations stay well-defined during
    the fault-on period.
    """
    envelope = envelope or TvrcEnvelope()
    vm = np.asarray(bus_voltage_magnitudes, dtype=float)
    if t > t_fc:
        thr = envelope.threshold(t - t_fc)
    else:
        thr = float(envelope.levels[0])
    return Observation(t=t, deltas=vm - thr)
