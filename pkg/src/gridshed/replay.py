"""Replay transitions, the dual-origin buffer and snapshot files."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

ORIGIN_EXPERT = "expert"
ORIGIN_RANDOM = "random"

SNAPSHOT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Transition:
    state: np.ndarray  # flattened stacked state
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool
    origin: str  # expert | random

    def __post_init__(self):
        if self.origin not in (ORIGIN_EXPERT, ORIGIN_RANDOM):
            raise ValueError(f"unknown origin {self.origin!r}")
        if not np.isfinite(self.reward):
            raise ValueError("reward must be finite")


class ReplayBuffer:
    """Two FIFO partitions: expert experience and random exploration.

    Expert entries are never evicted by exploration data; each partition
    drops its own oldest entry on overflow.
    """

    def __init__(self, expert_capacity: int = 2000,
                 explore_capacity: int = 6000):
        self.expert_capacity = expert_capacity
        self.explore_capacity = explore_capacity
        self._expert = deque(maxlen=expert_capacity)
        self._random = deque(maxlen=explore_capacity)

    def add(self, transition: Transition) -> None:
        if transition.origin == ORIGIN_EXPERT:
            self._expert.append(transition)
        else:
            self._random.append(transition)

    def extend(self, transitions) -> None:
        for tr in transitions:
            self.add(tr)

    def __len__(self) -> int:
        return len(self._expert) + len(self._random)

    @property
    def n_expert(self) -> int:
        return len(self._expert)

    @property
    def n_random(self) -> int:
        return len(self._random)

    def sample(self, n: int, rng: np.random.Generator) -> list:
        """Uniform, without replacement, over the union of both partitions.

        Returns everything when fewer than ``n`` transitions are stored.
        """
        total = len(self)
        if total == 0:
            raise ConfigError("cannot sample from an empty replay buffer")
        if total <= n:
            return list(self._expert) + list(self._random)
        idx = rng.choice(total, size=n, replace=False)
        ne = len(self._expert)
        return [self._expert[i] if i < ne else self._random[i - ne]
                for i in idx]

    def transitions(self) -> list:
        return list(self._expert) + list(self._random)


def save_snapshot(transitions, path, seed=None, provenance=None) -> None:
    """Record-per-transition snapshot (npz arrays, row = transition)."""
    txs = list(transitions)
    if txs:
        states = np.stack([t.state for t in txs])
        next_states = np.stack([t.next_state for t in txs])
    else:
        states = np.zeros((0, 0))
        next_states = np.zeros((0, 0))
    np.savez_compressed(
        path,
        format_version=SNAPSHOT_FORMAT_VERSION,
        seed=-1 if seed is None else seed,
        provenance=str(provenance or ""),
        states=states,
        actions=np.array([t.action for t in txs], dtype=np.int64),
        rewards=np.array([t.reward for t in txs]),
        next_states=next_states,
        terminals=np.array([t.terminal for t in txs], dtype=bool),
        origins=np.array([t.origin for t in txs], dtype="U10"),
    )


def load_snapshot(path) -> list:
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != SNAPSHOT_FORMAT_VERSION:
            raise ConfigError(f"unsupported snapshot format_version {version}")
        out = []
        for i in range(len(data["actions"])):
            out.append(Transition(
                state=data["states"][i].copy(),
                action=int(data["actions"][i]),
                reward=float(data["rewards"][i]),
                next_state=data["next_states"][i].copy(),
                terminal=bool(data["terminals"][i]),
                origin=str(data["origins"][i]),
            ))
    return out
