"""Tabular Q-learning on explicit finite MDPs.

Used as the correctness oracle for the Bellman update: on a small MDP with
a known kernel, the table must converge to the value-iteration fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ToyMdp:
    """Finite MDP with kernel[s][a] = list of (probability, next_state, reward).

    ``terminal`` states absorb: episodes end on entering them.
    """

    n_states: int
    n_actions: int
    kernel: dict
    terminal: frozenset = frozenset()

    def sample(self, s: int, a: int, rng: np.random.Generator):
        outcomes = self.kernel[s][a]
        probs = np.array([p for p, _, _ in outcomes])
        i = rng.choice(len(outcomes), p=probs / probs.sum())
        _, s2, r = outcomes[i]
        return s2, r


def tabular_q_reference(mdp: ToyMdp, alpha: float, gamma: float,
                        episodes: int, rng: np.random.Generator,
                        max_steps: int = 50) -> np.ndarray:
    """Q-learning with a uniform-random behavior policy.

    Q'(s,a) = Q(s,a) + alpha (r + gamma max_a' Q(s',a') - Q(s,a)),
    with the bootstrap dropped on terminal successors.
    """
    q = np.zeros((mdp.n_states, mdp.n_actions))
    starts = [s for s in range(mdp.n_states) if s not in mdp.terminal]
    for _ in range(episodes):
        s = starts[rng.integers(len(starts))]
        for _ in range(max_steps):
            a = int(rng.integers(mdp.n_actions))
            s2, r = mdp.sample(s, a, rng)
            bootstrap = 0.0 if s2 in mdp.terminal else gamma * np.max(q[s2])
            q[s, a] += alpha * (r + bootstrap - q[s, a])
            if s2 in mdp.terminal:
                break
            s = s2
    return q


def value_iteration(mdp: ToyMdp, gamma: float, tol: float = 1e-12,
                    max_iters: int = 100000) -> np.ndarray:
    """Fixed point of the Bellman optimality operator on the same MDP."""
    q = np.zeros((mdp.n_states, mdp.n_actions))
    for _ in range(max_iters):
        q_new = np.zeros_like(q)
        for s in range(mdp.n_states):
            if s in mdp.terminal:
                continue
            for a in range(mdp.n_actions):
                total = 0.0
                for p, s2, r in mdp.kernel[s][a]:
                    nxt = 0.0 if s2 in mdp.terminal else gamma * np.max(q[s2])
                    total += p * (r + nxt)
                q_new[s, a] = total
        if np.max(np.abs(q_new - q)) < tol:
            return q_new
        q = q_new
    return q
