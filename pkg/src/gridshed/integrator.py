"""Fixed-step predictor-corrector integration core.

Scheme: explicit (Euler) predictor followed by an iterated trapezoidal
corrector. The grid simulator interleaves a network algebraic solve with
each corrector pass; the plain-ODE entry point below is the same corrector
without the algebraic stage and doubles as a test hook.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class IntegratorConfig:
    step: float = 0.01  # h, s
    horizon: float = 15.0  # s
    algebraic_tol: float = 1e-10
    max_algebraic_iterations: int = 50
    corrector_tol: float = 1e-10
    max_corrector_iterations: int = 30

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        n = self.horizon / self.step
        if self.horizon <= 0 or abs(n - round(n)) > 1e-9:
            raise ValueError("horizon must be a positive multiple of the step")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.step))


def trapezoidal_step(f, y, t, h, tol=1e-12, max_iters=50):
    """One predictor-corrector step of y' = f(t, y).

    The corrector iterates y_{n+1} = y_n + h/2 (f(t_n, y_n) + f(t_n+h, y_{n+1}))
    to the trapezoidal fixed point.
    """
    y = np.asarray(y, dtype=float)
    f0 = np.asarray(f(t, y), dtype=float)
    y_next = y + h * f0
    for _ in range(max_iters):
        y_new = y + 0.5 * h * (f0 + np.asarray(f(t + h, y_next), dtype=float))
        delta = np.max(np.abs(y_new - y_next))
        y_next = y_new
        if delta < tol * (1.0 + np.max(np.abs(y_next))):
            break
    return y_next
