"""Power-grid emergency load-shedding testbed.

A reduced transient-dynamics simulator exposed as an MDP environment, a
rule-based under-voltage load-shedding relay (baseline and expert-experience
source), and a from-scratch deep-Q-network learner that sheds load to meet
a time-staged voltage recovery criterion while keeping as much load as
possible.
"""

__version__ = "0.1.0"

from .case import NetworkCase, load_case, load_two_area_case, save_case
from .envelope import TvrcEnvelope, compute_deltas
from .env import EnvConfig, UvlsEnv, decode_action, encode_action, reward
from .integrator import IntegratorConfig
from .scenarios import ScenarioSpec, generate_scenarios, stressed_scenario

__all__ = [
    "NetworkCase", "load_case", "load_two_area_case", "save_case",
    "TvrcEnvelope", "compute_deltas",
    "EnvConfig", "UvlsEnv", "decode_action", "encode_action", "reward",
    "IntegratorConfig",
    "ScenarioSpec", "generate_scenarios", "stressed_scenario",
    "__version__",
]
