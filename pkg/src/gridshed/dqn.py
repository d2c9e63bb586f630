"""Deep Q-learning: targets, exploration, the training loop and checkpoints."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass

import numpy as np

from .env import UvlsEnv
from .errors import ConfigError, ScenarioRejectedError
from .network import (DEFAULT_HIDDEN, MlpParameters, argmax_action, forward,
                      forward_batch, gradient, init_params, sgd_update)
from .replay import ORIGIN_RANDOM, ReplayBuffer, Transition

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4  # alpha
    discount: float = 0.95  # gamma
    epsilon_decay: float = 0.999  # eta, per episode
    epsilon_initial: float = 1.0
    episodes: int = 3500
    batch_size: int = 2000  # N_d
    hidden_sizes: tuple = DEFAULT_HIDDEN
    target_sync_period: int = 0  # gradient steps between target copies; 0 = off
    expert_capacity: int = 2000
    explore_capacity: int = 6000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.discount <= 1.0:
            raise ConfigError("discount must be in [0, 1]")
        if not 0.0 < self.epsilon_decay <= 1.0:
            raise ConfigError("epsilon decay must be in (0, 1]")
        if self.batch_size > self.expert_capacity + self.explore_capacity:
            raise ConfigError("batch size exceeds total buffer capacity")


def epsilon_at(config: TrainConfig, episode: int) -> float:
    """epsilon_t = epsilon_0 * eta^t, the closed form of the decay recurrence."""
    return config.epsilon_initial * config.epsilon_decay ** episode


def td_target(transition: Transition, params: MlpParameters,
              gamma: float) -> float:
    """r for terminal transitions, else r + gamma max_a Q(s', a)."""
    if transition.terminal:
        return float(transition.reward)
    q_next = forward(params, transition.next_state)
    return float(transition.reward + gamma * np.max(q_next))


def td_targets(batch, params: MlpParameters, gamma: float) -> np.ndarray:
    """Vectorized targets; terminal next-states are never evaluated."""
    rewards = np.array([t.reward for t in batch])
    terminal = np.array([t.terminal for t in batch])
    targets = rewards.copy()
    live = ~terminal
    if np.any(live):
        next_states = np.stack([t.next_state for t in batch])[live]
        q_next = forward_batch(params, next_states)
        targets[live] += gamma * q_next.max(axis=1)
    return targets


def epsilon_greedy(params: MlpParameters, state, epsilon: float,
                   rng: np.random.Generator, n_actions: int) -> int:
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigError("epsilon must be in [0, 1]")
    if rng.random() < epsilon:
        return int(rng.integers(n_actions))
    return argmax_action(params, state)


@dataclass
class Checkpoint:
    params: MlpParameters
    config: TrainConfig
    episode: int
    epsilon: float
    rng_state: dict


def save_checkpoint(ckpt: Checkpoint, path, provenance=None) -> None:
    arrays = {}
    for i, (w, b) in enumerate(zip(ckpt.params.weights, ckpt.params.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    np.savez_compressed(
        path,
        format_version=CHECKPOINT_FORMAT_VERSION,
        n_layers=len(ckpt.params.weights),
        config=json.dumps(asdict(ckpt.config)),
        episode=ckpt.episode,
        epsilon=ckpt.epsilon,
        rng_state=json.dumps(ckpt.rng_state),
        provenance=str(provenance or ""),
        **arrays,
    )


def load_checkpoint(path) -> Checkpoint:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["format_version"])
        if version != CHECKPOINT_FORMAT_VERSION:
            raise ConfigError(f"unsupported checkpoint format_version {version}")
        n_layers = int(data["n_layers"])
        weights = [data[f"w{i}"].copy() for i in range(n_layers)]
        biases = [data[f"b{i}"].copy() for i in range(n_layers)]
        cfg_doc = json.loads(str(data["config"]))
        cfg_doc["hidden_sizes"] = tuple(cfg_doc["hidden_sizes"])
        config = TrainConfig(**cfg_doc)
        return Checkpoint(params=MlpParameters(weights, biases), config=config,
                          episode=int(data["episode"]),
                          epsilon=float(data["epsilon"]),
                          rng_state=json.loads(str(data["rng_state"])))


class GreedyPolicy:
    """Pure-greedy action selection with per-call latency bookkeeping."""

    def __init__(self, params: MlpParameters):
        self.params = params
        self.latencies: list = []

    def act(self, state) -> int:
        start = time.perf_counter()
        action = argmax_action(self.params, state)
        self.latencies.append(time.perf_counter() - start)
        return action

    @property
    def mean_latency(self) -> float:
        return float(np.mean(self.latencies)) if self.latencies else 0.0


@dataclass
class CurvePoint:
    episode: int
    episode_reward: float  # R_k
    success: int  # alpha_k
    joint_reward: float  # R_k * alpha_k
    epsilon: float


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    curve: list  # of CurvePoint
    wall_time: float = 0.0


def train(env: UvlsEnv, scenario_pool, expert_transitions,
          config: TrainConfig, progress=None) -> TrainResult:
    """The offline training loop.

    Per episode: draw a scenario, roll out with epsilon-greedy actions,
    store transitions in the exploration partition, and after every
    environment step run one gradient-descent update on a minibatch
    sampled from the union of both partitions. Epsilon decays per episode.
    Collapsed episodes terminate normally and keep training.
    """
    if not scenario_pool:
        raise ConfigError("scenario pool is empty")
    t_start = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    layer_sizes = ([env.state_size] + list(config.hidden_sizes)
                   + [env.action_space_size])
    params = init_params(layer_sizes, rng)
    target_params = params.copy() if config.target_sync_period > 0 else None

    buffer = ReplayBuffer(config.expert_capacity, config.explore_capacity)
    buffer.extend(expert_transitions)

    curve = []
    grad_steps = 0
    for episode in range(config.episodes):
        eps = epsilon_at(config, episode)
        scenario = scenario_pool[int(rng.integers(len(scenario_pool)))]
        try:
            stacked = env.reset(scenario)
        except ScenarioRejectedError:
            curve.append(CurvePoint(episode, 0.0, 0, 0.0, eps))
            continue
        state = stacked.flat()
        terminal = False
        while not terminal:
            action = epsilon_greedy(params, state, eps, rng,
                                    env.action_space_size)
            nxt, r, terminal = env.step(action)
            next_state = nxt.flat()
            buffer.add(Transition(state=state, action=action, reward=r,
                                  next_state=next_state, terminal=terminal,
                                  origin=ORIGIN_RANDOM))
            batch = buffer.sample(min(config.batch_size, len(buffer)), rng)
            bootstrap = target_params if target_params is not None else params
            targets = td_targets(batch, bootstrap, config.discount)
            states_b = np.stack([t.state for t in batch])
            actions_b = np.array([t.action for t in batch])
            gw, gb, _ = gradient(params, states_b, actions_b, targets)
            sgd_update(params, gw, gb, config.learning_rate)
            grad_steps += 1
            if target_params is not None \
                    and grad_steps % config.target_sync_period == 0:
                target_params = params.copy()
            state = next_state

        result = env.episode_result()
        point = CurvePoint(episode, result.reward, result.success,
                           result.reward * result.success, eps)
        curve.append(point)
        if progress is not None:
            progress(point)

    ckpt = Checkpoint(params=params, config=config, episode=config.episodes,
                      epsilon=epsilon_at(config, config.episodes),
                      rng_state=rng.bit_generator.state)
    return TrainResult(checkpoint=ckpt, curve=curve,
                       wall_time=time.perf_counter() - t_start)
