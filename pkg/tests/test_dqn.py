import numpy as np
import pytest

from gridshed.dqn import (Checkpoint, GreedyPolicy, TrainConfig,
                          epsilon_at, epsilon_greedy, load_checkpoint,
                          save_checkpoint, td_target, td_targets, train)
from gridshed.env import UvlsEnv
from gridshed.errors import ConfigError
from gridshed.network import argmax_action, init_params
from gridshed.replay import ORIGIN_EXPERT, ORIGIN_RANDOM, Transition
from gridshed.scenarios import ScenarioSpec


def make_transition(rng, dim=6, n_actions=4, terminal=False, reward=None,
                    poison_next=False):
    nxt = np.full(dim, np.nan) if poison_next else rng.normal(size=dim)
    return Transition(state=rng.normal(size=dim),
                      action=int(rng.integers(n_actions)),
                      reward=float(rng.normal()) if reward is None else reward,
                      next_state=nxt, terminal=terminal,
                      origin=ORIGIN_RANDOM)


@pytest.fixture()
def small_params(rng):
    return init_params([6, 5, 4], rng)


def test_td_target_terminal_branch(small_params):
    rng = np.random.default_rng(0)
    tr = make_transition(rng, terminal=True, reward=-3.2)
    assert td_target(tr, small_params, 0.95) == pytest.approx(-3.2)


def test_td_target_bootstrap_arithmetic():
    # force max_a Q(s', a) = 2 with an explicit linear network
    from gridshed.network import MlpParameters
    params = MlpParameters(weights=[np.zeros((3, 2))],
                           biases=[np.array([1.0, 2.0])])
    tr = Transition(state=np.zeros(3), action=0, reward=1.0,
                    next_state=np.zeros(3), terminal=False,
                    origin=ORIGIN_RANDOM)
    assert td_target(tr, params, 0.95) == pytest.approx(2.9)


def test_td_target_gamma_zero(small_params):
    rng = np.random.default_rng(1)
    for _ in range(10):
        tr = make_transition(rng)
        assert td_target(tr, small_params, 0.0) == pytest.approx(tr.reward)


def test_terminal_never_reads_next_state(small_params):
    rng = np.random.default_rng(2)
    batch = [make_transition(rng, terminal=True, poison_next=True)
             for _ in range(8)]
    batch += [make_transition(rng) for _ in range(8)]
    targets = td_targets(batch, small_params, 0.95)
    assert np.all(np.isfinite(targets))
    for tr, tgt in zip(batch[:8], targets[:8]):
        assert tgt == pytest.approx(tr.reward)


def test_epsilon_zero_is_greedy(small_params, rng):
    s = rng.normal(size=6)
    greedy = argmax_action(small_params, s)
    for _ in range(50):
        assert epsilon_greedy(small_params, s, 0.0, rng, 4) == greedy


def test_epsilon_one_uniform_within_3_sigma(small_params):
    rng = np.random.default_rng(0)
    n, k = 100_000, 16
    counts = np.zeros(k, dtype=int)
    s = np.zeros(6)
    for _ in range(n):
        counts[epsilon_greedy(small_params, s, 1.0, rng, k)] += 1
    sigma = np.sqrt(n * (1 / k) * (1 - 1 / k))
    assert np.max(np.abs(counts - n / k)) < 3 * sigma


def test_epsilon_schedule_closed_form():
    cfg = TrainConfig(epsilon_initial=1.0, epsilon_decay=0.999)
    # oracle: evaluate the recurrence eps_t = eps_{t-1} * eta directly
    eps = 1.0
    for _ in range(3500):
        eps *= 0.999
    assert eps == pytest.approx(0.030144549019052724, rel=1e-12)
    assert epsilon_at(cfg, 3500) == pytest.approx(eps, rel=1e-12)
    assert epsilon_at(cfg, 0) == 1.0
    assert epsilon_at(cfg, 1) == pytest.approx(0.999)


def test_epsilon_bounds_checked(small_params, rng):
    with pytest.raises(ConfigError):
        epsilon_greedy(small_params, np.zeros(6), 1.5, rng, 4)


def test_checkpoint_round_trip(tmp_path, rng):
    params = init_params([120, 60, 30, 15, 16], rng)
    cfg = TrainConfig(seed=9)
    ckpt = Checkpoint(params=params, config=cfg, episode=17, epsilon=0.5,
                      rng_state=np.random.default_rng(9).bit_generator.state)
    path = tmp_path / "ckpt.npz"
    save_checkpoint(ckpt, path)
    loaded = load_checkpoint(path)
    assert loaded.episode == 17
    assert loaded.epsilon == 0.5
    assert loaded.config == cfg
    states = rng.normal(size=(100, 120))
    for s in states:
        assert argmax_action(loaded.params, s) == argmax_action(params, s)
    for w0, w1 in zip(params.weights, loaded.params.weights):
        np.testing.assert_array_equal(w0, w1)


def test_argmax_invariant_to_output_bias_shift(rng):
    params = init_params([8, 6, 5], rng)
    states = rng.normal(size=(20, 8))
    before = [argmax_action(params, s) for s in states]
    params.biases[-1] += 123.45
    after = [argmax_action(params, s) for s in states]
    assert before == after


def test_greedy_policy_latency_recorded(rng):
    params = init_params([120, 60, 30, 15, 16], rng)
    policy = GreedyPolicy(params)
    s = rng.normal(size=120)
    a1 = policy.act(s)
    a2 = policy.act(s)
    assert a1 == a2
    assert len(policy.latencies) == 2
    assert all(dt > 0 for dt in policy.latencies)


# -- the training loop ---------------------------------------------------------

@pytest.fixture(scope="module")
def env(two_area):
    return UvlsEnv(two_area)


TINY_POOL = [ScenarioSpec(load_scale=1.0, fault_branch=4, fault_duration=0.05),
             ScenarioSpec(load_scale=1.12, fault_branch=9,
                          fault_duration=0.06)]


def test_zero_episodes_checkpoint_is_initialization(env):
    cfg = TrainConfig(episodes=0, seed=5)
    result = train(env, TINY_POOL, [], cfg)
    rng = np.random.default_rng(5)
    expected = init_params([env.state_size, 60, 30, 15,
                            env.action_space_size], rng)
    for w0, w1 in zip(result.checkpoint.params.weights, expected.weights):
        np.testing.assert_array_equal(w0, w1)
    assert result.curve == []
    assert result.checkpoint.epsilon == 1.0


def test_training_deterministic_with_seed(env):
    cfg = TrainConfig(episodes=2, seed=3, learning_rate=1e-5,
                      batch_size=64)
    r1 = train(env, TINY_POOL, [], cfg)
    r2 = train(env, TINY_POOL, [], cfg)
    assert [(p.episode_reward, p.success, p.epsilon) for p in r1.curve] == \
           [(p.episode_reward, p.success, p.epsilon) for p in r2.curve]
    for w0, w1 in zip(r1.checkpoint.params.weights,
                      r2.checkpoint.params.weights):
        np.testing.assert_array_equal(w0, w1)


def test_rejected_scenarios_skipped_during_training(env):
    pool = [ScenarioSpec(load_scale=5.0, fault_branch=None, fault_duration=0.0)]
    cfg = TrainConfig(episodes=2, seed=1)
    result = train(env, pool, [], cfg)
    assert len(result.curve) == 2
    assert all(p.episode_reward == 0.0 for p in result.curve)


def test_expert_transitions_preloaded(env, rng):
    dim = env.state_size
    expert = [Transition(state=rng.normal(size=dim), action=0, reward=1.0,
                         next_state=rng.normal(size=dim), terminal=True,
                         origin=ORIGIN_EXPERT) for _ in range(5)]
    cfg = TrainConfig(episodes=1, seed=2, batch_size=8)
    result = train(env, TINY_POOL[:1], expert, cfg)
    assert result.checkpoint.episode == 1


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(discount=1.5)
    with pytest.raises(ConfigError):
        TrainConfig(epsilon_decay=0.0)
    with pytest.raises(ConfigError):
        TrainConfig(batch_size=10000)
