"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines. The desk-scale training artifacts (criteria 7-9) are built once per
session by the ``desk_run`` fixture.
"""

import json
import time

import numpy as np
import pytest

from gridshed.case import load_two_area_case
from gridshed.cli import main as cli_main
from gridshed.dqn import GreedyPolicy, TrainConfig, train
from gridshed.envelope import Observation, TvrcEnvelope
from gridshed.env import UvlsEnv, reward
from gridshed.evaluate import evaluate_policy
from gridshed.integrator import IntegratorConfig
from gridshed.network import gradient, init_params
from gridshed.relay import generate_expert_transitions
from gridshed.scenarios import generate_scenarios, stressed_scenario
from gridshed.simulate import EventSchedule, FaultEvent, LoadAccounting, simulate_horizon
from gridshed.tabular import ToyMdp, tabular_q_reference, value_iteration

from conftest import omib_case
from test_network import finite_difference_grad, random_check_case

pytestmark = pytest.mark.acceptance

# Desk-scale training configuration (criterion 7 allows overriding the
# paper-scale episode count; all other choices are recorded in the run
# summary and the decisions ledger).
DESK_EPISODES = 700
DESK_LEARNING_RATE = 3e-3
DESK_EPSILON_DECAY = 0.9931
DESK_SEED = 11
TRAIN_POOL_SEED = 101
HELDOUT_POOL_SEED = 202


def report(criterion: int, description: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[criterion {criterion:2d}] {status}: {description}{suffix}")
    assert ok, f"criterion {criterion} failed: {description}{suffix}"


@pytest.fixture(scope="session")
def desk_run(two_area):
    """Expert generation + desk-scale training + paired held-out evaluation."""
    env = UvlsEnv(two_area)
    train_pool = generate_scenarios(two_area, 60, seed=TRAIN_POOL_SEED)
    held_out = generate_scenarios(two_area, 50, seed=HELDOUT_POOL_SEED)
    expert = generate_expert_transitions(two_area, train_pool[:40], env=env)
    config = TrainConfig(learning_rate=DESK_LEARNING_RATE,
                         epsilon_decay=DESK_EPSILON_DECAY,
                         episodes=DESK_EPISODES, seed=DESK_SEED)
    t0 = time.perf_counter()
    result = train(env, train_pool, expert, config)
    train_wall = time.perf_counter() - t0
    rep_dqn = evaluate_policy("dqn", two_area, held_out,
                              params=result.checkpoint.params, env=env)
    rep_relay = evaluate_policy("relay", two_area, held_out, env=env)
    return {
        "result": result,
        "train_wall": train_wall,
        "report_dqn": rep_dqn,
        "report_relay": rep_relay,
    }


def test_criterion_1_equilibrium_persistence(two_area):
    t0 = time.perf_counter()
    traj = simulate_horizon(two_area, EventSchedule(), IntegratorConfig())
    wall = time.perf_counter() - t0
    vm = traj.voltage_magnitudes()
    drift = float(np.max(np.abs(vm - vm[0])))
    report(1, "equilibrium persistence (15 s, no events)",
           drift < 1e-6 and wall < 10.0,
           f"max deviation {drift:.2e} p.u., runtime {wall:.2f}s")


def test_criterion_2_integrator_order():
    case = omib_case()
    fault = FaultEvent(branch=1, bus=3, apply_time=0.1, clear_time=0.2)

    def run(h):
        cfg = IntegratorConfig(step=h, horizon=2.0, corrector_tol=1e-13,
                               algebraic_tol=1e-12,
                               max_corrector_iterations=60)
        return simulate_horizon(case, EventSchedule(fault=fault), cfg)

    ref = run(0.01 / 64).machines[:, 1, 0]
    err = {}
    for h in (0.01, 0.005):
        traj = run(h)
        stride = int(round(h / (0.01 / 64)))
        err[h] = np.max(np.abs(traj.machines[:, 1, 0] - ref[::stride]))
    ratio = err[0.01] / err[0.005]
    report(2, "integrator self-convergence order",
           3.5 <= ratio <= 4.5, f"error ratio {ratio:.3f}")


def test_criterion_3_fidvr_realism(two_area):
    envelope = TvrcEnvelope()
    env = UvlsEnv(two_area)

    def rollout(action):
        env.reset(stressed_scenario())
        terminal = False
        while not terminal:
            _, _, terminal = env.step(action)
        times, vm = env.monitored_history()
        result = env.episode_result()
        post = times > env.t_fc + 1e-9
        margins = np.array([vm[i].min() - envelope.threshold(times[i] - env.t_fc)
                            for i in range(len(times)) if post[i]])
        min_v = float(vm[post].min())
        return result, margins, min_v

    res_none, margins_none, minv_none = rollout(0)
    res_all, margins_all, minv_all = rollout(env.action_space_size - 1)
    violated = margins_none.min() < 0.0
    removed = margins_all.min() >= 0.0
    raised = minv_all > minv_none
    report(3, "stressed scenario violates TVRC; all-shed mitigates",
           violated and (removed or raised),
           f"no-shed margin {margins_none.min():+.4f}, all -shed margin "
           f"{margins_all.min():+.4f}, min V {minv_none:.4f}->{minv_all:.4f}")


def test_criterion_4_reward_law():
    rng = np.random.default_rng(4)
    n_checks = 10_000
    ok = True
    min_healthy = np.inf
    max_violation = -np.inf
    for _ in range(n_checks):
        n_mon = int(rng.integers(1, 16))
        deltas = rng.uniform(-1.0, 0.5, size=n_mon)
        if rng.random() < 0.3:
            deltas = np.abs(deltas)  # exercise the all-healthy branch often
        p = rng.uniform(0.05, 5.0, size=4)
        acct = LoadAccounting(buses=(0, 1, 2, 3), p_nominal=p,
                              q_nominal=np.zeros(4))
        shed_mask = rng.random(4) < 0.5
        for k in np.where(shed_mask)[0]:
            frac = float(rng.uniform(0.0, 1.0))
            acct.last_shed[k] = p[k] * frac
            acct.remaining[k] = 1.0 - frac
        r = reward(Observation(t=1.0, deltas=deltas), acct)
        healthy = bool(np.all(deltas >= 0.0))
        if healthy:
            min_healthy = min(min_healthy, r)
        else:
            max_violation = max(max_violation, r)
        if healthy != (r >= 0.0):
            ok = False
            break
    branch_order = min_healthy > max_violation
    report(4, "reward sign law over 10,000 randomized inputs",
           ok and branch_order,
           f"min healthy reward {min_healthy:.3f} > max violation reward "
           f"{max_violation:.3f}")


def test_criterion_5_gradient_fidelity():
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        params, states, actions, targets = random_check_case(rng)
        gw, gb, _ = gradient(params, states, actions, targets)
        analytic = np.concatenate([g.ravel() for g in gw]
                                  + [g.ravel() for g in gb])
        numeric = finite_difference_grad(params, states, actions, targets)
        scale = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / scale)))
    report(5, "analytic vs finite-difference gradients (50 networks)",
           worst < 1e-4, f"max relative error {worst:.2e}")


def test_criterion_6_bellman_oracle():
    kernel = {
        0: {0: [(1.0, 0, 0.1)], 1: [(1.0, 1, 1.0)]},
        1: {0: [(1.0, 1, 0.5)], 1: [(1.0, 0, -0.2)]},
    }
    mdp = ToyMdp(n_states=2, n_actions=2, kernel=kernel)
    gamma = 0.9
    q_star = value_iteration(mdp, gamma)
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        q = tabular_q_reference(mdp, alpha=0.5, gamma=gamma, episodes=3000,
                                rng=rng)
        worst = max(worst, float(np.max(np.abs(q - q_star))))
    report(6, "tabular Q-learning matches value iteration (10 seeds)",
           worst < 1e-6, f"max |Q - Q*| = {worst:.2e}")


def test_criterion_7_learning_trend(desk_run):
    curve = desk_run["result"].curve
    joint = np.array([p.joint_reward for p in curve])
    k = max(1, len(joint) // 5)
    first = float(joint[:k].mean())
    last = float(joint[-k:].mean())
    budget_ok = desk_run["train_wall"] <= 1800.0
    report(7, f"learning trend over {len(curve)} episodes",
           last > first and budget_ok,
           f"first-20% mean {first:.1f} -> last-20% mean {last:.1f}, "
           f"training wall time {desk_run['train_wall']:.0f}s")


def test_criterion_8_ordinal_comparison(desk_run):
    dqn = desk_run["report_dqn"]
    relay = desk_run["report_relay"]
    q1_ok = dqn.q1 >= relay.q1 + 10.0
    q2_ok = dqn.mean_q2 >= relay.mean_q2 - 1.0
    report(8, "trained agent dominates the relay on the held-out pool",
           q1_ok and q2_ok,
           f"Q1 {dqn.q1:.1f}% vs {relay.q1:.1f}%, "
           f"Q2 {dqn.mean_q2:.2f}% vs {relay.mean_q2:.2f}%")


def test_criterion_9_decision_latency(desk_run):
    params = desk_run["result"].checkpoint.params
    policy = GreedyPolicy(params)
    rng = np.random.default_rng(9)
    states = rng.normal(0.0, 0.2, size=(2000, params.layer_sizes[0]))
    for s in states:
        policy.act(s)
    mean_ms = policy.mean_latency * 1000.0
    report(9, "greedy decision latency over 2000 calls",
           mean_ms < 50.0, f"measured mean {mean_ms:.3f} ms")


def test_criterion_10_pipeline_determinism(tmp_path):
    def pipeline(tag):
        root = tmp_path / tag
        root.mkdir()
        pool = root / "pool.json"
        snap = root / "expert.npz"
        run = root / "run"
        assert cli_main(["gen-scenarios", "--count", "4", "--seed", "21",
                         "--out", str(pool)]) == 0
        assert cli_main(["expert", "--scenarios", str(pool), "--seed", "21",
                         "--out", str(snap)]) == 0
        assert cli_main(["train", "--scenarios", str(pool), "--expert",
                         str(snap), "--episodes", "2", "--seed", "21",
                         "--out", str(run)]) == 0
        assert cli_main(["eval", "--policy", "dqn", "--checkpoint",
                         str(run / "checkpoint.npz"), "--scenarios", str(pool),
                         "--seed", "21", "--out", str(run),
                         "--no-traces"]) == 0
        curve = (run / "learning_curve.csv").read_bytes()
        rep = (run / "report_dqn.json").read_bytes()
        pool_bytes = pool.read_bytes()
        return pool_bytes, curve, rep

    a = pipeline("a")
    b = pipeline("b")
    identical = all(x == y for x, y in zip(a, b))
    report(10, "same-seed pipeline reruns are byte-identical",
           identical,
           "scenario pool, learning curve and eval report all match")
