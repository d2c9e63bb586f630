"""Dev-only: desk-scale learning feasibility experiment.

Trains on a seeded pool, reports first/last-20% joint-reward means and the
Q1/Q2 comparison against the relay on a held-out pool.
"""
import sys
import time

sys.path.insert(0, "src")

import numpy as np

from gridshed.case import load_two_area_case
from gridshed.dqn import TrainConfig, train
from gridshed.env import UvlsEnv
from gridshed.evaluate import evaluate_policy
from gridshed.relay import generate_expert_transitions
from gridshed.scenarios import generate_scenarios

alpha = float(sys.argv[1]) if len(sys.argv) > 1 else 1e-3
eta = float(sys.argv[2]) if len(sys.argv) > 2 else 0.988
episodes = int(sys.argv[3]) if len(sys.argv) > 3 else 300
seed = int(sys.argv[4]) if len(sys.argv) > 4 else 11
sync = int(sys.argv[5]) if len(sys.argv) > 5 else 0

case = load_two_area_case()
env = UvlsEnv(case)
train_pool = generate_scenarios(case, 60, seed=101)
held_out = generate_scenarios(case, 50, seed=202)

t0 = time.time()
expert = generate_expert_transitions(case, train_pool[:40], env=env)
print(f"expert: {len(expert)} transitions in {time.time()-t0:.0f}s", flush=True)

cfg = TrainConfig(learning_rate=alpha, epsilon_decay=eta, episodes=episodes,
                  seed=seed, target_sync_period=sync)
t0 = time.time()


def progress(p):
    if p.episode % 20 == 0:
        print(f"  ep {p.episode}: R={p.episode_reward:8.1f} a={p.success} "
              f"eps={p.epsilon:.3f}", flush=True)


result = train(env, train_pool, expert, cfg, progress=progress)
print(f"train: {time.time()-t0:.0f}s", flush=True)

joint = np.array([p.joint_reward for p in result.curve])
k = max(1, len(joint) // 5)
print(f"first-20% mean joint: {joint[:k].mean():.1f}")
print(f"last-20%  mean joint: {joint[-k:].mean():.1f}")

t0 = time.time()
rep_dqn = evaluate_policy("dqn", case, held_out,
                          params=result.checkpoint.params, env=env)
rep_relay = evaluate_policy("relay", case, held_out, env=env)
rep_none = evaluate_policy("none", case, held_out, env=env)
print(f"eval: {time.time()-t0:.0f}s")
for rep in (rep_dqn, rep_relay, rep_none):
    s = rep.summary()
    print(f"  {s['method']:>5}: Q1={s['q1_pct']:6.2f}%  Q2={s['mean_q2_pct']:6.2f}%")
