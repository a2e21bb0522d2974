"""Acceptance checks, one test per criterion, each reporting a PASS/FAIL line.

The slow tests share one set of desk-scale training runs (seeds 0 to 4).
"""

import subprocess
import sys
import time

import numpy as np
import pytest
from acceptance_report import report
from instances import feasible_instances
from test_nets import numeric_grad, random_case, rel_err

from wpmec.config import desk_config
from wpmec.env import run_decisions, move_devices
from wpmec.mural import evaluate_policy
from wpmec.rl.nets import nll_loss_and_grad, q_loss_and_grad
from wpmec.rl.softq import boltzmann_policy, soft_value
from wpmec.rl.spaces import build_action_space
from wpmec.rl.training import Trainer
from wpmec.tau import coefficients, feasible_interval, oracle_tau, raw_objective, solve_tau
from wpmec.world import device_capacity, init_world, street_grid

TRAIN_SEEDS = range(5)
EVAL_EPISODES = 5


@pytest.fixture(scope="module")
def instances():
    return feasible_instances(1000, seed=2024)


@pytest.fixture(scope="module")
def desk_runs():
    """Desk-scale training for each seed: {seed: (trainer, wall seconds)}."""
    runs = {}
    for s in TRAIN_SEEDS:
        t0 = time.perf_counter()
        tr = Trainer(desk_config(), seed=s)
        tr.train()
        runs[s] = (tr, time.perf_counter() - t0)
    return runs


def test_c1_closed_form_matches_oracle(instances):
    t0 = time.perf_counter()
    worst_tau, worst_gap = 0.0, 0.0
    for cfg, inp in instances:
        tau = solve_tau(coefficients(inp, cfg), feasible_interval(inp, cfg))
        ref = oracle_tau(inp, cfg)
        f_tau, f_ref = raw_objective(inp, [tau, ref], cfg)
        worst_tau = max(worst_tau, abs(tau - ref))
        worst_gap = max(worst_gap, (f_ref - f_tau) / abs(f_ref))
    secs = time.perf_counter() - t0
    ok = worst_tau <= 1e-4 and worst_gap <= 1e-9 and secs <= 30
    assert report(1, ok, f"{len(instances)} instances, max |dtau|={worst_tau:.3g}, "
                         f"max rel gap={worst_gap:.3g}, {secs:.1f}s")


def test_c2_slope_sign_follows_net_capacity(instances):
    checked = agree = 0
    b_pos = d_pos = True
    for cfg, inp in instances:
        c = coefficients(inp, cfg)
        b_pos &= c.B > 0
        d_pos &= c.D > 0
        if abs(c.A) > 1e-12 * abs(c.B):
            checked += 1
            agree += np.sign(c.derivative_sign_term) == np.sign(c.A)
    ok = agree == checked and b_pos and d_pos
    assert report(2, ok, f"sign(AD-BC)==sign(A) on {agree}/{checked}; B>0 all: {b_pos}; D>0 all: {d_pos}")


def test_c3_soft_q_identities():
    rng = np.random.default_rng(3)
    norm = shift = low = 0.0
    low_corrected = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 12))
        q = rng.normal(scale=3.0, size=n)
        p = rng.dirichlet(np.ones(n))
        mu = float(rng.uniform(0.1, 10.0))
        c = float(rng.normal(scale=10.0))
        norm = max(norm, abs(boltzmann_policy(q, p, mu).sum() - 1.0))
        shift = max(shift, abs(soft_value(q + c, p, mu) - soft_value(q, p, mu) - c))
        v = soft_value(q, p, 64.0)
        low = max(low, abs(v - q.max()))
        low_corrected = max(low_corrected, abs(v - q.max() - np.log(p[np.argmax(q)]) / 64.0))
    ok = norm <= 1e-9 and shift <= 1e-9 and low <= 1e-6
    assert report(3, ok, f"max |sum pi-1|={norm:.2g}, max shift err={shift:.2g}, "
                         f"max |V-maxQ| at mu=64={low:.3g} (minus log prior/mu: {low_corrected:.2g})")


def test_c4_loss_gradients():
    worst = 0.0
    for seed in range(10):
        net, obs, acts, y = random_case(seed)
        _, g = q_loss_and_grad(net, obs, acts, y)
        num = numeric_grad(lambda: q_loss_and_grad(net, obs, acts, y)[0], net)
        worst = max(worst, rel_err(np.concatenate([a.ravel() for a in g]), num))
        net, obs, acts, _ = random_case(100 + seed)
        _, g = nll_loss_and_grad(net, obs, acts)
        num = numeric_grad(lambda: nll_loss_and_grad(net, obs, acts)[0], net)
        worst = max(worst, rel_err(np.concatenate([a.ravel() for a in g]), num))
    assert report(4, worst <= 1e-4, f"10 nets x 2 losses, max rel err={worst:.2g}")


def test_c5_energy_accounting():
    cfg = desk_config()
    space = build_action_space(cfg)
    grid = street_grid(cfg)
    negative = mismatched = overspends = 0
    for ep in range(100):
        rng = np.random.default_rng(ep)
        world = init_world(cfg, rng)
        world.uav_energy = rng.uniform(0, cfg.uav_capacity, cfg.num_uavs)
        world.device_energy = rng.uniform(0, device_capacity(cfg), cfg.num_devices)
        for _ in range(cfg.slots_per_episode):
            beta, pos, speeds = space.decode(rng.integers(0, len(space), cfg.num_uavs), world.uav_pos, cfg)
            m, world, _ = run_decisions(world, beta, pos, speeds, cfg)
            negative += int(np.any(world.device_energy < 0) or np.any(world.uav_energy < 0))
            mismatched += int(np.any(m.overspent != (m.penalty > 0)))
            overspends += int(np.count_nonzero(m.overspent))
            world = move_devices(world, grid, cfg, rng)
    ok = negative == 0 and mismatched == 0 and overspends > 0
    assert report(5, ok, f"100 episodes: negative-battery slots={negative}, "
                         f"over-spend events={overspends}, unmatched penalties={mismatched}")


def first_last_ratio(rewards):
    return float(np.mean(rewards[-50:]) / np.mean(rewards[:50]))


@pytest.mark.slow
def test_c6_training_improves(desk_runs):
    tr, secs = desk_runs[0]
    rewards = [log.reward for log in tr.logs]
    ratio = first_last_ratio(rewards)
    others = ", ".join(f"{first_last_ratio([x.reward for x in t.logs]):.3f}"
                       for s, (t, _) in desk_runs.items() if s)
    ok = ratio >= 1.2 and secs <= 15 * 60
    assert report(6, ok, f"seed 0: last50/first50 reward={ratio:.3f}, {secs:.0f}s "
                         f"(seeds 1-4: {others})")


@pytest.mark.slow
def test_c7_baseline_ordering(desk_runs):
    cfg = desk_config()
    means = {"mural": [], "nsd": [], "oo": []}
    for s, (tr, _) in desk_runs.items():
        for kind in means:
            ms = evaluate_policy(kind, cfg, tr.nets, episodes=EVAL_EPISODES, seed=1000 + s)
            means[kind].append(np.mean([m.mean_efficiency for m in ms]))
    m, nsd, oo = (float(np.mean(means[k])) for k in ("mural", "nsd", "oo"))
    ok = m >= 1.05 * nsd and m >= 1.10 * oo
    assert report(7, ok, f"mean efficiency MURAL={m:.4g}, NSD={nsd:.4g} ({m / nsd:.3f}x), "
                         f"OO={oo:.4g} ({m / oo:.3g}x)")


@pytest.mark.slow
def test_c8_harvest_grows_with_aps(desk_runs):
    nets = desk_runs[0][0].nets
    harvest = []
    for n in (2, 4, 6, 8):
        ms = evaluate_policy("mural", desk_config(num_aps=n), nets, episodes=3, seed=7)
        harvest.append(float(np.mean([m.mean_device_harvest for m in ms])))
    ok = all(b >= a for a, b in zip(harvest, harvest[1:]))
    assert report(8, ok, "mean device harvest (J) for 2/4/6/8 APs: " + ", ".join(f"{h:.4g}" for h in harvest))


def test_c9_cli_is_deterministic(tmp_path):
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        base = [sys.executable, "-m", "wpmec.cli"]
        for argv in (["train", "--preset", "desk", "--episodes", "4", "--seed", "3", "--out", str(out)],
                     ["evaluate", "--checkpoint", str(out / "checkpoint.npz"), "--episodes", "2",
                      "--seed", "3", "--out", str(out)]):
            subprocess.run(base + argv, check=True, capture_output=True)
        outputs.append(((out / "rewards.csv").read_bytes(), (out / "metrics.csv").read_bytes()))
    ok = outputs[0] == outputs[1]
    assert report(9, ok, f"rewards.csv and metrics.csv identical across runs: {ok}")


@pytest.mark.slow
def test_c10_runtime_linear_in_episodes():
    secs = {}
    for episodes in (200, 400):
        cfg = desk_config(episodes=episodes, slots_per_episode=10)
        t0 = time.perf_counter()
        Trainer(cfg, seed=0).train()
        secs[episodes] = time.perf_counter() - t0
    ratio = secs[400] / secs[200]
    assert report(10, 1.7 <= ratio <= 2.3, f"400/200-episode wall clock={ratio:.3f} "
                                           f"({secs[200]:.1f}s, {secs[400]:.1f}s; 10 slots per episode)")
