import numpy as np
import pytest

from wpmec import physics
from wpmec.env import (
    MURAL_MODE,
    NSD_MODE,
    OO_MODE,
    apply_slot,
    decide_tau,
    device_types,
    move_devices,
    reference_efficiency,
    run_decisions,
)
from wpmec.rl.spaces import build_action_space
from wpmec.world import check_world, device_capacity, init_world, street_grid


def random_episode(cfg, seed, slots, mode=MURAL_MODE, drain=False):
    """Uniform random UAV actions; yields (world before, metrics, world after)."""
    rng = np.random.default_rng(seed)
    space = build_action_space(cfg)
    world = init_world(cfg, rng)
    if drain:
        world.uav_energy = rng.uniform(0, 20, cfg.num_uavs)
        world.device_energy = rng.uniform(0, 0.2, cfg.num_devices)
    grid = street_grid(cfg)
    for _ in range(slots):
        beta, pos, speeds = space.decode(rng.integers(0, len(space), cfg.num_uavs), world.uav_pos, cfg)
        m, nxt, _ = run_decisions(world, beta, pos, speeds, cfg, mode)
        yield world, m, nxt
        world = move_devices(nxt, grid, cfg, rng)


def test_efficiency_is_bits_over_energy(desk):
    for _, m, _ in random_episode(desk, 0, 5):
        assert m.efficiency == pytest.approx(m.total_bits / m.total_energy, rel=1e-14)


@pytest.mark.parametrize("drain", [False, True])
def test_energy_audit(desk, drain):
    cap = device_capacity(desk)
    for before, m, after in random_episode(desk, 3, 40, drain=drain):
        check_world(after, desk)
        pre = before.device_energy + m.device_harvest_raw - m.device_energy
        np.testing.assert_allclose(after.device_energy, np.clip(pre, 0, cap), atol=1e-9)
        assert np.all(pre >= -1e-9)
        pre_u = before.uav_energy + m.uav_harvest_raw - m.uav_energy
        np.testing.assert_allclose(after.uav_energy, np.clip(pre_u, 0, desk.uav_capacity), atol=1e-9)
        np.testing.assert_array_equal(m.overspent, m.penalty > 0)


def test_oo_has_no_local_bits(desk):
    for _, m, _ in random_episode(desk, 1, 5, OO_MODE):
        assert m.local_bits == 0
        assert np.all(m.device_local_bits == 0)


def test_nsd_fixed_split_and_types(desk):
    for _, m, _ in random_episode(desk, 1, 5, NSD_MODE):
        assert m.tau == 0.5
        assert np.all(m.alpha == 1)


def test_decide_tau_within_bounds(desk):
    for w, m, _ in random_episode(desk, 2, 10):
        assert desk.tau_epsilon <= m.tau <= 1 - desk.tau_epsilon


def test_unaffordable_local_work_scaled(cfg):
    w = init_world(cfg.replace(num_devices=1, num_uavs=1), 0)
    c = cfg.replace(num_devices=1, num_uavs=1)
    w.device_energy[:] = 0.0
    w.device_pos[:] = [[0.0, 0.0]]
    m, nxt = apply_slot(w, [0], [0], w.uav_pos, [10.0], 0.5, c, MURAL_MODE)
    assert 0 <= m.brownout[0] < 1
    assert nxt.device_energy[0] >= 0


def test_unserved_devices_skip_transmission(desk):
    w = init_world(desk, 0)
    alpha = device_types(w, desk)
    m, _ = apply_slot(w, alpha, [0, 0], w.uav_pos, [10.0, 10.0], 0.5, desk)
    assert m.offload_bits == 0
    np.testing.assert_allclose(m.device_energy, physics.local_energy(desk))


def test_reference_efficiency(desk):
    bits = 10 * 1e7
    energy = 10 * 0.0125 + 2 * 5.0
    assert reference_efficiency(desk) == pytest.approx(bits / energy)


def test_fixed_tau_flags_infeasible(desk):
    w = init_world(desk, 0)
    w.device_energy[:] = 0.0
    dec = decide_tau(w, np.ones(desk.num_devices, dtype=int), [1, 1], w.uav_pos, [10.0, 10.0], desk, NSD_MODE)
    assert dec.tau == 0.5 and not dec.feasible
