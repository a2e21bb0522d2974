import json

import numpy as np
import pytest

from wpmec.config import ConfigError, SimConfig, desk_config, load_config, validate_config
from wpmec.scheduling import threshold
from wpmec.world import WorldState, ap_grid, check_world, device_capacity, init_world


def test_defaults_accepted_unchanged(cfg):
    assert validate_config(cfg) == cfg
    assert validate_config({}) == cfg


@pytest.mark.parametrize("key,value,message", [
    ("device_harvest_eff", 1.2, "device_harvest_eff out of (0,1)"),
    ("num_devices", 0, "num_devices must be ≥ 1"),
    ("tau_epsilon", 0.5, "tau_epsilon"),
    ("distill_weight", 1.5, "distill_weight"),
    ("inverse_temperature", 0.0, "inverse_temperature"),
    ("discount", 1.0, "discount"),
    ("reward_mode", "bogus", "reward_mode"),
])
def test_rejects_named_invariant(key, value, message):
    with pytest.raises(ConfigError, match=message.replace("(", r"\(").replace(")", r"\)")):
        validate_config({key: value})


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown config keys: frobnicate"):
        validate_config({"frobnicate": 1})


def test_load_config_round_trip(tmp_path):
    c = desk_config(num_aps=6)
    p = tmp_path / "c.json"
    p.write_text(c.to_json())
    assert load_config(p) == c
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(p)


def test_replace_revalidates(cfg):
    with pytest.raises(ConfigError):
        cfg.replace(num_uavs=0)


def test_four_aps_on_quadrant_centres():
    got = {tuple(p) for p in ap_grid(4, 1000.0)}
    assert got == {(250.0, 250.0), (250.0, 750.0), (750.0, 250.0), (750.0, 750.0)}


def test_ap_layout_nested_and_uniform():
    for n in range(2, 10):
        small, big = ap_grid(n - 1, 1000.0), ap_grid(n, 1000.0)
        if n - 1 >= 2:
            np.testing.assert_array_equal(big[: n - 1], small)
    assert {tuple(p) for p in ap_grid(9, 1000.0)} == {(x, y) for x in (250., 500., 750.) for y in (250., 500., 750.)}
    np.testing.assert_array_equal(ap_grid(1, 1000.0), [[500.0, 500.0]])
    many = ap_grid(16, 1000.0)
    assert len(many) == 16 and np.all((many > 0) & (many < 1000))


def test_init_world_layout(cfg):
    w = init_world(cfg, 42)
    np.testing.assert_array_equal(w.laser_pos, [500.0, 500.0])
    assert np.all(w.uav_xyz[:, 2] == cfg.uav_altitude)
    assert np.all(w.device_xyz[:, 2] == 0.0)
    assert np.all(np.mod(w.device_pos, cfg.block_size) == 0)
    np.testing.assert_allclose(w.device_energy, cfg.device_init_factor * threshold(cfg))
    np.testing.assert_allclose(w.uav_energy, cfg.uav_init_energy)
    check_world(w, cfg)


def test_init_world_deterministic(cfg):
    assert init_world(cfg, 42).to_json() == init_world(cfg, 42).to_json()
    assert init_world(cfg, 42).to_json() != init_world(cfg, 43).to_json()


def test_world_json_round_trip(cfg):
    w = init_world(cfg, 7)
    back = WorldState.from_json(w.to_json())
    assert back.to_json() == w.to_json()
    assert json.loads(w.to_json())["slot"] == 0


def test_device_capacity(cfg):
    assert device_capacity(cfg) == pytest.approx(10 * 0.1125)


def test_check_world_catches_negative_energy(cfg):
    w = init_world(cfg, 1)
    w.uav_energy[0] = -1.0
    with pytest.raises(AssertionError):
        check_world(w, cfg)
