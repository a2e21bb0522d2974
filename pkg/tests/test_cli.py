import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from wpmec.cli import episodes_to_plateau, fmt, main
from wpmec.mural import evaluate_policy
from wpmec.rl.training import Trainer, run_training


@pytest.fixture
def cfg_file(tiny, tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(tiny.to_dict()))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def run(*argv):
    return main([str(a) for a in argv])


def test_train_then_evaluate(tiny, cfg_file, tmp_path):
    out = tmp_path / "train"
    assert run("train", "--config", cfg_file, "--seed", 2, "--out", out) == 0
    rows = read_csv(out / "rewards.csv")
    assert rows[0] == ["episode", "reward", "loss_task_mean", "loss_shared"]
    assert len(rows) == tiny.episodes + 1
    _, logs = run_training(tiny, seed=2)
    assert [float(r[1]) for r in rows[1:]] == [log.reward for log in logs]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seeds"] == [2] and manifest["runs"][0]["checkpoint"] == "checkpoint.npz"
    assert "wall_clock_seconds" in manifest and "episodes_to_plateau" in manifest["runs"][0]

    ev = tmp_path / "eval"
    assert run("evaluate", "--checkpoint", out / "checkpoint.npz", "--episodes", 2, "--seed", 4, "--out", ev) == 0
    rows = read_csv(ev / "metrics.csv")
    assert rows[0] == ["episode", "avg_efficiency", "avg_bits", "avg_energy"]
    want = evaluate_policy("mural", tiny, Trainer.load(out / "checkpoint.npz").nets, episodes=2, seed=4)
    assert [float(r[1]) for r in rows[1:]] == [m.mean_efficiency for m in want]
    assert [float(r[2]) for r in rows[1:]] == [m.avg_bits for m in want]


def test_reruns_are_byte_identical(cfg_file, tmp_path):
    texts = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert run("train", "--config", cfg_file, "--out", out) == 0
        assert run("evaluate", "--checkpoint", out / "checkpoint.npz", "--policy", "nsd",
                   "--episodes", 2, "--out", out) == 0
        texts.append(((out / "rewards.csv").read_bytes(), (out / "metrics.csv").read_bytes()))
    assert texts[0] == texts[1]


def test_parallel_seeds_match_sequential(tiny, cfg_file, tmp_path):
    out = tmp_path / "par"
    assert run("train", "--config", cfg_file, "--seed", 1, "--parallel-seeds", 2, "--out", out) == 0
    rows = read_csv(out / "rewards.csv")
    assert rows[0][0] == "seed"
    for s in (1, 2):
        _, logs = run_training(tiny, seed=s)
        assert [float(r[2]) for r in rows[1:] if r[0] == str(s)] == [log.reward for log in logs]
        assert (out / f"checkpoint_seed{s}.npz").exists()


def test_sweep_long_format(cfg_file, tmp_path):
    out = tmp_path / "sweep"
    assert run("sweep", "--config", cfg_file, "--axis", "aps", "--values", "4,5,6,7,8,9",
               "--policy", "greedy", "--out", out) == 0
    rows = read_csv(out / "sweep.csv")
    assert rows[0] == ["axis", "value", "policy", "metric", "metric_value"]
    assert len(rows) - 1 == 6 * 1 * 3
    assert {r[1] for r in rows[1:]} == {"4", "5", "6", "7", "8", "9"}
    assert {r[3] for r in rows[1:]} == {"avg_efficiency", "avg_bits", "avg_energy"}


def test_sweep_with_harvest_and_checkpoint(tiny, cfg_file, tmp_path):
    tr = Trainer(tiny, seed=0)
    tr.train(2)
    tr.save(tmp_path / "ck.npz")
    out = tmp_path / "sw"
    assert run("sweep", "--config", cfg_file, "--axis", "aps", "--values", "2,4", "--policy", "mural,oo",
               "--checkpoint", tmp_path / "ck.npz", "--harvest", "--out", out) == 0
    rows = read_csv(out / "sweep.csv")
    assert len(rows) - 1 == 2 * 2 * 4
    got = {(r[1], r[2], r[3]): float(r[4]) for r in rows[1:]}
    ms = evaluate_policy("mural", tiny.replace(num_aps=2), tr.nets, episodes=1, seed=0)
    assert got[("2", "mural", "avg_device_harvest")] == ms[0].mean_device_harvest


@pytest.mark.parametrize("argv", [
    ["evaluate", "--policy", "mural"],
    ["evaluate", "--policy", "bogus"],
    ["sweep", "--axis", "height", "--values", "1"],
    ["sweep", "--axis", "aps", "--values", "x,y"],
    ["sweep", "--axis", "uavs", "--values", "0", "--policy", "greedy"],
    ["train", "--config", "/nonexistent.json"],
    ["train", "--episodes", "0"],
    ["evaluate", "--checkpoint", "/nonexistent.npz"],
])
def test_rejections_exit_2(argv, tmp_path, capsys):
    assert run(*argv, "--out", tmp_path / "x") == 2
    assert "wpmec: error:" in capsys.readouterr().err


def test_bad_config_keys_rejected(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"num_uavs": 2, "warp_drive": 1}))
    assert run("train", "--config", path, "--out", tmp_path / "o") == 2


def test_checkpoint_config_mismatch(tiny, tmp_path):
    tr = Trainer(tiny, seed=0)
    tr.save(tmp_path / "ck.npz")
    other = tmp_path / "other.json"
    other.write_text(json.dumps(tiny.replace(num_devices=7).to_dict()))
    assert run("evaluate", "--config", other, "--checkpoint", tmp_path / "ck.npz", "--out", tmp_path / "o") == 2


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "wpmec.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "wpmec" in r.stdout


def test_number_format_round_trips():
    x = 0.1 + 0.2
    assert float(fmt(x)) == x
    assert fmt(np.int64(3)) == "3" and fmt(True) == "1"


def test_plateau_detection():
    r = list(np.linspace(0, 10, 100)) + [10.0] * 100
    ep = episodes_to_plateau(r, window=20, tol=0.01)
    assert 95 <= ep <= 125
    assert episodes_to_plateau([1.0] * 5, window=20) is None
