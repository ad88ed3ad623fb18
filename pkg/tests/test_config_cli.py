import json
from pathlib import Path

import pytest
from conftest import TINY

from starcco import cli
from starcco.config import (
    ConfigError,
    Strategy,
    load_config,
    loads_config,
    scene_for,
    split_elements,
)

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def tiny_ini(tmp_path):
    path = tmp_path / "tiny.ini"
    path.write_text(TINY)
    return path


@pytest.mark.parametrize("text, label, weights", [
    ("mgda", "mgda", None), ("MGDA", "mgda", None),
    ("fixed(0.3, 0.7)", "fixed_0.3_0.7", (0.3, 0.7)),
    ("fixed_0.6_0.4", "fixed_0.6_0.4", (0.6, 0.4)),
    ("fixed(1, 0)", "fixed_1_0", (1.0, 0.0)),
])
def test_strategy_parsing(text, label, weights):
    s = Strategy.parse(text)
    assert s.label == label and s.weights == weights
    assert Strategy.parse(s.label) == s


@pytest.mark.parametrize("text", ["adam", "fixed(0.5, 0.6)", "fixed(-0.5, 1.5)", "fixed(0.5)"])
def test_bad_strategies(text):
    with pytest.raises(ConfigError):
        Strategy.parse(text)


@pytest.mark.parametrize("K, split", [(1, (1, 1)), (2, (2, 1)), (4, (2, 2)), (8, (4, 2)),
                                      (16, (4, 4)), (7, (7, 1)), (12, (4, 3))])
def test_split_elements(K, split):
    assert split_elements(K) == split


def test_tiny_config_parses(tiny_ini):
    cfg = load_config(tiny_ini)
    assert (cfg.scene.K_H, cfg.scene.K_V) == (2, 1)
    assert cfg.train.hidden == (8,) and cfg.env.horizon == 2
    assert cfg.channel.path_loss.gamma_aP == 4.5
    assert [s.label for s in cfg.strategies] == ["mgda", "fixed_0.3_0.7"]
    assert scene_for(cfg, 3).N_s == 3


def test_sweep_over_k_sets_the_grid():
    cfg = loads_config(TINY.replace("sweep = ns", "sweep = k"))
    sc = scene_for(cfg, 8)
    assert (sc.K_H, sc.K_V) == (4, 2) and sc.N_s == 1


def test_fixed_positions_are_truncated_by_ns_sweep():
    cfg = loads_config(TINY.replace("N_s = 1", "N_s = 2\nris_positions = 5, 5; 15, 15"))
    assert scene_for(cfg, 1).ris_positions == ((5.0, 5.0),)


@pytest.mark.parametrize("old, new, match", [
    ("R_g = 10", "R_g = 10\nbogus = 1", "bogus"),
    ("[train]", "[nonsense]\n[train]", "unknown sections"),
    ("C = 1e-2", "C = lots", "C"),
    ("horizon = 2", "horizon = two", "horizon"),
    ("sweep = ns", "sweep = gamma", "sweep variable"),
    ("seeds = 0", "seeds =", "seeds"),
    ("K = 2", "K = 2\nK_H = 2", "either K"),
    ("N_s = 1", "N_s = 1\nris_positions = 5", "x, y"),
    ("horizon = 2", "horizon = 0", "horizon"),
])
def test_config_errors(old, new, match):
    with pytest.raises(ConfigError, match=match):
        loads_config(TINY.replace(old, new))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.ini")


@pytest.mark.parametrize("name", ["example.ini", "trend_ns.ini", "trend_k.ini"])
def test_shipped_configs_load(name):
    cfg = load_config(ROOT / "configs" / name)
    assert cfg.sweep_variable in ("ns", "k")
    assert any(s.weights is None for s in cfg.strategies)


def test_trend_configs_use_a_hundred_point_grid():
    for name in ("trend_ns.ini", "trend_k.ini"):
        cfg = load_config(ROOT / "configs" / name)
        assert cfg.scene.N == 100 and len(cfg.seeds) >= 5


# -- CLI ------------------------------------------------------------------------


def test_cli_simulate(tiny_ini, tmp_path, capsys):
    out = tmp_path / "sim"
    assert cli.main(["simulate", "--config", str(tiny_ini), "--out", str(out), "--dump-channels"]) == 0
    for name in ("metrics.csv", "scene.json", "channels.csv", "rsrp_heatmap.svg", "run_meta.json"):
        assert (out / name).exists()
    assert "coverage=" in capsys.readouterr().out
    meta = json.loads((out / "run_meta.json").read_text())
    assert "coverage=sum_of_covered_weights" in meta["metric_convention"]


def test_cli_train(tiny_ini, tmp_path):
    out = tmp_path / "train"
    assert cli.main(["train", "--config", str(tiny_ini), "--out", str(out), "--strategy", "fixed(0.6, 0.4)"]) == 0
    final = json.loads((out / "final.json").read_text())
    assert final["strategy"] == "fixed_0.6_0.4"
    assert (out / "final.npz").exists() and (out / "train_log.csv").exists()
    assert (out / "episode_trace.csv").read_text().startswith("t,coverage")


def test_cli_sweep_and_plot(tiny_ini, tmp_path):
    out = tmp_path / "sweep"
    assert cli.main(["sweep", "--config", str(tiny_ini), "--out", str(out)]) == 0
    assert len((out / "results.csv").read_text().splitlines()) == 3
    assert (out / "coverage_vs_ns.svg").exists() and (out / "capacity_vs_ns.svg").exists()
    replot = tmp_path / "replot"
    assert cli.main(["plot", str(out / "results.csv"), "--out", str(replot)]) == 0
    assert (replot / "coverage_vs_ns.svg").read_bytes() == (out / "coverage_vs_ns.svg").read_bytes()


def test_cli_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text(TINY.replace("horizon = 2", "horizon = -3"))
    assert cli.main(["simulate", "--config", str(bad), "--out", str(tmp_path / "x")]) == 1
    assert "config error" in capsys.readouterr().err
    assert cli.main(["simulate", "--config", str(tmp_path / "absent.ini")]) == 1


def test_cli_runtime_error_exit_code(tmp_path):
    empty = tmp_path / "results.csv"
    empty.write_text("strategy,sweep_variable,sweep_value,seed,coverage,capacity,iterations,wall_time,error\n")
    assert cli.main(["plot", str(empty)]) == 2


def test_cli_bad_environment_seed(tiny_ini, tmp_path, monkeypatch):
    monkeypatch.setenv("STARCCO_SEED", "abc")
    assert cli.main(["simulate", "--config", str(tiny_ini), "--out", str(tmp_path / "x")]) == 1


def simulate_scene(tiny_ini, out, argv=()):
    assert cli.main(["simulate", "--config", str(tiny_ini), "--out", str(out), *argv]) == 0
    return json.loads((out / "run_meta.json").read_text())["config"]["seeds"]


def test_seed_precedence(tiny_ini, tmp_path, monkeypatch):
    assert simulate_scene(tiny_ini, tmp_path / "a") == [0]
    monkeypatch.setenv("STARCCO_SEED", "5")
    assert simulate_scene(tiny_ini, tmp_path / "b") == [5]
    assert simulate_scene(tiny_ini, tmp_path / "c", ["--seed", "9"]) == [9]


def test_cli_selftest(capsys):
    assert cli.main(["selftest"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("[PASS]") for line in lines)


def test_cli_requires_command():
    with pytest.raises(SystemExit):
        cli.main([])
