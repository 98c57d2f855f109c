import json

import pytest

from cubesolver import cli, config, cube
from cubesolver import network as nn


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def zero_checkpoint(tmp_path):
    p = nn.init_params(nn.DESK_NETWORK, 0)
    for w in p.weights.values():
        w[...] = 0.0
    path = tmp_path / "zero.bin"
    path.write_bytes(nn.save_checkpoint(p))
    return path


def test_scramble_command(tmp_path):
    out = tmp_path / "s.txt"
    assert run("--seed", 3, "scramble", "--count", 4, "--depth", 6, "--out", out) == 0
    seqs = cube.read_scramble_file(out)
    assert len(seqs) == 4 and all(len(s) == 6 for s in seqs)
    assert seqs == cube.random_scrambles(4, 6, 3)


def test_train_command(tmp_path, capsys):
    cfg = tmp_path / "tiny.ini"
    cfg.write_text(
        "[adi]\nk = 2\nl = 5\niterations = 3\nbatch_size = 5\ncheckpoint_interval = 2\n"
        "[network]\nbody_layer_sizes = 8\nvalue_head_sizes = 4\npolicy_head_sizes = 4\n"
    )
    assert run("train", "--config", cfg, "--out", tmp_path / "run", "--log-every", 1) == 0
    assert (tmp_path / "run" / "ckpt_0000003.bin").exists()
    assert (tmp_path / "run" / "config.ini").exists()
    assert "ckpt_0000003.bin" in capsys.readouterr().out


def test_solve_and_analyze(tmp_path, zero_checkpoint):
    scr = tmp_path / "s.txt"
    cube.write_scramble_file(scr, [cube.parse_moves("R U"), cube.parse_moves("F")])
    res = tmp_path / "res.json"
    assert run("solve", "--checkpoint", zero_checkpoint, "--scrambles", scr,
               "--max-simulations", 2000, "--time-limit", "none", "--out", res) == 0
    records = json.loads(res.read_text())["records"]
    assert [r["solution"] for r in records] == ["U' R'", "F'"]
    trip = tmp_path / "trip.json"
    fig = tmp_path / "trip.png"
    assert run("analyze", "--results", res, "--out", trip, "--figure", fig) == 0
    assert json.loads(trip.read_text())["solutions"] == 2
    assert fig.exists()


def test_greedy_variant(tmp_path, zero_checkpoint):
    scr = tmp_path / "s.txt"
    cube.write_scramble_file(scr, [cube.parse_moves("R")])
    res = tmp_path / "res.csv"
    assert run("solve", "--checkpoint", zero_checkpoint, "--scrambles", scr, "--variant", "greedy",
               "--out", res) == 0
    assert "R'" in res.read_text()


def test_oracle_commands(tmp_path):
    table = tmp_path / "t.bin"
    assert run("oracle", "build", "--depth", 3, "--out", table) == 0
    scr = tmp_path / "s.txt"
    cube.write_scramble_file(scr, [cube.parse_moves("R U F L")])
    out = tmp_path / "o.json"
    assert run("oracle", "solve", "--table", table, "--scrambles", scr, "--cap", 5, "--out", out) == 0
    rec = json.loads(out.read_text())["records"][0]
    assert rec["solution"] == "L' F' U' R'"


def test_bench_and_report(tmp_path, zero_checkpoint):
    cfg = tmp_path / "b.ini"
    cfg.write_text(
        "[search]\ntime_limit = none\nmax_simulations = 500\n"
        "[bench]\ncubes = 3\ndepths = 2\nvariants = mcts, naive-mcts, greedy, oracle\n"
        "greedy_scramble_depths = 2\noracle_table_depth = 2\noracle_cap = 4\n"
    )
    out = tmp_path / "bench"
    assert run("--config", cfg, "--out-dir", out, "bench", "--checkpoint", zero_checkpoint) == 0
    assert (out / "run_mcts_d2.json").exists()
    assert (out / "run_oracle_d2.csv").exists()
    assert (out / "report_d2" / "summary.json").exists()
    assert (out / "report_d2" / "paired_mcts_vs_oracle.csv").exists()
    assert (out / "report_d2" / "length_histogram.png").exists()
    rep = tmp_path / "rep"
    assert run("--out-dir", rep, "report", "--runs", out / "run_mcts_d2.json", out / "run_greedy_d2.json",
               "--no-figures") == 0
    assert (rep / "summary.csv").exists()
    assert not list(rep.glob("*.png"))


def test_bench_without_checkpoint_fails_cleanly(tmp_path):
    assert run("--out-dir", tmp_path, "bench", "--checkpoint", tmp_path / "missing.bin") == 2


def test_bad_scramble_file_fails_cleanly(tmp_path, zero_checkpoint):
    scr = tmp_path / "bad.txt"
    scr.write_text("R Q\n")
    assert run("solve", "--checkpoint", zero_checkpoint, "--scrambles", scr, "--out", tmp_path / "x.json") == 2


def test_presets_parse():
    for name in config.PRESETS:
        cfg = config.load_config(name)
        cfg.network.validate()
    desk = config.load_config("desk")
    assert (desk.adi.k, desk.adi.l, desk.adi.iterations) == (5, 100, 2000)
    assert desk.search.time_limit == 60.0
    paper = config.load_config("paper")
    assert paper.network.body_layer_sizes == [4096, 2048]
    assert paper.search.time_limit == 3600.0


def test_config_round_trip_and_errors():
    cfg = config.load_config("desk")
    again = config.parse_config(config.dump_config(cfg))
    assert again == cfg
    with pytest.raises(ValueError):
        config.parse_config("[adi]\nbogus = 1\n")
    with pytest.raises(ValueError):
        config.parse_config("[nosuch]\nk = 1\n")
    assert config.parse_duration("2m") == 120.0
    assert config.parse_duration("none") is None
    with pytest.raises(ValueError):
        config.parse_duration("soon")


def test_shipped_config_files_match_presets():
    from pathlib import Path
    root = Path(__file__).resolve().parents[1] / "configs"
    for name in config.PRESETS:
        assert config.load_config(root / f"{name}.ini") == config.load_config(name)
