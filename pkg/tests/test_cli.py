"""CLI surface tests, in-process via main(argv).

All pipeline invocations stay tiny (80x60, short durations) so the whole
file runs in a few seconds.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from teleopsim.cli import main

SMALL = [
    "--width", "80", "--height", "60",
    "--render-hz", "50", "--cloud-hz", "5",
    "--command-interval", "0.3", "--transport-delay", "0.05",
    "--seed", "3",
]


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "run" in capsys.readouterr().out


def test_unknown_flag_exits_two(capsys):
    assert main(["run", "--no-such-flag"]) == 2


def test_unknown_subcommand_exits_two():
    assert main(["frobnicate"]) == 2


def test_run_prints_summary(capsys, tmp_path):
    out = tmp_path / "m.csv"
    rc = main(["run", *SMALL, "--duration", "1.2", "--metrics-out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert text.startswith("decoupled:")
    assert "median pose_age" in text
    header = out.read_text().splitlines()[0]
    assert header == "display_time,pose_age,scene_age,coverage,mode"


def test_run_jsonl_output(tmp_path):
    out = tmp_path / "m.jsonl"
    assert main(["run", *SMALL, "--duration", "0.6", "--metrics-out", str(out)]) == 0
    rows = [json.loads(l) for l in out.read_text().splitlines()]
    assert rows and all(r["mode"] == "decoupled" for r in rows)


def test_run_direct_mode(capsys):
    assert main(["run", *SMALL, "--mode", "direct", "--duration", "1.2"]) == 0
    assert capsys.readouterr().out.startswith("direct:")


def test_bad_scene_exits_one(capsys):
    assert main(["run", *SMALL, "--scene", "no-such-scene"]) == 1
    assert "neither a preset nor an existing file" in capsys.readouterr().err


def test_compare_report(tmp_path, capsys):
    out_dir = tmp_path / "cmp"
    rc = main(["compare", *SMALL, "--duration", "1.2", "--out-dir", str(out_dir)])
    assert rc == 0
    report = json.loads((out_dir / "report.json").read_text())
    assert (out_dir / "decoupled.csv").exists() and (out_dir / "direct.csv").exists()
    # the architecture's whole point, visible even at this tiny scale
    assert report["decoupled"]["median_pose_age"] < report["direct"]["median_pose_age"]
    assert report["config"]["width"] == 80


def test_record_then_replay(tmp_path, capsys):
    ep_dir = tmp_path / "ep"
    assert main(["record", *SMALL, "--duration", "1.0", "--out", str(ep_dir)]) == 0
    assert (ep_dir / "meta.json").exists()
    capsys.readouterr()
    assert main(["replay", "--episode", str(ep_dir), "--chunk-horizon", "4", "--chunk-exec", "2"]) == 0
    out = capsys.readouterr().out
    assert "replayed 10 steps" in out
    assert "deviation 0.000e+00" in out  # replay retraces the recording exactly


def test_record_requires_virtual_clock(tmp_path, capsys):
    rc = main(["record", *SMALL, "--clock", "realtime", "--out", str(tmp_path / "x")])
    assert rc == 1
    assert "requires --clock virtual" in capsys.readouterr().err


def test_replay_missing_episode_exits_one(tmp_path, capsys):
    assert main(["replay", "--episode", str(tmp_path / "missing")]) == 1
    assert "error" in capsys.readouterr().err


def test_bench_json(capsys):
    assert main(["bench", "--sizes", "1000,5000", "--reps", "3", "--json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert [r["points"] for r in rows] == [1000, 5000]
    for r in rows:
        assert r["reps"] == 3
        assert 0.0 < r["median_ms"] <= r["p95_ms"]


def test_bench_bad_sizes_exits_one(capsys):
    assert main(["bench", "--sizes", "abc"]) == 1
    assert "error" in capsys.readouterr().err


def test_config_file_defaults_and_override(tmp_path, capsys):
    cfg = tmp_path / "defaults.yaml"
    cfg.write_text("render-hz: 50.0\nwidth: 80\nheight: 60\ncloud_hz: 5\nseed: 3\n")
    out_dir = tmp_path / "cmp"
    rc = main([
        "--config", str(cfg), "compare", "--duration", "0.6",
        "--width", "100",  # explicit flag wins over the file
        "--out-dir", str(out_dir),
    ])
    assert rc == 0
    report = json.loads((out_dir / "report.json").read_text())
    assert report["config"]["width"] == 100
    assert report["config"]["render_hz"] == 50.0
    assert report["config"]["cloud_hz"] == 5.0


def test_config_file_must_be_mapping(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("- just\n- a\n- list\n")
    assert main(["--config", str(cfg), "run", *SMALL, "--duration", "0.2"]) == 1
    assert "must be a YAML mapping" in capsys.readouterr().err


def test_run_twice_same_seed_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["run", *SMALL, "--duration", "1.2", "--metrics-out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "teleopsim.cli", "--help"], capture_output=True, text=True
    )
    assert res.returncode == 0
    assert "teleopsim" in res.stdout
