import csv
import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from lievortex import cli, config


def _write(tmp_path, doc, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc))
    return str(p)


def _header(path):
    with open(path, newline="") as fh:
        return next(csv.reader(fh))


def _fixture(name):
    return yaml.safe_load(config.read_text(f"fixture:{name}"))


FAST_FIXTURES = [n for n in config.fixture_names() if n not in ("so4_steer_smoke",)]


@pytest.mark.parametrize("name", FAST_FIXTURES)
def test_fixture_runs_clean(name, tmp_path):
    cmd = _fixture(name)["command"]
    out = tmp_path / name
    assert cli.main([cmd, "--config", f"fixture:{name}", "--out", str(out), "--quiet"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == cmd
    assert manifest["version"] == cli.__version__
    assert manifest["config"]["command"] == cmd


@pytest.mark.slow
def test_so4_steer_smoke_fixture(tmp_path):
    assert cli.main(["steer", "--config", "fixture:so4_steer_smoke", "--out", str(tmp_path), "--quiet"]) == 0
    assert json.loads((tmp_path / "result.json").read_text())["residual"] <= 5e-2


def test_free_top_momentum_drift(tmp_path):
    assert cli.main(["simulate", "--config", "fixture:so3_free_top", "--out", str(tmp_path), "--quiet"]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["max_drift"]["momentum"] <= 1e-8
    assert summary["t_end"] == pytest.approx(10.0)


def test_vortex_fixture_report(tmp_path):
    assert cli.main(["vortex", "--config", "fixture:so4_vortex", "--out", str(tmp_path), "--quiet"]) == 0
    rep = json.loads((tmp_path / "vortex.json").read_text())
    assert rep["dimension"] == 2
    assert rep["abelian"] is True


def test_trajectory_header_schema(tmp_path):
    cli.main(["simulate", "--config", "fixture:so4_manakov", "--out", str(tmp_path), "--quiet"])
    expected = (["t"] + [f"g{i}{j}" for i in range(1, 5) for j in range(1, 5)]
                + ["m12", "m13", "m14", "m23", "m24", "m34"]
                + ["drift_orthogonality", "drift_momentum", "drift_energy"])
    assert _header(tmp_path / "trajectory.csv") == expected
    rows = np.loadtxt(tmp_path / "trajectory.csv", delimiter=",", skiprows=1)
    assert rows.shape[1] == len(expected)
    assert rows[0, 0] == 0.0 and rows[-1, 0] == pytest.approx(10.0)


def test_stiefel_header_schema(tmp_path):
    cli.main(["stiefel", "--config", "fixture:so4_stiefel", "--out", str(tmp_path), "--quiet"])
    expected = (["t"] + [f"x{l}_{j}" for l in (1, 2) for j in range(1, 5)]
                + [f"y{l}_{j}" for l in (1, 2) for j in range(1, 5)]
                + ["drift_gram", "spectrum1", "spectrum2", "spectrum3", "spectrum4",
                   "drift_spectrum", "group_mismatch"])
    assert _header(tmp_path / "stiefel.csv") == expected


def test_chaplygin_header_schema(tmp_path):
    cli.main(["chaplygin", "--config", "fixture:chaplygin_ball", "--out", str(tmp_path), "--quiet"])
    assert _header(tmp_path / "chaplygin.csv") == [
        "t", "M1", "M2", "M3", "gamma1", "gamma2", "gamma3", "drift_norm_M", "drift_M_dot_gamma"]


def test_floats_round_trip(tmp_path):
    cli.main(["simulate", "--config", "fixture:so3_free_top", "--out", str(tmp_path), "--quiet"])
    with open(tmp_path / "trajectory.csv") as fh:
        next(fh)
        for field in next(fh).strip().split(","):
            assert repr(float(field)) == field


@pytest.mark.parametrize("cmd,name", [("simulate", "so4_manakov"), ("steer", "so3_two_control_steer"),
                                      ("rank-check", "so3_single_control_rank")])
def test_outputs_byte_identical_on_rerun(cmd, name, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli.main([cmd, "--config", f"fixture:{name}", "--out", str(out), "--quiet"]) == 0
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    for f in files:
        if f == "manifest.json":
            continue
        assert (a / f).read_bytes() == (b / f).read_bytes(), f


def test_steer_signal_replays_through_simulate(tmp_path):
    steer_out = tmp_path / "steer"
    assert cli.main(["steer", "--config", "fixture:so3_two_control_steer", "--out", str(steer_out),
                     "--quiet"]) == 0
    result = json.loads((steer_out / "result.json").read_text())
    assert result["residual"] <= 1e-2
    sig = json.loads((steer_out / "signal.json").read_text())

    doc = _fixture("so3_two_control_steer")
    doc["command"] = "simulate"
    del doc["steering"]
    doc["controls"]["signal_file"] = str(steer_out / "signal.json")
    sim_out = tmp_path / "sim"
    assert cli.main(["simulate", "--config", _write(tmp_path, doc), "--out", str(sim_out), "--quiet"]) == 0
    summary = json.loads((sim_out / "summary.json").read_text())
    assert np.abs(np.array(summary["endpoint"]) - np.array(sig["endpoint"])).max() <= 1e-10
    traj = np.loadtxt(sim_out / "trajectory.csv", delimiter=",", skiprows=1)
    assert np.abs(traj[-1, 1:10].reshape(3, 3) - np.array(sig["endpoint"])).max() <= 1e-10


def test_replay_rejects_mismatched_grid(tmp_path):
    steer_out = tmp_path / "steer"
    cli.main(["steer", "--config", "fixture:so3_two_control_steer", "--out", str(steer_out), "--quiet"])
    doc = _fixture("so3_two_control_steer")
    doc["command"] = "simulate"
    del doc["steering"]
    doc["controls"]["signal_file"] = str(steer_out / "signal.json")
    doc["controls"]["steps_per_segment"] = 10
    assert cli.main(["simulate", "--config", _write(tmp_path, doc), "--out", str(tmp_path / "s"),
                     "--quiet"]) == 2


@pytest.mark.parametrize("mutate,field", [
    (lambda d: d.pop("operator"), "operator"),
    (lambda d: d.__setitem__("n", 1), "n"),
    (lambda d: d["momentum"].__setitem__("coords", [1.0, 2.0]), "momentum.coords"),
    (lambda d: d["operator"].__setitem__("kind", "cubic"), "operator.kind"),
    (lambda d: d["integration"].__setitem__("h", -1.0), "integration"),
    (lambda d: d.__setitem__("initial", {"matrix": [[1, 0, 0], [0, 1, 0], [0, 0, 2]]}), "initial.matrix"),
])
def test_config_errors_exit_2_and_name_field(mutate, field, tmp_path, capsys):
    doc = _fixture("so3_free_top")
    mutate(doc)
    code = cli.main(["simulate", "--config", _write(tmp_path, doc), "--out", str(tmp_path / "o"), "--quiet"])
    assert code == 2
    assert field in capsys.readouterr().err


def test_missing_config_and_unknown_fixture(tmp_path, capsys):
    assert cli.main(["simulate", "--config", str(tmp_path / "nope.yaml"), "--quiet"]) == 2
    assert cli.main(["simulate", "--config", "fixture:nope", "--quiet"]) == 2
    assert "unknown fixture" in capsys.readouterr().err


def test_command_mismatch_is_config_error(tmp_path):
    assert cli.main(["vortex", "--config", "fixture:so3_free_top", "--out", str(tmp_path), "--quiet"]) == 2


def test_random_draw_needs_seed(tmp_path, capsys):
    doc = _fixture("so4_manakov")
    doc["momentum"] = {"random": {}}
    doc["integration"]["T"] = 0.1
    path = _write(tmp_path, doc)
    assert cli.main(["simulate", "--config", path, "--out", str(tmp_path / "o"), "--quiet"]) == 2
    assert "momentum.random.seed" in capsys.readouterr().err


def test_seed_override(tmp_path):
    doc = _fixture("so4_manakov")
    doc["momentum"] = {"random": {}}
    doc["integration"]["T"] = 0.1
    path = _write(tmp_path, doc)
    outs = {}
    for seed in (1, 1, 2):
        out = tmp_path / f"o{seed}_{len(outs)}"
        assert cli.main(["simulate", "--config", path, "--out", str(out), "--seed", str(seed), "--quiet"]) == 0
        assert json.loads((out / "manifest.json").read_text())["config"]["seed"] == seed
        outs[len(outs)] = (out / "trajectory.csv").read_bytes()
    assert outs[0] == outs[1]
    assert outs[0] != outs[2]


def test_unreachable_steer_exits_3(tmp_path, capsys):
    doc = _fixture("so3_two_control_steer")
    doc["controls"]["eps"] = 1e-3
    doc["steering"].update(starts=2, max_iter=10)
    code = cli.main(["steer", "--config", _write(tmp_path, doc), "--out", str(tmp_path / "o"), "--quiet"])
    assert code == 3
    err = capsys.readouterr().err
    assert "control.steer" in err
    result = json.loads((tmp_path / "o" / "result.json").read_text())
    assert result["reached"] is False and result["residual"] > 1e-2
    sig = json.loads((tmp_path / "o" / "signal.json").read_text())
    assert np.abs(sig["values"]).max() <= 1e-3 * (1 + 1e-12)


def test_drift_budget_violation_exits_3(tmp_path):
    doc = _fixture("so3_free_top")
    doc["integration"].update(h=0.5, drift_budget=1e-14)
    code = cli.main(["simulate", "--config", _write(tmp_path, doc), "--out", str(tmp_path / "o"), "--quiet"])
    assert code == 3
    assert json.loads((tmp_path / "o" / "summary.json").read_text())["error"]


def test_blown_up_run_keeps_finite_prefix(tmp_path, capsys):
    doc = _fixture("so3_free_top")
    doc["momentum"]["coords"] = [15.0, -35.0, 25.0]
    doc["operator"] = {"kind": "manakov", "U": [1.0, 5.0, 30.0]}
    doc["integration"].update(T=50.0, h=2.0, sample_every=1, drift_budget=1e300)
    code = cli.main(["simulate", "--config", _write(tmp_path, doc), "--out", str(tmp_path / "o"), "--quiet"])
    assert code == 3
    assert "reduction.integrate" in capsys.readouterr().err
    rows = np.loadtxt(tmp_path / "o" / "trajectory.csv", delimiter=",", skiprows=1, ndmin=2)
    assert np.isfinite(rows).all()
    assert len(rows) >= 2


def test_fixtures_listing(capsys):
    assert cli.main(["fixtures"]) == 0
    listed = capsys.readouterr().out.split()
    for name in ("so3_free_top", "so4_manakov", "so4_vortex", "chaplygin_ball", "so3_two_control_steer",
                 "planar_cosine_rank", "planar_nonanalytic_rank"):
        assert name in listed


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "lievortex.cli", "rank-check", "--config",
                           "fixture:so4_two_generator", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "rank-check: wrote" in proc.stdout
    assert (tmp_path / "rank.json").exists()
