import json

import numpy as np
import pytest

from logdecay_lab import cli
from logdecay_lab.config import load_config, parse_config
from logdecay_lab.errors import ArtifactNotFoundError, ConfigurationError
from logdecay_lab.report import (
    RunReport,
    atomic_write,
    content_hash,
    dumps_json,
    emit_plotdata,
    read_csv,
    render_svg,
    write_csv,
)

SPECTRUM_1D = """
task = "spectrum"
[domain]
dim = 1
nx = 60
damped_side = "right"
[damping]
kind = "constant"
value = 0.5
"""

WEIGHT_TOP = """
task = "carleman"
[domain]
dim = 2
nx = 7
ny = 7
damped_side = "right"
[carleman]
action = "verify-weight"
direction = [0.0, 1.0]
"""


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


# ---------------------------------------------------------------- config

def test_config_rejects_dim_three():
    with pytest.raises(ConfigurationError, match="domain.dim"):
        parse_config({"task": "spectrum", "domain": {"dim": 3}})


def test_config_rejects_unknown_key():
    with pytest.raises(ConfigurationError, match="domain.nz"):
        parse_config({"task": "spectrum", "domain": {"dim": 2, "nz": 4}})
    with pytest.raises(ConfigurationError, match="spectrum.tol"):
        parse_config({"task": "spectrum", "domain": {"dim": 1, "nx": 9}, "spectrum": {"tol": 1.0}})


def test_config_wrong_type_names_key():
    with pytest.raises(ConfigurationError, match="evolve.dt"):
        parse_config({"task": "evolve", "domain": {"dim": 1, "nx": 9}, "evolve": {"dt": "small"}})
    with pytest.raises(ConfigurationError, match="evolve.equilibrium"):
        parse_config({"task": "evolve", "domain": {"dim": 1, "nx": 9}, "evolve": {"equilibrium": "median"}})


def test_config_cli_overrides(tmp_path):
    path = write(tmp_path, SPECTRUM_1D.replace('task = "spectrum"\n', ""))
    cfg = load_config(path, task="evolve", seed=7, out=str(tmp_path / "o"))
    assert cfg.task == "evolve" and cfg.seed == 7
    assert cfg.params["dt"] == 0.05
    with pytest.raises(ConfigurationError, match="'task'"):
        load_config(write(tmp_path, SPECTRUM_1D, "s.toml"), task="evolve")
    assert str(cfg.output_dir) == str(tmp_path / "o")


def test_config_echo_is_complete(tmp_path):
    echo = load_config(write(tmp_path, SPECTRUM_1D)).echo()
    assert echo["spectrum"] == {"zero_radius": 1e-6, "dense_limit": 4000}
    assert echo["domain"]["nx"] == 60


# ---------------------------------------------------------------- report primitives

def test_json_round_trips_doubles():
    x = [0.1, 1 / 3, np.pi * 1e-300, -2.5e17]
    assert json.loads(dumps_json({"x": x}))["x"] == x
    out = json.loads(dumps_json({"a": float("nan"), "b": np.inf, "c": 1 + 2j, "d": np.float64(0.5)}))
    assert out == {"a": None, "b": None, "c": {"re": 1.0, "im": 2.0}, "d": 0.5}


def test_atomic_write_replaces_and_leaves_no_temp(tmp_path):
    p = tmp_path / "a" / "f.txt"
    atomic_write(p, "one")
    atomic_write(p, b"two")
    assert p.read_text() == "two"
    assert [q.name for q in p.parent.iterdir()] == ["f.txt"]


def test_csv_round_trip(tmp_path):
    write_csv(tmp_path / "t.csv", ["a", "b"], [(0.1, "x"), (2.0, "y")])
    rows = read_csv(tmp_path / "t.csv")
    assert rows[0] == {"a": "0.10000000000000001", "b": "x"}
    with pytest.raises(ArtifactNotFoundError):
        read_csv(tmp_path / "missing.csv")


def test_content_hash_is_git_blob_hash():
    import hashlib

    data = dumps_json({"k": 1}).encode()
    assert content_hash({"k": 1}) == hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()
    assert content_hash({"k": 1}) != content_hash({"k": 2})


def test_svg_deterministic_and_degenerate_cases():
    x = np.linspace(0, 1, 20)
    assert render_svg(x, x**2) == render_svg(x.copy(), x**2)
    one = render_svg([1.0], [2.0])
    assert "<circle" in one and "<polyline" not in one
    flat = render_svg(x, np.zeros_like(x))
    assert "<polyline" in flat and "nan" not in flat


def test_emit_plotdata_missing_artifact(tmp_path):
    rep = RunReport("evolve", {}, "0", {}, {}, tmp_path)
    with pytest.raises(ArtifactNotFoundError):
        emit_plotdata(rep, "decay-curve")
    rep.artifacts["evolve_csv"] = "evolve.csv"
    with pytest.raises(ArtifactNotFoundError):
        emit_plotdata(rep, "decay-curve")
    with pytest.raises(ValueError):
        emit_plotdata(rep, "histogram")


# ---------------------------------------------------------------- runs

def test_spectrum_run_1d(tmp_path):
    rep = cli.run(write(tmp_path, SPECTRUM_1D), out=tmp_path / "out")
    assert rep.passed and rep.checks == {"converged": True, "band": True}
    assert rep.summary["C_band"] > 0 and rep.summary["margin"] >= 0
    saved = json.loads((tmp_path / "out" / "report.json").read_text())
    assert saved["passed"] and "wall_time" not in saved
    assert saved["input_hash"] == rep.input_hash
    assert (tmp_path / "out" / saved["artifacts"]["spectrum_scatter_svg"]).is_file()
    rows = read_csv(tmp_path / "out" / "spectrum.csv")
    assert len(rows) == 2 * 60 and max(float(r["residual"]) for r in rows) <= 1e-10
    # low modes sit near the continuum line Re = -atanh(0.5)
    re = np.array([float(r["re"]) for r in rows])
    im = np.array([float(r["im"]) for r in rows])
    low = (np.abs(im) > 1e-8) & (np.abs(im) < 20)
    np.testing.assert_allclose(re[low], -np.arctanh(0.5), rtol=0.02)


def test_zero_solution_decay_curve(tmp_path):
    text = SPECTRUM_1D.replace('task = "spectrum"', 'task = "evolve"') + '[evolve]\nT = 2.0\ninitial = "zero"\n'
    rep = cli.run(write(tmp_path, text), out=tmp_path / "out")
    assert rep.summary["C_dec"] is None and rep.passed
    svg = rep.artifact_path("decay_curve_svg").read_text()
    assert "<polyline" in svg


def test_single_point_resolvent_curve(tmp_path):
    text = SPECTRUM_1D.replace('task = "spectrum"', 'task = "resolvent"') + "[resolvent]\nsteps = 1\n"
    rep = cli.run(write(tmp_path, text), out=tmp_path / "out")
    assert rep.summary["n_samples"] == 1
    svg = rep.artifact_path("resolvent_curve_svg").read_text()
    assert svg.count("<circle") == 1


def test_export_matrices(tmp_path):
    rep = cli.run(write(tmp_path, SPECTRUM_1D), out=tmp_path / "out", export_matrices=True)
    lines = rep.artifact_path("A_h_triplets").read_text().splitlines()
    rows, cols, nnz = map(int, lines[0].split())
    assert rows == cols == 120 and nnz == len(lines) - 1
    i, j, v = lines[1].split()
    assert int(i) >= 0 and float(v) == float(v)


def test_exit_codes(tmp_path, capsys):
    good = write(tmp_path, SPECTRUM_1D)
    assert cli.main(["spectrum", "--config", str(good), "--out", str(tmp_path / "a")]) == 0
    bad = write(tmp_path, SPECTRUM_1D.replace("dim = 1", "dim = 3"), "bad.toml")
    assert cli.main(["spectrum", "--config", str(bad), "--out", str(tmp_path / "b")]) == 1
    assert "domain.dim" in capsys.readouterr().err
    top = write(tmp_path, WEIGHT_TOP, "top.toml")
    assert cli.main(["carleman", "verify-weight", "--config", str(top), "--out", str(tmp_path / "c")]) == 2
    saved = json.loads((tmp_path / "c" / "report.json").read_text())
    assert saved["summary"]["weight"]["condition"] == "conormal"
    assert cli.main(["spectrum", "profile", "--config", str(good)]) == 1
    with pytest.raises(SystemExit) as info:
        cli.main(["nonsense", "--config", str(good)])
    assert info.value.code == 1


def test_carleman_profile_action(tmp_path):
    text = WEIGHT_TOP.replace("[0.0, 1.0]", "[1.0, 0.0]").replace('"verify-weight"', '"profile"')
    rep = cli.run(write(tmp_path, text), out=tmp_path / "out")
    rows = rep.summary["profiles"]
    assert rep.passed and rep.summary["reading"] == "min" and len(rows) == 21
    assert all(r["b0"] > 1 for r in rows)
