from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from reslab.cli import dumps17, main
from reslab.plots import plot_csv


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)


@pytest.fixture(scope="module")
def certified(tmp_path_factory):
    out = tmp_path_factory.mktemp("beam")
    assert invoke("lambda", "build", "--kind", "beam", "--n", 2, "--seed", 1, "--out", out).exit_code == 0
    assert invoke("certify", "--out", out).exit_code == 0
    return out


def test_build_is_byte_identical(tmp_path):
    for d in ("a", "b"):
        r = invoke("lambda", "build", "--kind", "wave", "--n", 2, "--seed", 3, "--out", tmp_path / d)
        assert r.exit_code == 0
    for f in ("lambda.json", "validation_report.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_validate_duplicate_mode_exits_2(tmp_path):
    invoke("lambda", "build", "--kind", "beam", "--n", 2, "--seed", 1, "--out", tmp_path)
    data = json.loads((tmp_path / "lambda.json").read_text())
    data["tuples"][1][0] = data["tuples"][0][0]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    r = invoke("lambda", "validate", bad, "--out", tmp_path / "v")
    assert r.exit_code == 2
    rep = json.loads((tmp_path / "v" / "validation_report.json").read_text())
    assert rep["ok"] is False
    assert invoke("lambda", "validate", tmp_path / "lambda.json", "--out", tmp_path / "v").exit_code == 0


def test_malformed_lambda_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind": "beam", "tuples": [[[1.5, 0], [1, 2], [3, 2], [3, 0]]]}')
    assert invoke("lambda", "validate", bad, "--out", tmp_path).exit_code == 2


def test_integrable_hartree_fails_certificate(tmp_path):
    invoke("lambda", "build", "--kind", "hartree", "--n", 2, "--seed", 1, "--out", tmp_path)
    r = invoke("certify", "--integrable", "--out", tmp_path)
    assert r.exit_code == 3
    cert = json.loads((tmp_path / "transversality_certificate.json").read_text())
    assert cert["ok"] is False and cert["failures"]


def test_unknown_config_key_rejected(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('kind = "beam"\ncolour = "red"\n')
    r = CliRunner().invoke(main, ["lambda", "build", "--config", str(cfg), "--out", str(tmp_path)])
    assert r.exit_code == 2
    assert "colour" in r.output


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('kind = "hartree"\nn = 3\nseed = 2\n')
    assert invoke("lambda", "build", "--config", cfg, "--kind", "beam", "--n", 2, "--out", tmp_path).exit_code == 0
    data = json.loads((tmp_path / "lambda.json").read_text())
    assert data["kind"] == "beam" and len(data["tuples"]) == 2


def test_invalid_range_rejected(tmp_path):
    r = CliRunner().invoke(main, ["lambda", "build", "--eps", "0.9", "--out", str(tmp_path)])
    assert r.exit_code == 2


def test_json_floats_seventeen_digits():
    s = dumps17({"x": 0.1, "y": [1.0 / 3.0, float("nan")], "n": 3})
    data = json.loads(s)
    assert "0.10000000000000001" in s
    assert data["y"][0] == 1.0 / 3.0 and data["y"][1] is None and data["n"] == 3


def test_dynamics_requires_certificate(tmp_path):
    r = CliRunner().invoke(main, ["run", "toy", "--out", str(tmp_path)])
    assert r.exit_code != 0


def test_toy_run_and_plot_regeneration(certified):
    r = invoke("run", "toy", "--t-max", 20, "--out", certified)
    assert r.exit_code == 0
    rep = json.loads((certified / "toy_report.json").read_text())
    assert rep["ok"]
    svg = (certified / "toy_K.svg").read_text()
    again = certified / "again.svg"
    plot_csv(certified / "toy.csv", again, "t", ["K_*"], title="actions K_j(t)", ylabel="K")
    assert again.read_text() == svg


def test_certificate_contents(certified):
    cert = json.loads((certified / "transversality_certificate.json").read_text())
    assert cert["ok"] is True
    assert cert["nondegeneracy"]["d12_nonzero"]
    names = set(cert["critical_points"])
    assert "delta_homoclinic" in names
    assert (certified / "melnikov.csv").exists() and (certified / "melnikov.svg").exists()
