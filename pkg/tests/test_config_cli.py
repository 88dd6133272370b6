import json
from dataclasses import replace
from pathlib import Path

import pytest

from steklov_lab import cli
from steklov_lab.config import ConfigError, RunConfig, config_from_dict, domain_from_dict, load_config
from steklov_lab.geometry import GeometryError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_shipped_configs_parse():
    for p in CONFIGS.glob("*.toml"):
        cfg = load_config(p)
        assert len(cfg.hash) == 16
        assert cfg.domain.n_components >= 1


def test_domain_from_dict_variants():
    d = domain_from_dict({"preset": "annulus", "eps": 0.3, "weight": {"preset": "cosine-bump", "amplitude": 0.2}})
    assert d.inners[0].radius == 0.3 and d.weight.components[1].cos == (0.2,)
    d = domain_from_dict({"outer": {"center": [0, 0], "radius": 1},
                          "inners": [{"center": [0.3, 0], "radius": 0.1}],
                          "weights": [{"mean": 1.0, "cos": [0.1]}, {"mean": 2.0}]})
    assert d.weight.components[1].mean == 2.0
    with pytest.raises(ConfigError):
        domain_from_dict({"preset": "annulus"})
    with pytest.raises(ConfigError):
        domain_from_dict({"preset": "torus"})
    with pytest.raises(ConfigError):
        domain_from_dict({"outer": {"center": [0, 0]}})
    with pytest.raises(GeometryError):
        domain_from_dict({"outer": {"center": [0, 0], "radius": 1}, "weights": [{}, {}]})


def test_run_config_validation():
    with pytest.raises(ConfigError):
        RunConfig({"preset": "disk"}, m_max=100)
    with pytest.raises(ConfigError):
        RunConfig({"preset": "disk"}, m_max=8192)
    with pytest.raises(ConfigError):
        RunConfig({"preset": "disk"}, delta=-1.0)
    with pytest.raises(ConfigError):
        config_from_dict({"solver": {}})


def test_config_hash_tracks_content():
    a = config_from_dict({"domain": {"preset": "disk"}}, "a.toml")
    b = config_from_dict({"domain": {"preset": "disk"}}, "b.toml")
    assert a.hash == b.hash
    assert replace(a, m_max=256).hash != a.hash


def test_malformed_toml(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[domain\npreset = 'disk'\n")
    with pytest.raises(ConfigError):
        load_config(p)
    assert cli.main(["spectrum", "--config", str(p), "--out", str(tmp_path)]) == cli.EXIT_DOMAIN


def test_overlapping_domain_exit_code(tmp_path, capsys):
    code = cli.main(["spectrum", "--config", str(CONFIGS / "overlapping.toml"), "--out", str(tmp_path)])
    assert code == cli.EXIT_DOMAIN
    assert "OverlapError" in capsys.readouterr().err


def test_spectrum_outputs(tmp_path):
    assert cli.main(["spectrum", "--config", str(CONFIGS / "disk.toml"), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "spectrum.csv").read_text().splitlines()
    assert lines[0].startswith("# ") and "domain_hash=" in lines[0] and "config_hash=" in lines[0]
    assert lines[1] == "n;lambda;mu;gap;residual;multiplicity_tag"
    lam = [float(r.split(";")[1]) for r in lines[2:7]]
    assert lam == pytest.approx([0, 1, 1, 2, 2], abs=1e-10)
    doc = json.loads((tmp_path / "spectrum.json").read_text())
    assert doc["schema_version"] >= 1


def test_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert cli.main(["nodal", "--config", str(CONFIGS / "disk.toml"), "--out", str(d), "--n", "5"]) == 0
    for name in ("nodal.csv", "nodal_0005.json", "nodal_0005.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_quasimode_and_decay_outputs(tmp_path):
    cfg = str(CONFIGS / "disk.toml")
    assert cli.main(["quasimode", "--config", cfg, "--out", str(tmp_path), "--m-max", "64"]) == 0
    assert cli.main(["decay", "--config", cfg, "--out", str(tmp_path), "--n", "7", "--m-max", "64"]) == 0
    for name in ("defects.csv", "decomposition.csv", "clusters.csv", "quasimode.json", "decay.csv", "decay.json"):
        assert (tmp_path / name).exists(), name
    doc = json.loads((tmp_path / "decay.json").read_text())
    assert doc["profiles"]["7"]["decaying"]


def test_bad_index(tmp_path):
    code = cli.main(["nodal", "--config", str(CONFIGS / "disk.toml"), "--out", str(tmp_path), "--n", "999"])
    assert code == cli.EXIT_DOMAIN


def test_oracle_command(tmp_path):
    assert cli.main(["oracle", "--eps", "0.5", "--k-max", "6", "--m-max", "64", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "oracle.json").read_text())
    assert doc["passed"] and doc["max_rel_error"] < 1e-10
    # an impossible tolerance reports an oracle failure
    code = cli.main(["oracle", "--eps", "0.5", "--k-max", "6", "--m-max", "64", "--tol", "1e-300",
                     "--out", str(tmp_path)])
    assert code == cli.EXIT_ORACLE
    assert cli.main(["oracle", "--eps", "1.5", "--out", str(tmp_path)]) == cli.EXIT_DOMAIN


def test_spurious_exit_code(tmp_path, monkeypatch):
    real = cli._solve

    def flagged(cfg, M=None):
        sp = real(cfg, M)
        sp.flagged = [3]
        return sp

    monkeypatch.setattr(cli, "_solve", flagged)
    code = cli.main(["spectrum", "--config", str(CONFIGS / "disk.toml"), "--out", str(tmp_path)])
    assert code == cli.EXIT_SPURIOUS


def test_report_runs(tmp_path):
    code = cli.main(["report", "--config", str(CONFIGS / "disk.toml"), "--out", str(tmp_path), "--m-max", "32",
                     "--n", "4"])
    assert code == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert "spectrum.csv" in doc["files"]
    assert doc["strategy_check"]["max_abs_diff"] < 1e-10
