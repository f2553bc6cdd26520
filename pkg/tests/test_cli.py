import json
from pathlib import Path

import pytest

from thintube.cli import main
from thintube.config import load_config
from thintube.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
ANNULUS = str(CONFIGS / "bent_annulus.json")
SMALL = ["--override", "eps=[0.2,0.1,0.05]", "--override", "resolution.levels=2"]


def test_validate_config_ok(capsys):
    for path in sorted(CONFIGS.glob("*.json")):
        assert main(["validate-config", "--config", str(path)]) == 0
    assert capsys.readouterr().out.startswith("ok ")


def test_malformed_eps_points_at_field(capsys):
    assert main(["validate-config", "--config", ANNULUS, "--override", "eps=[0.1,0.2]"]) == 2
    assert "eps[1]" in capsys.readouterr().err
    assert main(["validate-config", "--config", ANNULUS, "--override", "eps=[0.1,-0.2]"]) == 2
    assert main(["validate-config", "--config", ANNULUS, "--override", "resolution.levels=0"]) == 2
    assert main(["validate-config", "--config", "/nonexistent.json"]) == 2


def test_config_errors_name_the_field(tmp_path):
    raw = json.loads(Path(ANNULUS).read_text())
    raw["family"] = {"interval": {"ell": {"fourier": "x"}}}
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(raw))
    with pytest.raises(ConfigError, match="family"):
        load_config(p)
    raw["schema_version"] = 2
    p.write_text(json.dumps(raw))
    with pytest.raises(ConfigError, match="schema_version"):
        load_config(p)


def test_compare_smoke(tmp_path):
    assert main(["compare", "--config", ANNULUS, "--out", str(tmp_path), *SMALL]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["provenance"]["config_hash"] == load_config(ANNULUS, ["eps=[0.2,0.1,0.05]", "resolution.levels=2"]).config_hash
    lines = (tmp_path / "eigenvalues.csv").read_text().splitlines()
    assert lines[0].split(",")[:3] == ["eps", "order", "index"]
    assert len(lines) > 1


def test_size_cap_without_force_large(tmp_path):
    twist = str(CONFIGS / "twisted_rectangle.json")
    assert main(["tube-spectrum", "--config", twist, "--out", str(tmp_path), "--override", "resolution.Nq=2000"]) == 2


def test_guard_failures_exit_4(tmp_path):
    assert main(["spacing", "--config", ANNULUS, "--out", str(tmp_path), "--override", "spacing.min_levels=100000"]) == 4
    assert main(["dynamics", "--config", ANNULUS, "--out", str(tmp_path), *SMALL,
                 "--override", "dynamics.leak_tol=1e-30"]) == 4


@pytest.mark.parametrize("command,csv", [("effective-spectrum", "eigenvalues.csv"), ("bands", "bands.csv"),
                                         ("tube-spectrum", "eigenvalues.csv")])
def test_outputs_are_deterministic(tmp_path, command, csv):
    outs = []
    for i in range(2):
        out = tmp_path / str(i)
        threads = ["--threads", "2"] if i else []
        assert main([command, "--config", ANNULUS, "--out", str(out), *SMALL, *threads]) == 0
        outs.append((out / csv).read_bytes())
    assert outs[0] == outs[1]


def test_spacing_and_dynamics_write_csv(tmp_path):
    assert main(["spacing", "--config", str(CONFIGS / "varying_interval.json"), "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "spacings.csv").read_text().startswith("eps,index,eigenvalue,spacing")
    assert main(["dynamics", "--config", ANNULUS, "--out", str(tmp_path / "d"), *SMALL,
                 "--override", "dynamics.n_times=5"]) == 0
    assert (tmp_path / "d" / "dynamics.csv").read_text().startswith("eps,t,err,projected_err")
