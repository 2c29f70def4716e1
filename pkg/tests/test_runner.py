import copy
import csv
import json

import numpy as np
import pytest
import yaml

from uqprop.runner.cli import main
from uqprop.runner.config import (
    ConfigError,
    bundled_scenarios,
    config_hash,
    dump_config,
    load_config,
    read_config,
    validate,
)
from uqprop.runner.pipeline import run_scenario
from uqprop.runner.units import UnitError, parse_quantity

EXPECTED = {
    "duffing_oracle",
    "ou_linear",
    "kepler_desk",
    "kepler_full",
    "heo_mf_deterministic",
    "kepler_mf_stochastic",
    "lowthrust_bifidelity",
}


def _ou(**method):
    cfg = copy.deepcopy(read_config("ou_linear"))
    cfg["time"]["tf"] = "0.1 s"
    cfg["method"].update(method)
    return cfg


# -- configuration ----------------------------------------------------------------


def test_every_bundled_scenario_validates():
    assert set(bundled_scenarios()) == EXPECTED
    for name in EXPECTED:
        raw, sc = load_config(name)
        assert sc.name == name


def test_round_trip_preserves_hash():
    raw = read_config("kepler_desk")
    again = yaml.safe_load(dump_config(raw))
    assert again == raw
    assert config_hash(again) == config_hash(raw)
    changed = copy.deepcopy(raw)
    changed["seed"] = raw.get("seed", 0) + 1
    assert config_hash(changed) != config_hash(raw)


@pytest.mark.parametrize(
    "value, dim, expected",
    [("2 s", "time", 2.0), ("1 day", "time", 86400.0), ("180 deg", "angle", np.pi), ("1 m/s", "speed", 1e-3), (3, "length", 3.0)],
)
def test_quantities_with_units(value, dim, expected):
    assert parse_quantity(value, dim) == pytest.approx(expected)


@pytest.mark.parametrize("value", ["2 km", "two s", "1 parsec", True])
def test_bad_quantities(value):
    with pytest.raises(UnitError):
        parse_quantity(value, "time")


@pytest.mark.parametrize(
    "mutate, where",
    [
        (lambda c: c.pop("model"), ""),
        (lambda c: c["method"].update(h="-1 s"), "method"),
        (lambda c: c["method"].update(kind="magic"), "method"),
        (lambda c: c["time"].update(tf="3 km"), "time"),
        (lambda c: c.update(schema_version=99), "schema_version"),
    ],
)
def test_invalid_configs_name_the_field(mutate, where):
    cfg = _ou()
    mutate(cfg)
    with pytest.raises(ConfigError) as err:
        validate(cfg)
    assert err.value.path.startswith(where)


# -- command line -----------------------------------------------------------------


def test_list_scenarios(capsys):
    assert main(["list-scenarios"]) == 0
    out = capsys.readouterr().out
    for name in EXPECTED:
        assert name in out
    assert "[long]" in out


def test_validate_exit_codes(tmp_path, capsys):
    assert main(["validate", "ou_linear"]) == 0
    bad = tmp_path / "bad.yaml"
    cfg = _ou()
    cfg["method"]["order"] = "two"
    bad.write_text(yaml.safe_dump(cfg))
    assert main(["validate", str(bad)]) == 2
    assert "method.order" in capsys.readouterr().err
    (tmp_path / "broken.yaml").write_text("model: [unclosed")
    assert main(["validate", str(tmp_path / "broken.yaml")]) == 2
    assert main(["validate", str(tmp_path / "missing.yaml")]) == 2
    assert main(["run", "ou_linear", "--threads", "0"]) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_runtime_failure_exit_code(tmp_path, capsys):
    cfg = _ou()
    cfg["model"]["params"]["a"] = "-1.0e5 1/s"
    path = tmp_path / "blowup.yaml"
    path.write_text(yaml.safe_dump(cfg))
    assert main(["run", str(path), "--out-dir", str(tmp_path)]) == 1
    assert "error in uqprop" in capsys.readouterr().err


def test_run_writes_outputs(out_dir, capsys):
    assert main(["run", "duffing_oracle", "--out-dir", str(out_dir), "--strict"]) == 0
    assert "PASS" in capsys.readouterr().out
    d = out_dir / "duffing_oracle"
    manifest = json.loads((d / "manifest.json").read_text())
    for key in ("config_hash", "config", "seed", "threads", "versions", "wall_time_s", "metrics", "checks", "files"):
        assert key in manifest
    assert manifest["config_hash"] == config_hash(manifest["config"])
    assert all(c["passed"] for c in manifest["checks"])
    for name in manifest["files"]:
        assert (d / name).exists()
    rows = list(csv.reader((d / "mean.csv").open()))
    assert rows[0] == ["component", "unit", "estimate", "reference", "rel_error"]
    assert len(rows) == 3
    cov = list(csv.reader((d / "covariance.csv").open()))
    assert cov[0][:4] == ["row", "col", "unit", "estimate"] and len(cov) == 4
    moments = list(csv.reader((d / "noise_moments.csv").open()))
    assert len(moments) > 50


def test_environment_selects_output_directory(tmp_path, monkeypatch):
    monkeypatch.setenv("UQPROP_OUT_DIR", str(tmp_path / "env"))
    res = run_scenario(_ou(), echo=lambda *_: None)
    assert res.out_dir == tmp_path / "env" / "ou_linear"
    assert (res.out_dir / "manifest.json").exists()


def test_seed_and_threads_overrides_are_recorded(out_dir):
    cfg = _ou(kind="mc", n_samples=200, h="0.01 s", scheme="euler_maruyama")
    a = run_scenario(cfg, out_dir, seed=5, threads=2, echo=lambda *_: None)
    b = run_scenario(cfg, out_dir, seed=5, threads=1, echo=lambda *_: None)
    np.testing.assert_array_equal(a.mean, b.mean)
    manifest = json.loads((a.out_dir / "manifest.json").read_text())
    assert manifest["seed"] == 5 and manifest["config"]["seed"] == 5
