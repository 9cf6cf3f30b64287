import hashlib
import json

import numpy as np
import pytest

import lipbandits.harness as harness
from lipbandits.cli import main
from lipbandits.config import (ConfigError, RangeViolation, TypeMismatch, UnknownKey,
                               parse_config)
from lipbandits.harness import IoError, analyze_dir, run_experiment, run_rng

MINIMAL = """
[experiment]
family = cone
algorithm = paco
horizons = 1000
seeds = 1
"""


def _hashes(root):
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_minimal_config():
    cfg = parse_config(MINIMAL)
    assert (cfg.family, cfg.algorithm, cfg.horizons, cfg.seeds) == ("cone", "paco", (1000,), (1,))
    assert cfg.delta is None and cfg.noise == "gaussian_unit"


def test_full_config():
    cfg = parse_config("""
[experiment]
family = multipeak
algorithm = sous
horizons = 1e3, 1e4
seeds = 0, 1, 2
delta = 0.05
lipschitz = 2
master_seed = 7
traces = false

[instance]
d = 2
centers = 0.2, 0.2; 0.8, 0.7
heights = 1, 0.9

[experts]
amplitude = 0.1

[analysis]
dimensions = yes
quadrature_resolution = 64
""")
    assert cfg.horizons == (1000, 10000)
    assert cfg.instance_params["centers"] == ((0.2, 0.2), (0.8, 0.7))
    assert cfg.build_instance().lipschitz_known == 2.0
    assert cfg.experts.amplitude == 0.1 and cfg.traces is False


def test_delta_out_of_range():
    with pytest.raises(RangeViolation) as err:
        parse_config(MINIMAL + "delta = 1.5\n")
    assert err.value.key == "experiment.delta"


def test_unknown_family_suggests():
    with pytest.raises(UnknownKey) as err:
        parse_config(MINIMAL.replace("cone", "coen"))
    assert err.value.key == "experiment.family"
    assert "cone" in err.value.suggestions


def test_unknown_key_and_section():
    with pytest.raises(UnknownKey) as err:
        parse_config(MINIMAL + "horizon = 5\n")
    assert "horizons" in err.value.suggestions
    with pytest.raises(UnknownKey):
        parse_config(MINIMAL + "[instanse]\nd = 1\n")
    with pytest.raises(UnknownKey) as err:
        parse_config(MINIMAL + "[instance]\ncentre = 0.5\n")
    assert err.value.key == "instance.centre"


def test_type_mismatch():
    with pytest.raises(TypeMismatch) as err:
        parse_config(MINIMAL.replace("seeds = 1", "seeds = one"))
    assert err.value.key == "experiment.seeds"
    with pytest.raises(TypeMismatch):
        parse_config(MINIMAL.replace("horizons = 1000", "horizons = 10.5"))


def test_missing_and_dependent_keys():
    with pytest.raises(ConfigError):
        parse_config("[experiment]\nfamily = cone\n")
    with pytest.raises(ConfigError) as err:
        parse_config(MINIMAL.replace("paco", "positive_gap_ucb"))
    assert err.value.key == "experiment.gap_floor"
    with pytest.raises(RangeViolation):
        parse_config(MINIMAL + "lipschitz = 0.5\n")  # below the true constant


def test_config_hash_ignores_output():
    a = parse_config(MINIMAL)
    b = parse_config(MINIMAL + "output = elsewhere\n")
    assert a.sha256() == b.sha256()
    assert a.sha256() != parse_config(MINIMAL + "master_seed = 3\n").sha256()


def test_streams_are_keyed_on_horizon_value():
    a = run_rng(0, 1, 1000).random(3)
    assert np.array_equal(a, run_rng(0, 1, 1000).random(3))
    assert not np.array_equal(a, run_rng(0, 1, 2000).random(3))
    assert not np.array_equal(a, run_rng(0, 2, 1000).random(3))


def test_single_run_outputs(tmp_path):
    out = run_experiment(parse_config(MINIMAL), tmp_path / "o")
    files = sorted(p.relative_to(out).as_posix() for p in out.rglob("*") if p.is_file())
    assert files == ["config.json", "manifest.json", "runs/T1000_seed1.csv", "summary.json"]
    lines = (out / "runs/T1000_seed1.csv").read_text().splitlines()
    assert lines[1] == "t,phase_or_round,x,reward,gap,cumulative_regret"
    assert len(lines) == 1002
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config_sha256"] == parse_config(MINIMAL).sha256()
    assert set(manifest["files"]) == {"config.json", "summary.json", "runs/T1000_seed1.csv"}


def test_rerun_is_byte_identical(tmp_path):
    cfg = parse_config(MINIMAL.replace("seeds = 1", "seeds = 1, 2"))
    a = run_experiment(cfg, tmp_path / "a")
    b = run_experiment(cfg, tmp_path / "b", workers=2)
    assert _hashes(a) == _hashes(b)


def test_sweep_counts(tmp_path):
    text = """
[experiment]
family = plateau
algorithm = grid_ucb
horizons = 100, 300, 1000, 100000
seeds = 0, 1, 2, 3, 4, 5, 6, 7, 8, 9
[analysis]
report = false
"""
    out = run_experiment(parse_config(text), tmp_path / "s")
    assert len(list((out / "runs").glob("*.csv"))) == 40
    summary = json.loads((out / "summary.json").read_text())
    assert len(summary["runs"]) == 40
    assert "slope" in summary["exponent"]


def test_failure_removes_partial_outputs(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("disk full")

    monkeypatch.setattr(harness, "aggregate", boom)
    with pytest.raises(IoError):
        run_experiment(parse_config(MINIMAL), tmp_path / "f")
    assert not (tmp_path / "f").exists()


def test_analyze_recomputes_regret(tmp_path):
    out = run_experiment(parse_config(MINIMAL.replace("seeds = 1", "seeds = 1, 2")), tmp_path / "o")
    res = analyze_dir(out)
    summary = json.loads((out / "summary.json").read_text())
    assert res["recompute_mismatches"] == 0
    assert res["mean_regret"][0] == pytest.approx(summary["mean_regret"]["1000"])


def test_cli_commands(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text(MINIMAL)
    assert main(["--out", str(tmp_path / "r"), "--seed-offset", "5", "run", str(cfg)]) == 0
    assert (tmp_path / "r/runs/T1000_seed6.csv").exists()
    capsys.readouterr()
    assert main(["analyze", str(tmp_path / "r")]) == 0
    assert json.loads(capsys.readouterr().out)["seeds"] == [6]
    assert main(["bound", str(cfg)]) == 0
    bounds = json.loads(capsys.readouterr().out)["bounds"][0]
    assert bounds["kT_lower"] == 3 and bounds["upper_integral"] == pytest.approx(28, rel=0.01)
    assert main(["--out", str(tmp_path / "d"), "dims", str(cfg)]) == 0
    assert json.loads((tmp_path / "d/dims.json").read_text())["dstar_est"] == 0.0


def test_cli_config_error(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(MINIMAL + "delta = 2\n")
    assert main(["run", str(cfg)]) == 2
    assert "experiment.delta" in capsys.readouterr().err
