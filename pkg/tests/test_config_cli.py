import json
import math
from dataclasses import replace

import pytest

from whitham_lab import config as cfgmod
from whitham_lab.cli import main
from whitham_lab.exceptions import ConfigError

CONFIGS = __import__("pathlib").Path(__file__).resolve().parents[1] / "configs"


def test_defaults_are_valid():
    cfg = cfgmod.validate(cfgmod.Config())
    assert cfg.grid.length == pytest.approx(20 * math.pi)
    assert cfg.wave.gamma == -1.0
    assert cfg.fast_points_for(0.025) == 8192
    assert cfg.fast_points_for(0.2) == 1024
    assert cfg.slow_steps_per_snapshot == 2


def test_round_trip():
    cfg = cfgmod.load(CONFIGS / "bump.toml")
    assert cfgmod.loads(cfgmod.dumps(cfg)) == cfg
    assert cfgmod.loads(cfgmod.dumps(cfgmod.Config())) == cfgmod.Config()


@pytest.mark.parametrize("text, match", [
    ("[run]\nt0 = -1.0\n", "t0"),
    ("[wave]\ngamma = 1.0\n", "defocusing"),
    ("[wave]\nk = 1.03\n", "nearest admissible k"),
    ("[run]\neps = [0.2, 0.1, 0.04]\n", "geometric"),
    ("[run]\nbogus = 1\n", "bogus"),
    ("[nonsense]\n", "nonsense"),
    ("[time]\ncfl = 0.9\n", "cfl"),
    ("[run]\nn = 4\n", "0..3"),
    ("[time]\ndt = 0.003\n", "divide"),
    ("[run\n", "malformed"),
])
def test_invalid_configs_rejected(text, match):
    with pytest.raises(ConfigError, match=match):
        cfgmod.loads(text)


def test_overrides_and_env(monkeypatch):
    cfg = cfgmod.Config()
    monkeypatch.setenv(cfgmod.THREADS_ENV, "3")
    assert cfgmod.with_overrides(cfg).run.threads == 3
    assert cfgmod.with_overrides(cfg, threads=2).run.threads == 2
    out = cfgmod.with_overrides(cfg, n=2, eps=[0.1, 0.05, 0.025], t0=0.25, out="x")
    assert (out.run.n, out.run.eps, out.run.t0, out.output.directory) == (2, (0.1, 0.05, 0.025), 0.25, "x")
    monkeypatch.setenv(cfgmod.THREADS_ENV, "many")
    with pytest.raises(ConfigError):
        cfgmod.with_overrides(cfg)


def test_content_hash_ignores_output_dir():
    a = cfgmod.Config()
    b = replace(a, output=replace(a.output, directory="elsewhere"))
    assert a.content_hash() == b.content_hash()
    assert a.content_hash() == replace(a, run=replace(a.run, threads=4)).content_hash()
    assert a.content_hash() != replace(a, run=replace(a.run, n=2)).content_hash()


def test_no_arguments_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_bad_config_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text("[wave]\ngamma = 1.0\n")
    assert main(["wme", "--config", str(p), "--out", str(tmp_path)]) == 2
    assert "defocusing" in capsys.readouterr().err


@pytest.mark.slow
def test_converge_on_shipped_config(tmp_path, capsys):
    code = main(["converge", "--config", str(CONFIGS / "bump.toml"), "--n", "1",
                 "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0, out
    assert "[PASS] validity_slope" in out
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["tables"]["converge"]["err_fit"]["slope"] >= 1.8
    assert (tmp_path / "converge_table.csv").exists()


def test_classify_wavetrain(tmp_path, capsys):
    code = main(["classify", "--config", str(CONFIGS / "wavetrain.toml"), "--out", str(tmp_path)])
    assert code == 0
    assert capsys.readouterr().out.splitlines()[0] == "hyperbolic"


def test_wme_and_stability_subcommands(tmp_path, capsys):
    assert main(["wme", "--out", str(tmp_path / "w")]) == 0
    manifest = json.loads((tmp_path / "w" / "trajectory" / "manifest.json").read_text())
    assert len(manifest["energy"]) == 51
    assert main(["stability", "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "jordan.dat").exists()


def test_reports_identical_for_identical_inputs(tmp_path):
    args = ["hierarchy", "--eps", "0.2,0.1,0.05"]
    assert main(args + ["--out", str(tmp_path)]) == 0
    first = (tmp_path / "report.json").read_bytes()
    assert main(args + ["--out", str(tmp_path), "--threads", "2"]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["config"]["run"]["threads"] == 2
    report["config"]["run"]["threads"] = 1
    assert json.dumps(report, sort_keys=True, indent=1) + "\n" == first.decode()
    assert main(args + ["--out", str(tmp_path)]) == 0
    assert (tmp_path / "report.json").read_bytes() == first
