import json
import math
from dataclasses import replace

import numpy as np
import pytest

from whitham_lab.field_core import Grid1D, RealField
from whitham_lab.harness import (ConvergenceTable, CriterionResult, RunReport, classify_hyperbolicity,
                                 default_config, fit_slope, initial_data, input_hash,
                                 observed_order, run_convergence, slope_interval, wavetrain_config)

G = Grid1D(2 * math.pi, 16)


def small_config(**run):
    cfg = default_config(eps=(0.2, 0.1, 0.05), t0=0.1, snapshots=10, **run)
    return replace(cfg, grid=replace(cfg.grid, fast_points=4096))


def test_fit_slope_examples():
    x = [1.0, 0.5, 0.25, 0.125]
    fit = fit_slope(x, [3 * v**2 for v in x])
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-12)
    assert fit.max_residual < 1e-12
    assert slope_interval(x, [3 * v**2 for v in x]) < 1e-10
    with pytest.raises(ValueError):
        fit_slope([1.0, 0.5], [1.0, 0.25])
    with pytest.raises(ValueError):
        fit_slope([1.0, 0.5, 0.25], [1.0, 0.0, 0.25])


def test_slope_interval_widens_with_noise():
    x = np.array([0.2, 0.1, 0.05, 0.025])
    y = x**3 * np.array([1.0, 1.3, 0.8, 1.1])
    hw = slope_interval(x, y)
    assert 0.05 < hw < 2.0


def test_observed_order_example():
    assert observed_order([1.0, 0.25, 0.0625]) == pytest.approx([2.0, 2.0])


@pytest.mark.parametrize("theta_T, theta_X, expected", [
    (-2.0, 1.0, "hyperbolic"),
    (2.0, 1.0, "elliptic"),
])
def test_classify_constant_fields(theta_T, theta_X, expected):
    res = classify_hyperbolicity(RealField(G, np.full(16, theta_T)), RealField(G, np.full(16, theta_X)))
    assert res.summary == expected


def test_classify_mixed_and_wavetrain():
    tt = RealField(G, np.where(G.x < math.pi, -2.0, 2.0))
    assert classify_hyperbolicity(tt, RealField(G, np.ones(16))).summary == "mixed"
    # omega + k^2 = -1 for the unmodulated wave
    k = 1.3
    res = classify_hyperbolicity(RealField(G, np.full(16, -k**2 - 1)), RealField(G, np.full(16, k)))
    assert res.summary == "hyperbolic" and np.all(res.signs == -1)


def test_initial_data_defaults(cfg):
    data = initial_data(cfg)
    assert data.grid.origin == pytest.approx(-10 * math.pi)
    assert abs(data.u0.values.mean()) < 1e-16
    assert data.edge < 1e-8
    assert np.max(np.abs(data.grid.diff(data.phi0.values, 1) - data.u0.values)) < 1e-12


def test_mean_removed_from_u(caplog):
    cfg = default_config()
    cfg = replace(cfg, initial=replace(cfg.initial, u_profile="gaussian-bump"))
    data = initial_data(cfg)
    assert abs(data.u0.values.mean()) < 1e-15
    assert "subtracting" in caplog.text


def test_table_round_trip(table1):
    d = table1.to_dict()
    back = ConvergenceTable.from_dict(json.loads(json.dumps(d)))
    assert back.to_dict() == d
    assert table1.to_csv().splitlines()[0].startswith("eps,n,T0,err_H1")
    assert len(table1.to_csv().splitlines()) == len(table1.rows) + 1


def test_report_round_trip(tmp_path, table1, cfg):
    rep = RunReport.start(cfg)
    rep.add_table("converge", table1)
    rep.add_criteria([CriterionResult("X", "demo", True, {"v": 1.5}, {"v": 2.0}, runtime=3.0)])
    back = RunReport.from_json(rep.to_json())
    assert back.to_json() == rep.to_json()
    assert "runtime" not in rep.to_json()
    rep.write(tmp_path, cfg)
    for name in ("report.json", "timings.json", "config.toml", "converge_table.csv",
                 "converge_slopes.dat", "converge_W_eps0.2.dat"):
        assert (tmp_path / name).exists()
    assert json.loads((tmp_path / "timings.json").read_text())["criterion:X"] == 3.0


def test_criterion_line_format():
    r = CriterionResult("C0", "demo", False, {"slope": 3.04123, "n": 2}, {})
    assert r.line() == "[FAIL] C0 demo: slope=3.041, n=2"


def test_input_hash_tracks_inputs(cfg):
    assert input_hash(cfg) == input_hash(default_config())
    assert input_hash(cfg) != input_hash(default_config(n=2))


def test_convergence_deterministic_across_threads():
    cfg = small_config()
    one = run_convergence(cfg).to_dict()
    two = run_convergence(replace(cfg, run=replace(cfg.run, threads=2))).to_dict()
    assert json.dumps(one, sort_keys=True) == json.dumps(two, sort_keys=True)


def test_unmodulated_wave_is_degenerate():
    table = run_convergence(wavetrain_config(small_config()))
    assert table.degenerate
    assert table.err_fit is None
    assert all(r.status == "ok" and r.err_H1 < 1e-10 for r in table.rows)
