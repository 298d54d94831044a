import math

import numpy as np
import pytest

from whitham_lab.exceptions import ConsistencyError
from whitham_lab.field_core import Grid1D, RealField
from whitham_lab.harness import fit_slope, observed_order
from whitham_lab.hierarchy import (assemble, build_hierarchy, hand_forcing_h0, hand_residual_r1,
                                   lift_phase, residuals)
from whitham_lab.wme import ModulationState, wme_integrate


def small_problem(dt, T=0.4, points=64):
    g = Grid1D(20 * math.pi, points, -10 * math.pi)
    r0 = RealField(g, 0.1 / np.cosh(g.x / 2) ** 2)
    u0v = -0.1 * (g.x / 2) * np.exp(-(g.x / 2) ** 2)
    u0 = RealField(g, u0v - u0v.mean())
    phi0 = RealField(g, g.antiderivative(u0.values))
    return wme_integrate(ModulationState(0.0, r0, u0, 1.0), T, dt), phi0


def test_order_limits(base):
    with pytest.raises(ValueError):
        build_hierarchy(base, 4)
    with pytest.raises(ValueError):
        build_hierarchy(base, -1)
    with pytest.raises(ValueError):
        build_hierarchy(base, 1, dt=2 * base.dt)


def test_order_zero_is_the_base(base):
    h = build_hierarchy(base, 0)
    assert h.levels == [] and h.forcings == []
    s = assemble(h, 0.3, 0.25)
    assert np.array_equal(s.r.values, base.sample(0.25)[0])


def test_zero_data_gives_zero_hierarchy():
    g = Grid1D(2 * math.pi, 32)
    z = RealField.zeros(g)
    base = wme_integrate(ModulationState(0.0, z, z, 1.0), 0.1, 0.01)
    h = build_hierarchy(base, 3)
    values, slopes = h.stage_coefficients()
    assert np.max(np.abs(values)) == 0.0 and np.max(np.abs(slopes)) == 0.0


def test_first_forcing_matches_hand_formula(hier1):
    h = hier1.forcings[0]
    stages = hier1.base.stages
    j = hier1.nsteps // 2
    for i in range(4):
        zr, hu = hand_forcing_h0(hier1.grid, stages[j, i, 0])
        assert np.max(np.abs(h[j, i, 0] - zr)) == 0.0
        assert np.max(np.abs(h[j, i, 1] - hu)) <= 1e-12 * np.max(np.abs(hu))


def test_second_forcing_is_minus_hand_residual(hier2):
    base, lvl1 = hier2.base, hier2.levels[0]
    j = hier2.nsteps
    r1, u1 = lvl1.values[j]
    R1r, R1u = hand_residual_r1(hier2.grid, base.values[j, 0], r1, u1, 0.0)
    h = hier2.forcings[1][j, 0]
    scale = np.max(np.abs(R1u))
    assert np.max(np.abs(h[0] + R1r)) <= 1e-9 * scale
    assert np.max(np.abs(h[1] + R1u)) <= 1e-9 * scale


@pytest.mark.parametrize("eps", [0.2, 0.1, 0.05])
def test_first_order_residual_is_eps4_hand_residual(hier1, data, eps):
    phase = lift_phase(hier1, eps, data.phi0)
    j = hier1.nsteps
    r1, u1 = hier1.levels[0].values[j]
    R1r, R1u = hand_residual_r1(hier1.grid, hier1.base.values[j, 0], r1, u1, eps)
    scale = eps**4 * np.max(np.abs(R1u))
    assert np.max(np.abs(phase.res_r[j] - eps**4 * R1r)) <= 1e-6 * scale
    assert np.max(np.abs(phase.res_u[j] - eps**4 * R1u)) <= 1e-6 * scale


def test_assemble_at_zero_eps_is_bitwise_base(hier2, base):
    for T in (0.0, 0.25, 0.5):
        s = assemble(hier2, 0.0, T)
        j = base.index_of(T)
        assert np.array_equal(s.r.values, base.values[j, 0])
        assert np.array_equal(s.u.values, base.values[j, 1])


def test_corrections_enter_at_eps_squared(hier1, base):
    epss = [0.2, 0.1, 0.05]
    gaps = [np.max(np.abs(assemble(hier1, e, 0.5).r.values - base.values[-1, 0])) for e in epss]
    assert fit_slope(epss, gaps).slope == pytest.approx(2.0, abs=1e-6)


def test_phase_gradient_identity(hier2, data):
    for eps in (0.2, 0.05):
        phase = lift_phase(hier2, eps, data.phi0)
        assert phase.gradient_identity_defect() < 1e-9


def test_phase_quadrature_is_fourth_order():
    ref_base, phi0 = small_problem(0.0025)
    ref = lift_phase(build_hierarchy(ref_base, 1), 0.1, phi0).phi[-1]
    errs = []
    for dt in (0.04, 0.02, 0.01):
        b, _ = small_problem(dt)
        errs.append(np.max(np.abs(lift_phase(build_hierarchy(b, 1), 0.1, phi0).phi[-1] - ref)))
    assert np.min(observed_order(errs)) >= 3.9


def test_phase_rejects_foreign_grid(hier1):
    with pytest.raises(ValueError):
        lift_phase(hier1, 0.1, RealField.zeros(Grid1D(1.0, 16)))


def test_two_residual_routes_agree(hier1, data):
    phase = lift_phase(hier1, 0.2, data.phi0)
    res = residuals(hier1, phase, 0.2)
    assert res.disagreement < 1e-6
    assert res.sup_norm > 0


def test_inconsistent_phase_is_detected(hier1, data):
    phase = lift_phase(hier1, 0.2, data.phi0)
    phase.phi = phase.phi + 1e-3 * np.sin(2 * np.pi * hier1.grid.x / hier1.grid.length)
    with pytest.raises(ConsistencyError):
        residuals(hier1, phase, 0.2)


def test_residual_order_grows_with_n(hier1, hier2, data):
    epss = [0.2, 0.1, 0.05]
    for hier, expect in ((hier1, 4.0), (hier2, 6.0)):
        sups = [residuals(hier, lift_phase(hier, e, data.phi0), e).sup_norm for e in epss]
        assert fit_slope(epss, sups).slope >= expect - 0.3


def test_residual_h2_norm_reported_with_same_order(hier1, data):
    epss = [0.2, 0.1, 0.05]
    sups = []
    for e in epss:
        res = residuals(hier1, lift_phase(hier1, e, data.phi0), e)
        assert np.all(res.norms["defect_H2"] >= res.norms["defect"])
        sups.append(float(np.max(res.norms["defect_H2"])))
    assert fit_slope(epss, sups).slope >= 3.8
