import math

import numpy as np
import pytest

from whitham_lab.field_core import Grid1D, RealField
from whitham_lab.hierarchy import hand_forcing_h0, hand_residual_r1
from whitham_lab.jets import (JetField, jet_add, jet_defect_swe, jet_derivative, jet_exp,
                              jet_expm1, jet_mul)

from conftest import smooth_field

GRID = Grid1D(2 * math.pi, 64)


def rand_jet(seed, order, scale=0.3):
    return JetField.from_fields([smooth_field(GRID, seed + i, scale=scale) for i in range(order + 1)])


def test_scalar_embedding():
    a, b = smooth_field(GRID, 1), smooth_field(GRID, 2)
    z = RealField.zeros(GRID)
    p = jet_mul(JetField.from_fields([a, z]), JetField.from_fields([b, z]))
    assert np.max(np.abs(p.coeffs[0] - GRID.product(a.values, b.values))) < 1e-14
    assert np.all(p.coeffs[1] == 0)


def test_truncation():
    z = RealField.zeros(GRID)
    f, g = smooth_field(GRID, 1), smooth_field(GRID, 2)
    p = jet_mul(JetField.from_fields([z, f]), JetField.from_fields([z, g]))
    assert np.max(np.abs(p.coeffs)) == 0.0


def test_mismatch_rejected():
    with pytest.raises(ValueError):
        jet_add(rand_jet(0, 1), rand_jet(0, 2))
    other = JetField.zeros(Grid1D(2 * math.pi, 32), 1)
    with pytest.raises(ValueError):
        jet_mul(rand_jet(0, 1), other)


def test_product_evaluation_oracle():
    # truncation error of the evaluated product is a_1 b_1 eps^4 for order-1 jets
    a, b = rand_jet(3, 1), rand_jet(7, 1)
    errs = []
    epss = [1e-1, 1e-2, 1e-3]
    for eps in epss:
        direct = GRID.product(a.evaluate(eps), b.evaluate(eps))
        errs.append(np.max(np.abs(jet_mul(a, b).evaluate(eps) - direct)))
    slope = np.polyfit(np.log(epss), np.log(errs), 1)[0]
    assert slope == pytest.approx(4.0, abs=0.1)


def test_exp_of_constant_and_first_order():
    c = JetField.constant(GRID, 0.3, 1)
    e = jet_exp(c)
    assert np.allclose(e.coeffs[0], math.exp(0.3)) and np.all(e.coeffs[1] == 0)
    r1 = smooth_field(GRID, 4)
    e = jet_exp(JetField.from_fields([RealField.zeros(GRID), r1]), 2.0)
    assert np.allclose(e.coeffs[0], 1.0)
    assert np.max(np.abs(e.coeffs[1] - 2 * r1.values)) < 1e-14


def test_exp_evaluation_oracle():
    r, r1 = smooth_field(GRID, 5, scale=0.2), smooth_field(GRID, 6, scale=0.2)
    j = JetField.from_fields([r, r1, RealField.zeros(GRID)])
    eps = 1e-2
    exact = np.exp(2 * (r.values + eps**2 * r1.values))
    err = np.max(np.abs(jet_exp(j, 2.0).evaluate(eps) - exact))
    # the dropped term is O(eps^6) times smooth coefficients
    assert err < 50 * eps**6


def test_expm1_matches_exp():
    j = rand_jet(11, 2)
    a, b = jet_exp(j, 2.0), jet_expm1(j, 2.0)
    assert np.max(np.abs(a.coeffs[0] - 1.0 - b.coeffs[0])) < 1e-14
    assert np.array_equal(a.coeffs[1:], b.coeffs[1:])


def test_ring_axioms():
    a, b, c = rand_jet(1, 2), rand_jet(2, 2), rand_jet(3, 2)
    assoc = jet_mul(jet_mul(a, b), c).coeffs - jet_mul(a, jet_mul(b, c)).coeffs
    distr = jet_mul(a, b + c).coeffs - (jet_mul(a, b) + jet_mul(a, c)).coeffs
    assert np.max(np.abs(assoc)) < 1e-12
    assert np.max(np.abs(distr)) < 1e-12


def test_evaluation_homomorphism_slope():
    a, b = rand_jet(21, 1), rand_jet(22, 1)

    def expr_jet(x, y):
        return jet_mul(jet_exp(x, 2.0), jet_derivative(y)) + jet_mul(x, x)

    def expr_val(x, y):
        return GRID.product(np.exp(2 * x), GRID.diff(y, 1)) + GRID.product(x, x)

    epss = [1e-1, 1e-2, 1e-3]
    errs = [np.max(np.abs(expr_jet(a, b).evaluate(e) - expr_val(a.evaluate(e), b.evaluate(e))))
            for e in epss]
    slope = np.polyfit(np.log(epss), np.log(errs), 1)[0]
    assert slope >= 4.0 - 0.2


def test_defect_of_stationary_zero_is_zero():
    z = JetField.zeros(GRID, 1)
    d_r, d_u = jet_defect_swe(z, z, 1.0, z, z)
    assert np.max(np.abs(d_r.coeffs)) == 0.0 and np.max(np.abs(d_u.coeffs)) == 0.0


def test_defect_level_one_of_frozen_sine():
    r = RealField.from_function(GRID, np.sin)
    rj = JetField.from_fields([r, RealField.zeros(GRID)])
    z = JetField.zeros(GRID, 1)
    _, d_u = jet_defect_swe(rj, z, 1.0, z, z)
    rx = np.cos(GRID.x)
    expected = -(-np.cos(GRID.x) + 2 * rx * -np.sin(GRID.x))
    assert np.max(np.abs(d_u.coeffs[1] - expected)) < 1e-11
    _, h0 = hand_forcing_h0(GRID, r.values)
    assert np.max(np.abs(d_u.coeffs[1] + h0)) < 1e-12


def test_defect_matches_hand_first_order_formulas():
    # random smooth (r, u, r1, u1), time derivatives chosen so levels 0 and 1 vanish
    k = 0.7
    r, u = smooth_field(GRID, 31, scale=0.2).values, smooth_field(GRID, 32, scale=0.2).values
    r1, u1 = smooth_field(GRID, 33, scale=0.2).values, smooth_field(GRID, 34, scale=0.2).values
    zero = np.zeros_like(r)

    def jet(*c):
        return JetField(GRID, np.stack(c))

    rj, uj = jet(r, r1, zero), jet(u, u1, zero)
    zj = jet(zero, zero, zero)
    d_r, d_u = jet_defect_swe(rj, uj, k, zj, zj)
    # with zero time derivatives, coefficient 0 is minus the modulation tendency
    rx = GRID.diff(r, 1)
    tend_r = -GRID.diff(u, 1) - 2 * k * rx - 2 * GRID.product(u, rx)
    assert np.max(np.abs(d_r.coeffs[0] + tend_r)) < 1e-12
    # coefficient 2 with level 2 absent is the hand residual at eps = 0
    R1r, R1u = hand_residual_r1(GRID, r, r1, u1, 0.0)
    assert np.max(np.abs(d_r.coeffs[2] - R1r)) < 1e-12
    assert np.max(np.abs(d_u.coeffs[2] - R1u)) < 1e-10
