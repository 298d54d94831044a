import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from whitham_lab.field_core import (ComplexField, Grid1D, RealField, dealiased_product, l2_inner,
                                    parseval_sum, read_field_csv, sobolev_norm,
                                    spectral_antiderivative, spectral_derivative)

from conftest import smooth_field


def test_grid_rejects_bad_sizes():
    with pytest.raises(ValueError):
        Grid1D(1.0, 6)
    with pytest.raises(ValueError):
        Grid1D(1.0, 4)
    with pytest.raises(ValueError):
        Grid1D(0.0, 16)


def test_wavenumbers_symmetric(circle):
    k = circle.wavenumbers
    assert k[1] == pytest.approx(1.0)
    assert sorted(np.round(k[1:32]).astype(int)) == list(range(1, 32))
    assert circle.spacing == pytest.approx(2 * math.pi / 64)


def test_derivative_of_sine(circle):
    f = RealField.from_function(circle, np.sin)
    df = spectral_derivative(f, 1)
    assert np.max(np.abs(df.values - np.cos(circle.x))) < 1e-12


def test_derivative_of_constant_vanishes(circle):
    f = RealField(circle, np.full(64, 3.5))
    for order in range(1, 5):
        assert np.max(np.abs(spectral_derivative(f, order).values)) < 1e-12


@pytest.mark.parametrize("order", [0, 5, -1])
def test_derivative_order_limits(circle, order):
    with pytest.raises(ValueError):
        spectral_derivative(RealField.zeros(circle), order)


def test_second_derivative_against_finite_differences():
    # fourth-order central differences: error ratio ~16 per halving of h
    errs = []
    for n in (64, 128):
        g = Grid1D(2 * math.pi, n)
        f = np.exp(np.sin(g.x))
        spec = g.diff(f, 2)
        h = g.spacing
        fd = (-np.roll(f, -2) + 16 * np.roll(f, -1) - 30 * f + 16 * np.roll(f, 1)
              - np.roll(f, 2)) / (12 * h * h)
        errs.append(np.max(np.abs(fd - spec)))
    assert math.log2(errs[0] / errs[1]) == pytest.approx(4.0, abs=0.2)


def test_complex_derivative(circle):
    f = ComplexField(circle, np.exp(3j * circle.x))
    assert np.max(np.abs(spectral_derivative(f, 2).values + 9 * f.values)) < 1e-11


def test_derivative_composition(circle):
    f = smooth_field(circle, 1)
    g = circle
    once = g.diff(g.diff(f.values, 1), 1)
    twice = g.diff(f.values, 2)
    assert np.max(np.abs(once - twice)) <= 1e-10 * np.max(np.abs(twice))


def test_antiderivative_round_trip(circle):
    f = spectral_derivative(smooth_field(circle, 2), 1)
    F = spectral_antiderivative(f)
    assert np.max(np.abs(spectral_derivative(F, 1).values - f.values)) < 1e-12
    assert abs(F.values.mean()) < 1e-14
    with pytest.raises(ValueError):
        spectral_antiderivative(RealField(circle, np.ones(64)))


def test_inner_products(circle):
    s = RealField.from_function(circle, np.sin)
    assert l2_inner(s, s) == pytest.approx(math.pi, abs=1e-12)
    assert l2_inner(s, RealField.zeros(circle)) == 0.0
    g = Grid1D(7.0, 16)
    one = RealField(g, np.ones(16))
    assert l2_inner(one, one) == pytest.approx(7.0)
    with pytest.raises(ValueError):
        l2_inner(s, one)


def test_sobolev_norms_of_sine(circle):
    s = RealField.from_function(circle, np.sin)
    assert sobolev_norm(s, 0) == pytest.approx(math.sqrt(math.pi), rel=1e-12)
    assert sobolev_norm(s, 1) == pytest.approx(math.sqrt(2 * math.pi), rel=1e-12)
    assert sobolev_norm(RealField.zeros(circle), 3) == 0.0
    with pytest.raises(ValueError):
        sobolev_norm(s, 9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), s=st.integers(0, 7))
def test_sobolev_monotone(seed, s):
    g = Grid1D(2 * math.pi, 32)
    f = smooth_field(g, seed)
    assert sobolev_norm(f, s + 1) >= sobolev_norm(f, s)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_inner_symmetric_bilinear(seed, a, b):
    g = Grid1D(2 * math.pi, 32)
    f, h, k = (smooth_field(g, seed + i) for i in range(3))
    assert l2_inner(f, h) == pytest.approx(l2_inner(h, f), abs=1e-13)
    lhs = l2_inner(f * a + h * b, k)
    rhs = a * l2_inner(f, k) + b * l2_inner(h, k)
    assert lhs == pytest.approx(rhs, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_parseval(seed):
    g = Grid1D(3.0, 64)
    f = smooth_field(g, seed)
    assert parseval_sum(f) == pytest.approx(l2_inner(f, f), rel=1e-10)


def test_dealiased_product_exact_for_resolved_fields(circle):
    a = RealField.from_function(circle, lambda x: np.cos(5 * x))
    b = RealField.from_function(circle, lambda x: np.sin(7 * x))
    p = dealiased_product(a, b)
    assert np.max(np.abs(p.values - a.values * b.values)) < 1e-13


def test_dealiased_product_removes_aliases():
    g = Grid1D(2 * math.pi, 16)
    a = RealField.from_function(g, lambda x: np.cos(6 * x))
    # cos(6x)^2 = (1 + cos 12x)/2 and mode 12 is beyond the band: only 1/2 remains
    p = dealiased_product(a, a)
    assert np.max(np.abs(p.values - 0.5)) < 1e-14


def test_resample_round_trip():
    g = Grid1D(10.0, 32, -5.0)
    f = np.exp(-g.x**2)
    fine = g.resample(f, 256)
    fg = g.refined(256)
    assert np.max(np.abs(fine - np.exp(-fg.x**2))) < 1e-6
    assert np.max(np.abs(fg.resample(fine, 32) - f)) < 1e-14


def test_fields_are_immutable_and_finite(circle):
    f = RealField.zeros(circle)
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    with pytest.raises(ValueError):
        RealField(circle, np.full(64, np.nan))
    with pytest.raises(ValueError):
        RealField(circle, np.zeros(10))


def test_csv_round_trip(tmp_path, circle):
    f = smooth_field(circle, 3)
    f.to_csv(tmp_path / "f.csv")
    g = read_field_csv(tmp_path / "f.csv")
    assert g.grid == circle and np.array_equal(g.values, f.values)
    z = ComplexField(circle, f.values + 2j * f.values)
    z.to_csv(tmp_path / "z.csv")
    assert np.array_equal(read_field_csv(tmp_path / "z.csv").values, z.values)
    assert (tmp_path / "f.csv").read_text().startswith("# grid length=")
