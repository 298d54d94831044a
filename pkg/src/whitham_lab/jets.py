"""Truncated power series in ``eps**2`` with field-valued coefficients.

A :class:`JetField` stores coefficients in an array of shape
``(order + 1, *batch, points)``; coefficient ``l`` multiplies ``eps**(2*l)``.
The batch axes let one jet carry a whole time series (e.g. every RK stage of a
trajectory) so forcings for a full hierarchy level come out of a single call.
"""
from dataclasses import dataclass

import numpy as np

from .field_core import Grid1D, RealField

GAMMA = -1.0


@dataclass(frozen=True)
class JetField:
    grid: Grid1D
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.ndim < 2 or coeffs.shape[-1] != self.grid.points:
            raise ValueError(
                f"jet coefficients must have shape (order+1, ..., {self.grid.points}),"
                f" got {coeffs.shape}")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def order(self):
        return self.coeffs.shape[0] - 1

    @classmethod
    def from_fields(cls, fields):
        fields = list(fields)
        grid = fields[0].grid
        for f in fields[1:]:
            if f.grid != grid:
                raise ValueError("all jet coefficients must share one grid")
        return cls(grid, np.stack([f.values for f in fields]))

    @classmethod
    def zeros(cls, grid, order, batch=()):
        return cls(grid, np.zeros((order + 1, *batch, grid.points)))

    @classmethod
    def constant(cls, grid, value, order, batch=()):
        c = np.zeros((order + 1, *batch, grid.points))
        c[0] = value
        return cls(grid, c)

    def coefficient(self, level):
        return RealField(self.grid, self.coeffs[level])

    def evaluate(self, eps):
        """Sum ``coeffs[l] * eps**(2l)`` in ascending order."""
        out = self.coeffs[0].copy()
        for level in range(1, self.order + 1):
            out = out + eps ** (2 * level) * self.coeffs[level]
        return out

    def with_order(self, order):
        """Truncate or zero-extend to ``order``."""
        c = np.zeros((order + 1,) + self.coeffs.shape[1:])
        m = min(order, self.order) + 1
        c[:m] = self.coeffs[:m]
        return JetField(self.grid, c)

    def __add__(self, other):
        return jet_add(self, other)

    def __sub__(self, other):
        return jet_sub(self, other)

    def __mul__(self, other):
        if isinstance(other, JetField):
            return jet_mul(self, other)
        return JetField(self.grid, self.coeffs * other)

    __rmul__ = __mul__

    def __neg__(self):
        return JetField(self.grid, -self.coeffs)


def _check(a, b):
    if a.grid != b.grid:
        raise ValueError(f"jet grid mismatch: {a.grid} vs {b.grid}")
    if a.order != b.order:
        raise ValueError(f"jet order mismatch: {a.order} vs {b.order}")
    if a.coeffs.shape != b.coeffs.shape:
        raise ValueError(f"jet batch mismatch: {a.coeffs.shape} vs {b.coeffs.shape}")


def jet_add(a, b):
    _check(a, b)
    return JetField(a.grid, a.coeffs + b.coeffs)


def jet_sub(a, b):
    _check(a, b)
    return JetField(a.grid, a.coeffs - b.coeffs)


def jet_add_constant(a, value):
    c = a.coeffs.copy()
    c[0] = c[0] + value
    return JetField(a.grid, c)


def jet_mul(a, b):
    """Cauchy product truncated at the common order; products are dealiased."""
    _check(a, b)
    grid = a.grid
    n = grid.points
    m = 3 * n // 2

    def padded(c):
        p = np.zeros(c.shape[:-1] + (m // 2 + 1,), dtype=complex)
        p[..., :n // 2] = np.fft.rfft(c, norm="forward")[..., :n // 2]
        return np.fft.irfft(p, n=m, norm="forward")

    pa = padded(a.coeffs)
    pb = padded(b.coeffs)
    out = np.zeros_like(pa)
    for level in range(a.order + 1):
        for i in range(level + 1):
            out[level] += pa[i] * pb[level - i]
    c = np.fft.rfft(out, norm="forward")[..., :n // 2 + 1]
    c[..., n // 2] = 0.0
    return JetField(grid, np.fft.irfft(c, n=n, norm="forward"))


def jet_derivative(a, order=1):
    return JetField(a.grid, a.grid.diff(a.coeffs, order))


def jet_shift(a):
    """Multiply by ``eps**2``: coefficient ``l`` moves to ``l + 1``."""
    c = np.zeros_like(a.coeffs)
    c[1:] = a.coeffs[:-1]
    return JetField(a.grid, c)


def _exp_series(a, scale, minus_one):
    grid = a.grid
    s = scale * a.coeffs
    out = np.zeros_like(s)
    out[0] = np.exp(s[0])
    # l e_l = sum_{j=1..l} j s_j e_{l-j}   (formal derivative in eps^2)
    for level in range(1, a.order + 1):
        acc = np.zeros_like(s[0])
        for j in range(1, level + 1):
            acc = acc + j * grid.product(s[j], out[level - j])
        out[level] = acc / level
    if minus_one:
        out[0] = np.expm1(s[0])
    return JetField(grid, out)


def jet_exp(a, scale=1.0):
    """``exp(scale * a)`` as a jet of the same order."""
    return _exp_series(a, scale, minus_one=False)


def jet_expm1(a, scale=1.0):
    """``exp(scale * a) - 1``; avoids the cancellation in coefficient 0."""
    return _exp_series(a, scale, minus_one=True)


def jet_shifted_mul(a, k, b):
    """``(a + k) * b`` with the constant part applied exactly."""
    return JetField(a.grid, k * b.coeffs) + jet_mul(a, b)


def jet_defect_swe(rj, uj, k, rj_T, uj_T):
    """Defect of the amplitude/wavenumber system on jets.

    Returns ``(D_r, D_u)`` with::

        D_r = r_T + d(u) + 2 (u + k) d(r)
        D_u = u_T + d((k + u)^2) - gamma d(exp(2 r)) - eps^2 (d3(r) + d(d(r)^2))

    where ``eps**2`` acts as a one-slot shift. When the first ``l`` levels
    satisfy the recursive linear equations, coefficients ``0..l`` vanish and
    coefficient ``l + 1`` (with that level still zero) is minus its forcing.
    """
    for other in (uj, rj_T, uj_T):
        _check(rj, other)
    rx = jet_derivative(rj, 1)
    d_r = rj_T + jet_derivative(uj, 1) + 2.0 * jet_shifted_mul(uj, k, rx)
    # (k + u)^2 - k^2 = 2 k u + u^2; the constant has no derivative
    flux = 2.0 * k * uj + jet_mul(uj, uj)
    dispersive = jet_derivative(rj, 3) + jet_derivative(jet_mul(rx, rx), 1)
    d_u = (uj_T + jet_derivative(flux, 1)
           - GAMMA * jet_derivative(jet_expm1(rj, 2.0), 1)
           - jet_shift(dispersive))
    return d_r, d_u
