"""Periodic grids, Fourier differentiation, quadrature and Sobolev norms.

Solvers work on raw numpy arrays through the :class:`Grid1D` methods (all
operate along the last axis, so batches of fields are transformed at once).
:class:`RealField` and :class:`ComplexField` are thin immutable wrappers used
at module boundaries.
"""
from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np

MAX_DERIVATIVE_ORDER = 4
MAX_SOBOLEV_INDEX = 8


def _is_power_of_two(n):
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid ``x_j = origin + j * length / points``."""

    length: float
    points: int
    origin: float = 0.0

    def __post_init__(self):
        if not (isinstance(self.points, (int, np.integer)) and self.points >= 8
                and _is_power_of_two(int(self.points))):
            raise ValueError(
                f"points must be a power of two >= 8, got {self.points!r}")
        if not (math.isfinite(self.length) and self.length > 0):
            raise ValueError(f"length must be positive, got {self.length!r}")
        object.__setattr__(self, "points", int(self.points))
        object.__setattr__(self, "length", float(self.length))
        object.__setattr__(self, "origin", float(self.origin))

    @property
    def spacing(self):
        return self.length / self.points

    @cached_property
    def x(self):
        x = self.origin + self.spacing * np.arange(self.points)
        x.flags.writeable = False
        return x

    @cached_property
    def wavenumbers(self):
        """Angular wavenumbers ``2*pi*j/length`` in FFT order."""
        k = 2 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)
        k.flags.writeable = False
        return k

    @cached_property
    def rwavenumbers(self):
        k = 2 * np.pi * np.fft.rfftfreq(self.points, d=self.spacing)
        k.flags.writeable = False
        return k

    @cached_property
    def _rweights(self):
        w = np.full(self.points // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w

    def _multiplier(self, order, real):
        k = self.rwavenumbers if real else self.wavenumbers
        m = (1j * k) ** order
        m[self.points // 2] = 0.0  # Nyquist mode dropped for every order
        return m

    # -- array-level operations ------------------------------------------

    def diff(self, values, order=1):
        """Fourier-multiplier derivative of ``values`` along the last axis."""
        if not isinstance(order, (int, np.integer)) or order < 1 \
                or order > MAX_DERIVATIVE_ORDER:
            raise ValueError(
                f"derivative order must be in 1..{MAX_DERIVATIVE_ORDER}, got {order!r}")
        values = np.asarray(values)
        if np.iscomplexobj(values):
            return np.fft.ifft(self._multiplier(order, False) * np.fft.fft(values))
        coeffs = np.fft.rfft(values) * self._multiplier(order, True)
        return np.fft.irfft(coeffs, n=self.points)

    def antiderivative(self, values, atol=1e-12):
        """Zero-mean periodic antiderivative; the input must have zero mean."""
        values = np.asarray(values, dtype=float)
        mean = values.mean(axis=-1)
        scale = max(1.0, float(np.max(np.abs(values), initial=0.0)))
        if np.any(np.abs(mean) > atol * scale):
            raise ValueError(
                "antiderivative of a field with nonzero mean is not periodic")
        coeffs = np.fft.rfft(values)
        k = self.rwavenumbers
        out = np.zeros_like(coeffs)
        out[..., 1:-1] = coeffs[..., 1:-1] / (1j * k[1:-1])
        return np.fft.irfft(out, n=self.points)

    def product(self, a, b):
        """Dealiased product via 3/2 zero padding (the 2/3 rule)."""
        n = self.points
        m = 3 * n // 2
        a = np.asarray(a)
        b = np.asarray(b)
        if np.iscomplexobj(a) or np.iscomplexobj(b):
            return self._complex_product(a, b)
        pa = np.zeros(a.shape[:-1] + (m // 2 + 1,), dtype=complex)
        pb = np.zeros(b.shape[:-1] + (m // 2 + 1,), dtype=complex)
        pa[..., :n // 2] = np.fft.rfft(a, norm="forward")[..., :n // 2]
        pb[..., :n // 2] = np.fft.rfft(b, norm="forward")[..., :n // 2]
        prod = np.fft.irfft(pa, n=m, norm="forward") * np.fft.irfft(pb, n=m, norm="forward")
        c = np.fft.rfft(prod, norm="forward")[..., :n // 2 + 1]
        c[..., n // 2] = 0.0
        return np.fft.irfft(c, n=n, norm="forward")

    def _complex_product(self, a, b):
        n = self.points
        m = 3 * n // 2
        h = n // 2

        def pad(v):
            c = np.fft.fft(np.asarray(v, dtype=complex), norm="forward")
            p = np.zeros(c.shape[:-1] + (m,), dtype=complex)
            p[..., :h] = c[..., :h]
            p[..., m - h + 1:] = c[..., h + 1:]
            return np.fft.ifft(p, norm="forward")

        c = np.fft.fft(pad(a) * pad(b), norm="forward")
        out = np.zeros(c.shape[:-1] + (n,), dtype=complex)
        out[..., :h] = c[..., :h]
        out[..., h + 1:] = c[..., m - h + 1:]
        return np.fft.ifft(out, norm="forward")

    def integrate(self, values):
        """Rectangle-rule integral over one period (last axis)."""
        return np.sum(values, axis=-1) * self.spacing

    def inner(self, a, b):
        return self.integrate(np.asarray(a) * np.asarray(b))

    def sobolev_norm(self, values, s=0):
        """``sqrt(sum_{j<=s} ||d^j f||^2)`` evaluated on the Fourier side."""
        if not isinstance(s, (int, np.integer)) or s < 0 or s > MAX_SOBOLEV_INDEX:
            raise ValueError(f"Sobolev index must be in 0..{MAX_SOBOLEV_INDEX}, got {s!r}")
        values = np.asarray(values)
        if np.iscomplexobj(values):
            c = np.fft.fft(values, norm="forward")
            power = np.abs(c) ** 2
            k2 = self.wavenumbers ** 2
            weights = np.ones(self.points)
        else:
            c = np.fft.rfft(values, norm="forward")
            power = np.abs(c) ** 2
            k2 = self.rwavenumbers ** 2
            weights = self._rweights
        base = weights * power
        total = np.sum(base, axis=-1)
        if s > 0:
            nyq = np.ones_like(k2)
            nyq[self.points // 2] = 0.0
            total = total + np.sum(
                base * nyq * sum(k2 ** j for j in range(1, s + 1)), axis=-1)
        return np.sqrt(self.length * total)

    def resample(self, values, points):
        """Fourier interpolation (``points`` larger) or low-pass projection."""
        n = self.points
        values = np.asarray(values)
        if points == n:
            return values.copy()
        if np.iscomplexobj(values):
            c = np.fft.fft(values, norm="forward")
            out = np.zeros(c.shape[:-1] + (points,), dtype=complex)
            h = min(n, points) // 2
            out[..., :h] = c[..., :h]
            out[..., points - h + 1:] = c[..., n - h + 1:]
            if points > n:
                out[..., h] = 0.5 * c[..., h]
                out[..., points - h] = 0.5 * c[..., h]
            else:
                out[..., h] = c[..., h] + c[..., n - h]
            return np.fft.ifft(out, norm="forward")
        c = np.fft.rfft(values, norm="forward")
        out = np.zeros(c.shape[:-1] + (points // 2 + 1,), dtype=complex)
        h = min(n, points) // 2
        out[..., :h] = c[..., :h]
        if points > n:
            out[..., h] = 0.5 * c[..., h]
        else:
            out[..., h] = 2 * c[..., h].real
        return np.fft.irfft(out, n=points, norm="forward")

    def refined(self, points):
        """Grid covering the same interval with ``points`` samples."""
        return Grid1D(self.length, points, self.origin)

    def describe(self):
        return f"length={self.length!r} points={self.points} origin={self.origin!r}"


class _Field:
    _dtype = float

    def __init__(self, grid, values):
        arr = np.array(values, dtype=self._dtype)
        if arr.shape != (grid.points,):
            raise ValueError(
                f"expected {grid.points} samples, got array of shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field values must be finite")
        arr.flags.writeable = False
        self._grid = grid
        self._values = arr

    @property
    def grid(self):
        return self._grid

    @property
    def values(self):
        return self._values

    @classmethod
    def from_function(cls, grid, func):
        return cls(grid, func(grid.x))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.points))

    def __repr__(self):
        return f"{type(self).__name__}({self._grid.describe()})"

    def _combine(self, other, op):
        if isinstance(other, _Field):
            _check_grids(self, other)
            other = other.values
        return type(self)(self._grid, op(self._values, other))

    def __add__(self, other):
        return self._combine(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, other):
        return self._combine(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return type(self)(self._grid, -self._values)


class RealField(_Field):
    _dtype = float

    def to_csv(self, path):
        header = f"grid {self.grid.describe()}\nx,value"
        np.savetxt(path, np.column_stack([self.grid.x, self.values]),
                   delimiter=",", header=header, comments="# ", fmt="%.17g")


class ComplexField(_Field):
    _dtype = complex

    @property
    def real(self):
        return RealField(self.grid, self.values.real)

    @property
    def imag(self):
        return RealField(self.grid, self.values.imag)

    def to_csv(self, path):
        header = f"grid {self.grid.describe()}\nx,re,im"
        np.savetxt(path, np.column_stack([self.grid.x, self.values.real, self.values.imag]),
                   delimiter=",", header=header, comments="# ", fmt="%.17g")


def _check_grids(f, g):
    if f.grid != g.grid:
        raise ValueError(f"grid mismatch: {f.grid} vs {g.grid}")


def read_field_csv(path):
    """Inverse of ``to_csv`` for both field kinds."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if not first.startswith("# grid "):
        raise ValueError(f"{path}: missing grid header line")
    meta = dict(item.split("=", 1) for item in first[len("# grid "):].split())
    grid = Grid1D(float(meta["length"]), int(meta["points"]), float(meta["origin"]))
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if data.shape[1] == 2:
        return RealField(grid, data[:, 1])
    return ComplexField(grid, data[:, 1] + 1j * data[:, 2])


def spectral_derivative(f, order=1):
    """Derivative of a field of either kind; ``order`` in 1..4."""
    return type(f)(f.grid, f.grid.diff(f.values, order))


def spectral_antiderivative(f):
    return RealField(f.grid, f.grid.antiderivative(f.values))


def dealiased_product(f, g):
    _check_grids(f, g)
    out = f.grid.product(f.values, g.values)
    if isinstance(f, ComplexField) or isinstance(g, ComplexField):
        return ComplexField(f.grid, out)
    return RealField(f.grid, out)


def l2_inner(f, g):
    _check_grids(f, g)
    return float(f.grid.inner(f.values, g.values))


def sobolev_norm(f, s=0):
    return float(f.grid.sobolev_norm(f.values, s))


def parseval_sum(f):
    """``||f||^2`` computed only from Fourier coefficients (Parseval check)."""
    c = np.fft.fft(f.values)
    return float(np.sum(np.abs(c) ** 2) * f.grid.length / f.grid.points ** 2)
