"""Defocusing cubic NLS on the fast grid and the deviation from the modulated wavetrain.

``i psi_t + psi_xx + gamma |psi|^2 psi = 0`` with ``gamma = -1``, plane waves
``exp(i(kx + omega t))`` with ``omega = -k^2 - 1``. Slow variables are
``X = eps x``, ``T = eps t``; the slow domain ``[origin, origin + L)`` maps to
the fast domain of length ``L / eps``.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .exceptions import AliasingError, BlowUpError
from .field_core import ComplexField, Grid1D, RealField

GAMMA = -1.0
MIN_POINTS_PER_WAVELENGTH = 16
ALIASING_FRACTION = 0.01
ALIASING_FLOOR = 1e-10


@dataclass(frozen=True)
class WaveParams:
    k: float
    omega: float = None
    gamma: float = GAMMA
    Psi0: float = 1.0

    def __post_init__(self):
        if self.gamma != GAMMA:
            raise ValueError("only the defocusing case gamma = -1 is supported")
        if self.Psi0 != 1.0:
            raise ValueError("the wavetrain amplitude is normalised to Psi0 = 1")
        omega = -self.k**2 - 1.0 if self.omega is None else float(self.omega)
        if abs(self.gamma * self.Psi0**2 - (omega + self.k**2)) > 1e-12 * max(1.0, self.k**2):
            raise ValueError(
                f"omega={omega!r} violates the dispersion relation omega = -k^2 - 1")
        object.__setattr__(self, "omega", omega)


@dataclass(frozen=True)
class NlsState:
    t: float
    psi: ComplexField

    @property
    def grid(self):
        return self.psi.grid


@dataclass(frozen=True)
class DeviationState:
    T: float
    W1: RealField
    W2: RealField

    @property
    def grid(self):
        return self.W1.grid

    @property
    def values(self):
        return self.W1.values + 1j * self.W2.values

    def h1_norm(self):
        return float(self.grid.sobolev_norm(self.values, 1))

    def sup_norm(self):
        return float(np.max(np.abs(self.values)))


# -- grids -------------------------------------------------------------------

def fast_grid(slow_grid, eps, points):
    """Fast grid covering the slow domain stretched by ``1 / eps``."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    return Grid1D(slow_grid.length / eps, points, slow_grid.origin / eps)


def nearest_admissible_k(k, length):
    step = 2.0 * np.pi / length
    return round(k / step) * step


def check_carrier(k, grid):
    """Reject carriers off the lattice ``2 pi Z / L`` or under-resolved ones."""
    m = k * grid.length / (2.0 * np.pi)
    if abs(m - round(m)) > 1e-9 * max(1.0, abs(m)):
        raise ValueError(
            f"carrier k={k!r} is not periodic on a fast domain of length {grid.length!r}; "
            f"nearest admissible k is {nearest_admissible_k(k, grid.length)!r}")
    if k != 0 and grid.spacing > 2.0 * np.pi / (MIN_POINTS_PER_WAVELENGTH * abs(k)):
        raise ValueError(
            f"fast grid spacing {grid.spacing:.4g} resolves the carrier k={k!r} with fewer "
            f"than {MIN_POINTS_PER_WAVELENGTH} points per wavelength")


def _carrier_phase(params, grid, t):
    return params.omega * t + params.k * grid.x


# -- initial data and time stepping -------------------------------------------

def nls_init(r0, phi0, params, eps, points):
    """Modulated wavetrain ``exp(r0(eps x)) exp(i (k x + phi0(eps x) / eps))``."""
    slow = r0.grid
    if phi0.grid != slow:
        raise ValueError("r0 and phi0 must share the slow grid")
    if points < slow.points:
        raise ValueError(f"fast grid ({points}) must not be coarser than the slow grid ({slow.points})")
    grid = fast_grid(slow, eps, points)
    check_carrier(params.k, grid)
    r = slow.resample(r0.values, points)
    phi = slow.resample(phi0.values, points)
    psi = np.exp(r) * np.exp(1j * (_carrier_phase(params, grid, 0.0) + phi / eps))
    return NlsState(0.0, ComplexField(grid, psi))


def _half_rotation(psi, tau):
    return psi * np.exp(1j * GAMMA * np.abs(psi) ** 2 * tau)


def nls_step(s, dt):
    """One Strang step: half nonlinear rotation, linear flow, half rotation."""
    grid = s.grid
    psi = _half_rotation(s.psi.values, 0.5 * dt)
    psi = np.fft.ifft(np.exp(-1j * grid.wavenumbers**2 * dt) * np.fft.fft(psi))
    psi = _half_rotation(psi, 0.5 * dt)
    if not np.all(np.isfinite(psi)):
        raise BlowUpError(f"non-finite NLS field at t={s.t + dt:.6g}")
    return NlsState(s.t + dt, ComplexField(grid, psi))


def nls_evolve(s, dt, nsteps, every=None):
    """Advance ``nsteps`` Strang steps; returns states every ``every`` steps.

    Adjacent half rotations between outputs are merged into one full
    rotation (the rotation flow is exact, so this changes nothing but cost).
    """
    every = nsteps if every is None else every
    if every <= 0 or nsteps % every:
        raise ValueError(f"output stride {every} must divide the step count {nsteps}")
    grid = s.grid
    propagator = np.exp(-1j * grid.wavenumbers**2 * dt)
    psi = s.psi.values.copy()
    t0 = s.t
    out = [s]
    for block in range(nsteps // every):
        psi = _half_rotation(psi, 0.5 * dt)
        for i in range(every):
            psi = np.fft.ifft(propagator * np.fft.fft(psi))
            psi = _half_rotation(psi, dt if i < every - 1 else 0.5 * dt)
        if not np.all(np.isfinite(psi)):
            raise BlowUpError(f"non-finite NLS field after block {block + 1}")
        out.append(NlsState(t0 + (block + 1) * every * dt, ComplexField(grid, psi)))
    return out


def nls_rhs(grid, psi):
    """``psi_t = i (psi_xx + gamma |psi|^2 psi)``."""
    return 1j * (grid.diff(psi, 2) + GAMMA * np.abs(psi) ** 2 * psi)


def mass(s):
    return float(s.grid.integrate(np.abs(s.psi.values) ** 2))


# -- deviation from the approximation ----------------------------------------

def _to_slow(fast, slow_points, what):
    """Low-pass projection of a slowly varying fast-grid field onto the slow band."""
    c = np.fft.fft(fast, norm="forward")
    h = slow_points // 2
    band = np.zeros(fast.shape[-1], dtype=bool)
    band[:h] = True
    band[fast.shape[-1] - h + 1:] = True
    total = float(np.sqrt(np.sum(np.abs(c) ** 2)))
    outside = float(np.sqrt(np.sum(np.abs(c[~band]) ** 2)))
    if outside > max(ALIASING_FRACTION * total, ALIASING_FLOOR):
        raise AliasingError(
            f"{what}: {outside / total:.2%} of the field lies above the slow band "
            f"(limit {ALIASING_FRACTION:.0%}); refine the slow grid or the time step")
    out = np.zeros(slow_points, dtype=complex)
    out[:h] = c[:h]
    out[slow_points - h + 1:] = c[fast.shape[-1] - h + 1:]
    return np.fft.ifft(out, norm="forward")


def approximate_wave(A_hat, phi_hat, params, eps, grid, t):
    """``Psi_hat = A_hat(eps x) exp(i (omega t + k x + phi_hat(eps x) / eps))``."""
    slow = A_hat.grid
    A = slow.resample(A_hat.values, grid.points)
    phi = slow.resample(phi_hat.values, grid.points)
    return A * np.exp(1j * (_carrier_phase(params, grid, t) + phi / eps))


def extract_W(psi, A_hat, phi_hat, params, eps):
    """Deviation ``W = V - 1`` where ``psi = Psi_hat V``, on the slow grid.

    ``phi_hat`` is the slow phase correction: the full phase is
    ``Theta_hat = omega T + k X + phi_hat`` (passed this way because
    ``Theta_hat`` itself is not periodic). ``V - 1`` equals
    ``(psi - Psi_hat) exp(-i Theta_hat / eps) / A_hat``.
    """
    slow = A_hat.grid
    grid = psi.grid
    if phi_hat.grid != slow:
        raise ValueError("A_hat and phi_hat must share the slow grid")
    if abs(grid.length * eps - slow.length) > 1e-9 * slow.length:
        raise ValueError("NLS grid is not the slow grid stretched by 1/eps")
    A = slow.resample(A_hat.values, grid.points)
    phi = slow.resample(phi_hat.values, grid.points)
    demod = psi.psi.values * np.exp(-1j * (_carrier_phase(params, grid, psi.t) + phi / eps))
    W = _to_slow(demod / A - 1.0, slow.points, "deviation W")
    return DeviationState(eps * psi.t, RealField(slow, W.real), RealField(slow, W.imag))


def validity_energy(d, r_hat, eps):
    """``||exp(r) W_X||^2 + 2 eps^-2 ||exp(2r) W_1||^2`` on the slow grid."""
    grid = d.grid
    if r_hat.grid != grid:
        raise ValueError("r_hat must live on the deviation grid")
    r = r_hat.values
    wx = grid.diff(d.values, 1)
    grad = grid.integrate(np.exp(2 * r) * np.abs(wx) ** 2)
    w1 = grid.integrate(np.exp(4 * r) * d.W1.values ** 2)
    return float(grad + 2.0 * w1 / eps**2)


def w_equation_defect(psi, A_hat, phi_hat, r_T, phi_T, res_A, res_phi, params, eps):
    """Defect of the complex deviation equation at one instant.

    Substitutes ``V`` (from the NLS field) and ``V_T`` (from the NLS
    right-hand side and the approximation's time derivative) into::

        i V_T + eps V_XX + 2 i (k + phi_X) V_X + 2 eps r_X V_X
            + gamma exp(2r) V (|V|^2 - 1) / eps + (i exp(-r) Res_A - Res_phi / eps) V

    Returns ``(defect_L2, scale_L2)`` with ``scale`` the size of the largest
    single term, so their ratio measures the relative consistency.
    """
    slow = A_hat.grid
    grid = psi.grid
    A = slow.resample(A_hat.values, grid.points)
    phi = slow.resample(phi_hat.values, grid.points)
    carrier = np.exp(-1j * (_carrier_phase(params, grid, psi.t) + phi / eps))
    p = psi.psi.values
    V = _to_slow(p * carrier / A, slow.points, "V")
    # Psi_T = eps^-1 psi_t in slow time; divided by Psi_hat
    ratio_T = _to_slow(nls_rhs(grid, p) * carrier / A / eps, slow.points, "V_T")
    r = np.log(A_hat.values)
    V_T = ratio_T - V * (r_T + 1j * (params.omega + phi_T) / eps)
    V_X = slow.diff(V, 1)
    phi_X = slow.diff(phi_hat.values, 1)
    terms = [
        1j * V_T,
        eps * slow.diff(V, 2),
        2j * (params.k + phi_X) * V_X,
        2.0 * eps * slow.diff(r, 1) * V_X,
        GAMMA * np.exp(2 * r) * V * (np.abs(V) ** 2 - 1.0) / eps,
        (1j * np.exp(-r) * res_A - res_phi / eps) * V,
    ]
    defect = sum(terms)
    scale = max(float(slow.sobolev_norm(t, 0)) for t in terms)
    return float(slow.sobolev_norm(defect, 0)), scale


# -- linearisation about the wavetrain ----------------------------------------

def wavetrain_matrix(xi, k, gamma=GAMMA):
    """Fourier symbol of the linearised wavetrain system for ``(W_1, W_2)``."""
    xi = float(xi)
    return np.array([[-2j * k * xi, xi**2],
                     [-xi**2 + 2 * gamma, -2j * k * xi]])


def wavetrain_eigenvalues(xis, k, gamma=GAMMA):
    return np.array([np.linalg.eigvals(wavetrain_matrix(x, k, gamma)) for x in xis])


def jordan_defect(k=0.0, gamma=GAMMA, tol=1e-12):
    """True when the zero mode is a nontrivial Jordan cell.

    The double eigenvalue ``0`` of the symbol at ``xi = 0`` has a
    one-dimensional eigenspace iff ``rank(M - 0 I) = 1``.
    """
    m = wavetrain_matrix(0.0, k, gamma)
    eig = np.linalg.eigvals(m)
    return bool(np.all(np.abs(eig) < tol) and np.linalg.matrix_rank(m, tol=tol) == 1)


@dataclass
class WavetrainRun:
    times: np.ndarray
    W: np.ndarray  # complex (steps, points): W_1 + i W_2
    conserved: np.ndarray
    grid: object = field(repr=False)

    @property
    def w2_norms(self):
        return self.grid.sobolev_norm(self.W.imag, 0)

    @property
    def gradient_norms(self):
        wx = self.grid.diff(self.W, 1)
        return np.sqrt(self.grid.integrate(np.abs(wx) ** 2))


def wavetrain_conserved(grid, W, gamma=GAMMA):
    """``||W_X||^2 - 2 gamma ||W_1||^2``."""
    wx = grid.diff(W, 1)
    return grid.integrate(np.abs(wx) ** 2) - 2.0 * gamma * grid.integrate(W.real**2)


def _propagator(grid, k, t, gamma=GAMMA):
    """``exp(M(xi) t)`` for every grid wavenumber, shape ``(points, 2, 2)``."""
    xi = grid.wavenumbers
    omega2 = xi**2 * (xi**2 - 2 * gamma)
    om = np.sqrt(omega2)
    # t sinc(om t) -> t as om -> 0 (the Jordan cell)
    s = t * np.sinc(om * t / np.pi)
    c = np.cos(om * t)
    rot = np.exp(-2j * k * xi * t)
    P = np.empty((grid.points, 2, 2), dtype=complex)
    P[:, 0, 0] = c
    P[:, 0, 1] = s * xi**2
    P[:, 1, 0] = s * (-xi**2 + 2 * gamma)
    P[:, 1, 1] = c
    return P * rot[:, None, None]


def wavetrain_linearized(W0, params, t_final, dt):
    """Exact modal solution of the linearised wavetrain system.

    ``W0`` is a complex field ``W_1 + i W_2``; the solution is sampled at
    multiples of ``dt`` up to ``t_final``.
    """
    grid = W0.grid
    nsteps = int(round(t_final / dt))
    if nsteps <= 0 or abs(nsteps * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise ValueError(f"dt={dt!r} must divide t_final={t_final!r}")
    c1 = np.fft.fft(W0.values.real)
    c2 = np.fft.fft(W0.values.imag)
    times = dt * np.arange(nsteps + 1)
    W = np.empty((nsteps + 1, grid.points), dtype=complex)
    for j, t in enumerate(times):
        P = _propagator(grid, params.k, t, params.gamma)
        w1 = np.fft.ifft(P[:, 0, 0] * c1 + P[:, 0, 1] * c2)
        w2 = np.fft.ifft(P[:, 1, 0] * c1 + P[:, 1, 1] * c2)
        # real initial components stay real: keep only the real parts
        W[j] = w1.real + 1j * w2.real
    return WavetrainRun(times, W, wavetrain_conserved(grid, W, params.gamma), grid)


def modal_envelope(W0, gamma=GAMMA):
    """Bound on ``||W_2(t)||`` for all ``t`` when ``W_1(0)`` has zero mean.

    For ``xi != 0`` each mode conserves ``(xi^2 - 2 gamma)|a|^2 + xi^2 |b|^2``
    (``a``, ``b`` the modes of ``W_1``, ``W_2``), which caps ``|b(t)|``.
    """
    grid = W0.grid
    n = grid.points
    a = np.fft.fft(W0.values.real) / n
    b = np.fft.fft(W0.values.imag) / n
    xi = grid.wavenumbers
    nz = xi != 0
    cap = np.abs(b) ** 2
    cap[nz] += (xi[nz] ** 2 - 2 * gamma) / xi[nz] ** 2 * np.abs(a[nz]) ** 2
    return math.sqrt(grid.length * float(np.sum(cap)))
