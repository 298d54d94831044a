"""Higher-order correction hierarchy, phase lift and residuals.

The corrections ``r_l, u_l`` (coefficients of ``eps**(2l)``) solve the
linearised modulation system with zero data, forced by terms built from the
lower levels. Those forcings are read off the jet defect of the exact
amplitude/wavenumber system rather than transcribed by hand; the hand-written
first-order formulas below are kept as an independent check.
"""
from dataclasses import dataclass
import math

import numpy as np

from .exceptions import ConsistencyError
from .field_core import RealField
from .jets import JetField, jet_defect_swe
from .wme import GAMMA, RK4_WEIGHTS, ModulationState, Trajectory, linearized_solve

MAX_ORDER = 3


@dataclass
class Hierarchy:
    n: int
    base: Trajectory
    levels: list
    forcings: list  # stage arrays (nsteps + 1, 4, 2, points), one per level

    @property
    def grid(self):
        return self.base.grid

    @property
    def k(self):
        return self.base.k

    @property
    def dt(self):
        return self.base.dt

    @property
    def nsteps(self):
        return self.base.nsteps

    @property
    def times(self):
        return self.base.times

    def _trajectories(self):
        return [self.base] + list(self.levels)

    def stage_coefficients(self):
        """``(values, slopes)`` of shape ``(n + 1, nsteps + 1, 4, 2, points)``."""
        trajs = self._trajectories()
        return (np.stack([t.stages for t in trajs]),
                np.stack([t.slopes for t in trajs]))

    @property
    def r_jet(self):
        """Jet time series at step times, batch axis = step."""
        return JetField(self.grid, np.stack([t.values[:, 0] for t in self._trajectories()]))

    @property
    def u_jet(self):
        return JetField(self.grid, np.stack([t.values[:, 1] for t in self._trajectories()]))

    def jets_at(self, T):
        """``(r_jet, u_jet)`` at time ``T`` (Hermite interpolation off-step)."""
        samples = np.stack([t.sample(T) for t in self._trajectories()])
        return JetField(self.grid, samples[:, 0]), JetField(self.grid, samples[:, 1])


def _combine(coeffs, eps):
    """``sum_l eps**(2l) coeffs[l]`` in ascending order."""
    out = coeffs[0].copy()
    for level in range(1, coeffs.shape[0]):
        out = out + eps ** (2 * level) * coeffs[level]
    return out


def level_forcing(grid, k, values, slopes, level):
    """Forcing ``(H_r, H_u)`` of ``level`` from the lower levels' stage data.

    ``values`` and ``slopes`` hold levels ``0..level-1`` along axis 0 with the
    variable axis (r, u) second to last.
    """
    shape = (level + 1,) + values.shape[1:]
    v = np.zeros(shape)
    s = np.zeros(shape)
    v[:level] = values[:level]
    s[:level] = slopes[:level]
    rj = JetField(grid, v[..., 0, :])
    uj = JetField(grid, v[..., 1, :])
    rj_T = JetField(grid, s[..., 0, :])
    uj_T = JetField(grid, s[..., 1, :])
    d_r, d_u = jet_defect_swe(rj, uj, k, rj_T, uj_T)
    return np.stack([-d_r.coeffs[level], -d_u.coeffs[level]], axis=-2)


def build_hierarchy(base, n, dt=None):
    """Solve the correction levels ``1..n`` on the base trajectory's stages."""
    if not isinstance(n, (int, np.integer)) or n < 0 or n > MAX_ORDER:
        raise ValueError(f"hierarchy order must be in 0..{MAX_ORDER}, got {n!r}")
    if dt is not None and abs(dt - base.dt) > 1e-12 * max(1.0, dt):
        raise ValueError(f"dt={dt!r} does not match the base trajectory step {base.dt!r}")
    grid = base.grid
    zero = RealField.zeros(grid)
    levels, forcings = [], []
    values = [base.stages]
    slopes = [base.slopes]
    for level in range(1, n + 1):
        h = level_forcing(grid, base.k, np.stack(values), np.stack(slopes), level)
        traj = linearized_solve(zero, zero, base, forcing=h)
        levels.append(traj)
        forcings.append(h)
        values.append(traj.stages)
        slopes.append(traj.slopes)
    return Hierarchy(int(n), base, levels, forcings)


def assemble(hier, eps, T):
    """Truncated series ``r + eps^2 r_1 + ...`` (and for ``u``) at time ``T``."""
    rj, uj = hier.jets_at(T)
    r = RealField(hier.grid, _combine(rj.coeffs, eps))
    u = RealField(hier.grid, _combine(uj.coeffs, eps))
    return ModulationState(T, r, u, hier.k)


# -- right-hand sides evaluated on assembled fields ---------------------------

def phase_rate(grid, k, eps, r, u):
    """Phase tendency defined from the amplitude equation (gamma = -1)::

        -(k + u)^2 + gamma exp(2r) - gamma + k^2 + eps^2 (r_XX + r_X^2)
    """
    rx = grid.diff(r, 1)
    return (-(2.0 * k * u + grid.product(u, u)) + GAMMA * np.expm1(2.0 * r)
            + eps**2 * (grid.diff(r, 2) + grid.product(rx, rx)))


def approximate_residuals(grid, k, eps, r, u, r_T, u_T):
    """Residuals of the truncated series in the perturbed modulation system."""
    rx = grid.diff(r, 1)
    res_r = r_T + grid.diff(u, 1) + 2.0 * k * rx + 2.0 * grid.product(u, rx)
    flux = 2.0 * k * u + grid.product(u, u) - GAMMA * np.expm1(2.0 * r)
    res_u = (u_T + grid.diff(flux, 1)
             - eps**2 * (grid.diff(r, 3) + grid.diff(grid.product(rx, rx), 1)))
    return res_r, res_u


@dataclass(frozen=True)
class PhaseState:
    T: float
    phi_hat: RealField
    A_hat: RealField


@dataclass
class PhaseTrajectory:
    """Lifted phase and the assembled fields at every step time.

    ``res_int`` is the running time integral of the ``u``-residual,
    accumulated with the same RK4 weights as ``phi``.
    """

    eps: float
    k: float
    grid: object
    dt: float
    phi: np.ndarray
    phi_rate: np.ndarray
    res_int: np.ndarray
    r_hat: np.ndarray
    u_hat: np.ndarray
    r_hat_T: np.ndarray
    u_hat_T: np.ndarray
    res_r: np.ndarray
    res_u: np.ndarray

    @property
    def times(self):
        return self.dt * np.arange(self.phi.shape[0])

    def state(self, j):
        return PhaseState(j * self.dt, RealField(self.grid, self.phi[j]),
                          RealField(self.grid, np.exp(self.r_hat[j])))

    def gradient_identity_defect(self):
        """``max |d_X phi - u_hat + int Res_u|`` over all steps and points."""
        gap = self.grid.diff(self.phi, 1) - self.u_hat + self.res_int
        return float(np.max(np.abs(gap)))


def lift_phase(hier, eps, phi0, dt=None):
    """Integrate the phase tendency along the assembled trajectory.

    The quadrature uses the hierarchy's own RK4 stages, so it is exactly the
    RK4 step for the phase appended to the joint system.
    """
    if dt is not None and abs(dt - hier.dt) > 1e-12 * max(1.0, dt):
        raise ValueError(f"dt={dt!r} does not match the hierarchy step {hier.dt!r}")
    if phi0.grid != hier.grid:
        raise ValueError("phi0 must live on the hierarchy grid")
    grid, k = hier.grid, hier.k
    values, slopes = hier.stage_coefficients()
    r = _combine(values[:, :, :, 0], eps)
    u = _combine(values[:, :, :, 1], eps)
    r_T = _combine(slopes[:, :, :, 0], eps)
    u_T = _combine(slopes[:, :, :, 1], eps)
    rate = phase_rate(grid, k, eps, r, u)
    res_r, res_u = approximate_residuals(grid, k, eps, r, u, r_T, u_T)

    w = RK4_WEIGHTS[None, :, None]
    nsteps = hier.nsteps
    phi = np.empty((nsteps + 1, grid.points))
    res_int = np.empty_like(phi)
    phi[0] = phi0.values
    res_int[0] = 0.0
    phi_incr = hier.dt * np.sum(w * rate[:nsteps], axis=1)
    res_incr = hier.dt * np.sum(w * res_u[:nsteps], axis=1)
    for j in range(nsteps):
        phi[j + 1] = phi[j] + phi_incr[j]
        res_int[j + 1] = res_int[j] + res_incr[j]
    if not np.all(np.isfinite(phi)):
        raise ConsistencyError("phase lift produced non-finite values")
    return PhaseTrajectory(eps, k, grid, hier.dt, phi, rate[:, 0], res_int,
                           r[:, 0], u[:, 0], r_T[:, 0], u_T[:, 0],
                           res_r[:, 0], res_u[:, 0])


# -- residuals of the amplitude/phase system ----------------------------------

@dataclass
class ResidualSeries:
    """Residual time series computed by two independent routes.

    ``formula`` uses the series residuals and their time integrals;
    ``defect`` substitutes the lifted amplitude and phase into the
    amplitude/phase equations. Each maps ``"phi"``, ``"r"``, ``"A"`` to arrays
    of shape ``(steps, points)``.
    """

    eps: float
    times: np.ndarray
    formula: dict
    defect: dict
    norms: dict  # H^1 size of Res_A + Res_phi per step, per route; plus "defect_H2"
    disagreement: float  # max_T ||formula - defect||_{H^1} / max_T ||defect||_{H^1}

    @property
    def sup_norm(self):
        return float(np.max(self.norms["defect"]))


def formula_residuals(grid, k, phase):
    I = phase.res_int
    r, u = phase.r_hat, phase.u_hat
    res_phi = -2.0 * k * I - grid.product(2.0 * u - I, I)
    res_r = phase.res_r - grid.diff(I, 1) - 2.0 * grid.product(grid.diff(r, 1), I)
    res_A = grid.product(np.exp(r), res_r)
    return {"phi": res_phi, "r": res_r, "A": res_A}


def defect_residuals(grid, k, eps, phase):
    r = phase.r_hat
    A = np.exp(r)
    A_T = A * phase.r_hat_T
    phi = phase.phi
    phi_x = grid.diff(phi, 1)
    phi_xx = grid.diff(phi, 2)
    A_x = grid.diff(A, 1)
    A_xx = grid.diff(A, 2)
    # (k + phi_X)^2 - k^2 - gamma (A^2 - 1) - eps^2 A_XX / A
    res_phi = (phase.phi_rate + 2.0 * k * phi_x + grid.product(phi_x, phi_x)
               - GAMMA * (A * A - 1.0) - eps**2 * A_xx / A)
    res_A = A_T + 2.0 * k * A_x + 2.0 * grid.product(phi_x, A_x) + grid.product(A, phi_xx)
    rx = grid.diff(r, 1)
    res_r = phase.r_hat_T + 2.0 * k * rx + 2.0 * grid.product(phi_x, rx) + phi_xx
    return {"phi": res_phi, "r": res_r, "A": res_A}


def residuals(hier, phase, eps, rtol=1e-6, atol=1e-10):
    """Residuals of the lifted approximation, by formula and by direct defect.

    Raises :class:`ConsistencyError` when the two routes differ by more than
    ``rtol`` times the largest residual (plus ``atol``) in ``H^1``.
    """
    if abs(phase.eps - eps) > 0 or phase.grid != hier.grid or phase.phi.shape[0] != hier.nsteps + 1:
        raise ValueError("phase trajectory does not match the hierarchy / eps")
    grid = hier.grid
    formula = formula_residuals(grid, hier.k, phase)
    defect = defect_residuals(grid, hier.k, eps, phase)
    norms = {
        name: grid.sobolev_norm(route["A"], 1) + grid.sobolev_norm(route["phi"], 1)
        for name, route in (("formula", formula), ("defect", defect))
    }
    norms["defect_H2"] = grid.sobolev_norm(defect["A"], 2) + grid.sobolev_norm(defect["phi"], 2)
    gap = (grid.sobolev_norm(formula["A"] - defect["A"], 1)
           + grid.sobolev_norm(formula["phi"] - defect["phi"], 1))
    scale = float(np.max(norms["defect"]))
    disagreement = float(np.max(gap)) / scale if scale > 0 else float(np.max(gap))
    if float(np.max(gap)) > rtol * scale + atol:
        raise ConsistencyError(
            f"formula and defect residuals disagree: max H^1 gap {np.max(gap):.3e} "
            f"vs residual size {scale:.3e}")
    return ResidualSeries(eps, hier.times, formula, defect, norms, disagreement)


# -- hand-transcribed first-order formulas (independent oracles) --------------

def hand_forcing_h0(grid, r):
    """First-level forcing ``(0, r_XXX + ((r_X)^2)_X)``."""
    rx = grid.diff(r, 1)
    return np.zeros_like(r), grid.diff(r, 3) + grid.diff(grid.product(rx, rx), 1)


def _phi2(x):
    """``(exp(x) - 1 - x) / x^2`` without cancellation near zero."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-2
    xs = np.where(small, x, 0.0)
    series = 0.5 + xs / 6 + xs**2 / 24 + xs**3 / 120 + xs**4 / 720
    xl = np.where(small, 1.0, x)
    direct = (np.expm1(xl) - xl) / xl**2
    return np.where(small, series, direct)


def hand_residual_r1(grid, r, r1, u1, eps):
    """First-order residual profiles ``(R_1r, R_1u)`` for gamma = -1.

    The n = 1 series residuals equal ``eps**4`` times these, and at
    ``eps = 0`` their negatives are the second-level forcing.
    """
    rx = grid.diff(r, 1)
    r1x = grid.diff(r1, 1)
    R1r = 2.0 * grid.product(u1, r1x)
    # eps^-4 (exp(2 eps^2 r1) - 1 - 2 eps^2 r1) = 4 r1^2 phi2(2 eps^2 r1)
    remainder = 4.0 * grid.product(r1, r1) * _phi2(2.0 * eps**2 * r1)
    R1u = (2.0 * grid.product(u1, grid.diff(u1, 1))
           - GAMMA * grid.diff(grid.product(np.exp(2.0 * r), remainder), 1)
           - grid.diff(r1, 3) - 2.0 * grid.diff(grid.product(rx, r1x), 1)
           - eps**2 * grid.diff(grid.product(r1x, r1x), 1))
    return R1r, R1u


def spectral_tail_ratio(grid, values, fraction=1.0 / 3.0):
    """Largest Fourier amplitude in the top ``fraction`` of the band over the peak."""
    c = np.abs(np.fft.rfft(values, axis=-1))
    cut = int(math.floor((1 - fraction) * c.shape[-1]))
    peak = float(np.max(c))
    return float(np.max(c[..., cut:])) / peak if peak > 0 else 0.0
