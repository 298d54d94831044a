"""Shallow-water form of the Whitham modulation equations.

Nonlinear system in ``(r, u)`` with ``A = exp(r)`` and ``gamma = -1``::

    r_T = -u_X - 2 (u + k) r_X
    u_T = -((u + k)^2)_X - (exp(2 r))_X

and its linearisation about a background trajectory, both advanced with
classical RK4. Every RK stage state and stage slope is kept so that systems
driven by a trajectory (correction levels, the phase quadrature) can be
advanced on exactly the same stages, which makes the combined scheme one RK4
method for the joint lower-triangular system.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .exceptions import BlowUpError
from .field_core import RealField

GAMMA = -1.0
RK4_NODES = (0.0, 0.5, 0.5, 1.0)
RK4_WEIGHTS = np.array([1.0, 2.0, 2.0, 1.0]) / 6.0
CFL_MAX = 0.5


@dataclass(frozen=True)
class ModulationState:
    T: float
    r: RealField
    u: RealField
    k: float
    gamma: float = field(default=GAMMA)

    def __post_init__(self):
        if self.gamma != GAMMA:
            raise ValueError("only the defocusing case gamma = -1 is supported")
        if self.r.grid != self.u.grid:
            raise ValueError("r and u must share a grid")

    @property
    def grid(self):
        return self.r.grid

    @property
    def amplitude(self):
        return RealField(self.grid, np.exp(self.r.values))


@dataclass(frozen=True)
class LinearizedState:
    T: float
    R: RealField
    U: RealField


@dataclass
class Trajectory:
    """RK4 trajectory with every stage kept.

    ``stages[j, i]`` is the state at stage ``i`` of step ``j`` (stage 0 is the
    state at ``times[j]``) and ``slopes[j, i]`` the right-hand side there. The
    last row holds only the final state (repeated) and its slope.
    """

    grid: object
    k: float
    dt: float
    stages: np.ndarray  # (nsteps + 1, 4, 2, points)
    slopes: np.ndarray
    names: tuple = ("r", "u")

    @property
    def nsteps(self):
        return self.stages.shape[0] - 1

    @property
    def times(self):
        return self.dt * np.arange(self.nsteps + 1)

    @property
    def T_final(self):
        return self.dt * self.nsteps

    @property
    def values(self):
        """Step states, shape ``(nsteps + 1, 2, points)``."""
        return self.stages[:, 0]

    @property
    def rates(self):
        return self.slopes[:, 0]

    def index_of(self, T, tol=1e-9):
        """Step index at time ``T``; ``None`` if ``T`` is between steps."""
        if T < -tol * max(1.0, self.dt) or T > self.T_final + tol * max(1.0, self.dt):
            raise ValueError(
                f"T={T!r} outside trajectory range [0, {self.T_final!r}]")
        j = int(round(T / self.dt)) if self.dt > 0 else 0
        if abs(j * self.dt - T) <= tol * max(1.0, self.dt):
            return min(max(j, 0), self.nsteps)
        return None

    def sample(self, T):
        """State at ``T``: stored value on steps, cubic Hermite in between."""
        j = self.index_of(T)
        if j is not None:
            return self.values[j].copy()
        j = min(int(T // self.dt), self.nsteps - 1)
        s = (T - j * self.dt) / self.dt
        y0, y1 = self.values[j], self.values[j + 1]
        m0, m1 = self.rates[j], self.rates[j + 1]
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return h00 * y0 + h10 * self.dt * m0 + h01 * y1 + h11 * self.dt * m1

    def state(self, j):
        T = j * self.dt
        a, b = (RealField(self.grid, v) for v in self.values[j])
        if self.names == ("r", "u"):
            return ModulationState(T, a, b, self.k)
        return LinearizedState(T, a, b)

    def state_at(self, T):
        a, b = (RealField(self.grid, v) for v in self.sample(T))
        if self.names == ("r", "u"):
            return ModulationState(T, a, b, self.k)
        return LinearizedState(T, a, b)

    def __len__(self):
        return self.nsteps + 1

    def __iter__(self):
        return (self.state(j) for j in range(self.nsteps + 1))


def rk4_with_stages(rhs, y0, dt, nsteps, on_step=None):
    """Classical RK4 keeping stage states and slopes.

    ``rhs(step, stage, y)`` returns the slope; ``on_step(step, y)`` may raise
    to abort.
    """
    y = np.array(y0, dtype=float)
    stages = np.empty((nsteps + 1, 4) + y.shape)
    slopes = np.empty_like(stages)
    for j in range(nsteps):
        k1 = rhs(j, 0, y)
        y2 = y + 0.5 * dt * k1
        k2 = rhs(j, 1, y2)
        y3 = y + 0.5 * dt * k2
        k3 = rhs(j, 2, y3)
        y4 = y + dt * k3
        k4 = rhs(j, 3, y4)
        stages[j] = (y, y2, y3, y4)
        slopes[j] = (k1, k2, k3, k4)
        y = y + dt * (RK4_WEIGHTS[0] * k1 + RK4_WEIGHTS[1] * k2
                      + RK4_WEIGHTS[2] * k3 + RK4_WEIGHTS[3] * k4)
        if not np.all(np.isfinite(y)):
            raise BlowUpError(f"non-finite values at step {j + 1}", step=j + 1)
        if on_step is not None:
            on_step(j + 1, y)
    stages[nsteps] = y
    slopes[nsteps] = rhs(nsteps, 0, y)
    return stages, slopes


def _steps_for(T_final, dt):
    if T_final < 0:
        raise ValueError(f"T_final must be nonnegative, got {T_final!r}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    nsteps = int(round(T_final / dt))
    if abs(nsteps * dt - T_final) > 1e-9 * max(1.0, T_final):
        nsteps = int(math.ceil(T_final / dt))
    return nsteps, (T_final / nsteps if nsteps else dt)


# -- nonlinear system --------------------------------------------------------

def wme_rhs_arrays(grid, k, r, u):
    rx = grid.diff(r, 1)
    dr = -grid.diff(u, 1) - 2.0 * k * rx - 2.0 * grid.product(u, rx)
    # (u + k)^2 - k^2 and exp(2r) - 1 keep the flux free of O(1) constants
    flux = 2.0 * k * u + grid.product(u, u) + np.expm1(2.0 * r)
    du = -grid.diff(flux, 1)
    return dr, du


def wme_rhs(s):
    """Tendencies ``(r_T, u_T)`` of the modulation system at state ``s``."""
    dr, du = wme_rhs_arrays(s.grid, s.k, s.r.values, s.u.values)
    return RealField(s.grid, dr), RealField(s.grid, du)


def characteristic_speed_bound(k, r, u):
    return float(np.max(2.0 * np.abs(u + k)) + 2.0 * np.exp(np.max(r)))


def cfl_limit(grid, k, r, u, cfl=CFL_MAX):
    return cfl * grid.spacing / characteristic_speed_bound(k, r, u)


def h2_size(grid, r, u):
    return float(np.hypot(grid.sobolev_norm(r, 2), grid.sobolev_norm(u, 2)))


def wme_integrate(s0, T_final, dt, growth_limit=2.0):
    """RK4 trajectory of the modulation system from ``s0``.

    ``dt`` is shrunk if needed so that it divides ``T_final``. Raises
    ``ValueError`` when ``dt`` exceeds the advective CFL bound and
    :class:`BlowUpError` on non-finite values or when the ``H^2`` size of
    ``(r, u)`` exceeds ``growth_limit`` times its initial value.
    """
    grid, k = s0.grid, s0.k
    r0, u0 = s0.r.values, s0.u.values
    cap = cfl_limit(grid, k, r0, u0)
    if dt > cap * (1 + 1e-12):
        raise ValueError(f"dt={dt!r} violates the CFL bound {cap!r}")
    nsteps, dt = _steps_for(T_final, dt)
    size0 = h2_size(grid, r0, u0)

    def rhs(step, stage, y):
        return np.stack(wme_rhs_arrays(grid, k, y[0], y[1]))

    def monitor(step, y):
        if size0 > 0 and h2_size(grid, y[0], y[1]) > growth_limit * size0:
            raise BlowUpError(
                f"H^2 norm of (r, u) grew past {growth_limit}x its initial value at "
                f"step {step} (T={step * dt:.6g}); close to gradient blow-up",
                step=step)

    stages, slopes = rk4_with_stages(rhs, np.stack([r0, u0]), dt, nsteps, monitor)
    return Trajectory(grid, k, dt, stages, slopes)


def energy_density(r, u):
    return np.exp(2.0 * r) * u**2 + 0.5 * np.expm1(2.0 * r) ** 2


def wme_energy(s):
    """``int exp(2r) u^2 + (exp(2r) - 1)^2 / 2 dX``."""
    return float(s.grid.integrate(energy_density(s.r.values, s.u.values)))


def trajectory_energy(traj):
    v = traj.values
    return traj.grid.integrate(energy_density(v[:, 0], v[:, 1]))


# -- linearised system -------------------------------------------------------

def linearized_rhs_arrays(grid, k, r, u, R, U):
    rx = grid.diff(r, 1)
    Rx = grid.diff(R, 1)
    dR = (-grid.diff(U, 1) - 2.0 * grid.product(U, rx)
          - 2.0 * k * Rx - 2.0 * grid.product(u, Rx))
    dU = (-2.0 * grid.diff(k * U + grid.product(u, U), 1)
          - 2.0 * grid.diff(grid.product(np.exp(2.0 * r), R), 1))
    return dR, dU


def _forcing_lookup(forcing, background):
    """Normalise the forcing argument to ``f(step, stage) -> array | None``."""
    if forcing is None:
        return lambda step, stage: None
    if callable(forcing):
        dt = background.dt

        def from_callable(step, stage):
            hr, hu = forcing((step + RK4_NODES[stage]) * dt)
            return np.stack([np.asarray(hr, float), np.asarray(hu, float)])
        return from_callable
    arr = np.asarray(forcing, dtype=float)
    expected = (background.nsteps + 1, 4, 2, background.grid.points)
    if arr.shape != expected:
        raise ValueError(f"forcing array has shape {arr.shape}, expected {expected}")
    return lambda step, stage: arr[step, stage]


def linearized_solve(R0, U0, background, forcing=None, T_final=None, dt=None):
    """RK4 solution of the linearised system about ``background``.

    ``forcing`` is ``None``, a stage array of shape
    ``(nsteps + 1, 4, 2, points)`` holding ``(H_r, H_u)``, or a callable
    ``T -> (H_r, H_u)``. The solve runs on the background's own step and
    stage lattice, so ``T_final`` and ``dt`` (if given) must match it.
    """
    grid, k = background.grid, background.k
    if T_final is not None and abs(T_final - background.T_final) > 1e-9 * max(1.0, T_final):
        raise ValueError(
            f"T_final={T_final!r} does not match the background ({background.T_final!r})")
    if dt is not None and abs(dt - background.dt) > 1e-12 * max(1.0, dt):
        raise ValueError(f"dt={dt!r} does not match the background step {background.dt!r}")
    for f in (R0, U0):
        if f.grid != grid:
            raise ValueError("initial data must live on the background grid")
    lookup = _forcing_lookup(forcing, background)
    bg = background.stages

    def rhs(step, stage, y):
        r, u = bg[step, stage]
        dR, dU = linearized_rhs_arrays(grid, k, r, u, y[0], y[1])
        h = lookup(step, stage)
        if h is not None:
            dR = dR + h[0]
            dU = dU + h[1]
        return np.stack([dR, dU])

    y0 = np.stack([R0.values, U0.values])
    stages, slopes = rk4_with_stages(rhs, y0, background.dt, background.nsteps)
    return Trajectory(grid, k, background.dt, stages, slopes, names=("R", "U"))


def linearized_energy_density(r, R, U):
    return np.exp(2.0 * r) * U**2 + 2.0 * np.exp(4.0 * r) * R**2


def linearized_energy(R, U, background):
    """``int exp(2r) U^2 + 2 exp(4r) R^2 dX`` about a background state."""
    grid = background.grid
    return float(grid.integrate(linearized_energy_density(background.r.values, R.values, U.values)))


def gronwall_constants(background):
    """Constants ``(K_hom, K, C)`` of the energy inequality along a background.

    From the exact energy identity for the linearised system:
    ``dE/dT <= K_hom E`` without forcing and
    ``dE/dT <= K E + C (||H_r||^2 + ||H_u||^2)`` with it, where
    ``K_hom = 4 max|u_X|``, ``K = K_hom + 1`` and
    ``C = max(exp(2 max r), 2 exp(4 max r))``.
    """
    v = background.values
    grid = background.grid
    ux_max = float(np.max(np.abs(grid.diff(v[:, 1], 1))))
    r_max = float(np.max(v[:, 0]))
    k_hom = 4.0 * ux_max
    return k_hom, k_hom + 1.0, max(math.exp(2 * r_max), 2 * math.exp(4 * r_max))


def check_gronwall(times, energies, forcing_sq, K, C, rtol=1e-6):
    """Step-to-step discrete Gronwall check.

    Verifies ``E_{j+1} <= exp(K dt) E_j + C int exp(K (t_{j+1} - s)) h(s) ds``
    with the integral by the trapezoid rule on ``h = forcing_sq``. Returns the
    worst ratio of left to right side (``<= 1`` means the bound holds).
    """
    times = np.asarray(times)
    energies = np.asarray(energies)
    h = np.zeros_like(energies) if forcing_sq is None else np.asarray(forcing_sq)
    worst = 0.0
    scale = max(float(np.max(energies)), 1e-300)
    for j in range(len(times) - 1):
        dt = times[j + 1] - times[j]
        growth = math.exp(K * dt)
        source = C * 0.5 * dt * (growth * h[j] + h[j + 1])
        rhs = growth * energies[j] + source
        lhs = energies[j + 1]
        worst = max(worst, (lhs - rtol * scale) / rhs if rhs > 0 else
                    (0.0 if lhs <= rtol * scale else math.inf))
    return worst
