"""Experiment orchestration: convergence studies, stability demo, acceptance checks.

Every acceptance criterion is a function returning a :class:`CriterionResult`;
:func:`run_acceptance` evaluates a selection of them and :class:`RunReport`
collects config, tables and verdicts into a deterministic JSON document.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
import json
import logging
import math
import os
import time
from typing import NamedTuple

import numpy as np
from scipy import stats

from . import config as cfgmod
from .exceptions import BlowUpError, ConsistencyError
from .field_core import ComplexField, Grid1D, RealField, read_field_csv
from .hierarchy import (build_hierarchy, hand_forcing_h0, hand_residual_r1, lift_phase,
                        residuals, spectral_tail_ratio)
from .nls import (WaveParams, extract_W, jordan_defect, modal_envelope, nls_evolve, nls_init,
                  validity_energy, w_equation_defect, wavetrain_eigenvalues, wavetrain_linearized)
from .wme import (ModulationState, cfl_limit, gronwall_constants, trajectory_energy,
                  wme_integrate)

log = logging.getLogger(__name__)

DEGENERATE_LEVEL = 1e-10


# -- slope fitting ------------------------------------------------------------

class SlopeFit(NamedTuple):
    slope: float
    intercept: float
    max_residual: float


def fit_slope(xs, ys):
    """Least-squares line through ``(log x, log y)``."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("xs and ys must be 1-D arrays of equal length")
    if len(xs) < 3:
        raise ValueError(f"need at least 3 points for a slope fit, got {len(xs)}")
    if np.any(xs <= 0) or np.any(ys <= 0) or not np.all(np.isfinite(ys)):
        raise ValueError("slope fit needs positive finite data")
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return SlopeFit(float(slope), float(intercept), float(np.max(np.abs(resid))))


def slope_interval(xs, ys, level=0.95):
    """Half-width of the ``level`` confidence interval of the fitted slope."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    n = len(lx)
    if n < 3:
        return math.inf
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    se = math.sqrt(float(np.sum(resid**2)) / (n - 2) / sxx)
    return float(stats.t.ppf(0.5 + level / 2, n - 2) * se)


def observed_order(errors, ratio=2.0):
    """Orders ``log(e_j / e_{j+1}) / log(ratio)`` for successive refinements."""
    e = np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / math.log(ratio)


# -- initial data -------------------------------------------------------------

def make_profile(kind, grid, amplitude, width, csv_path=""):
    X = grid.x
    if kind == "zero":
        v = np.zeros(grid.points)
    elif kind == "gaussian-bump":
        v = amplitude * np.exp(-(X / width) ** 2)
    elif kind == "sech-bump":
        # sech^2 rather than sech: decays fast enough to vanish at the domain edge
        v = amplitude / np.cosh(X / width) ** 2
    elif kind == "sine":
        v = amplitude * np.sin(2 * np.pi * (X - grid.origin) / grid.length)
    elif kind == "dgaussian":
        v = -amplitude * (X / width) * np.exp(-(X / width) ** 2)
    elif kind == "custom-csv":
        f = read_field_csv(csv_path)
        if abs(f.grid.length - grid.length) > 1e-9 * grid.length:
            raise cfgmod.ConfigError(
                f"{csv_path}: profile period {f.grid.length!r} differs from [grid].length")
        v = f.grid.resample(np.real(f.values), grid.points)
    else:
        raise cfgmod.ConfigError(f"unknown profile '{kind}'")
    return RealField(grid, v)


@dataclass
class InitialData:
    grid: Grid1D
    r0: RealField
    u0: RealField
    phi0: RealField
    edge: float  # largest |r0|, |u0| over the two edge samples


def initial_data(cfg):
    ini, g = cfg.initial, cfg.grid
    grid = Grid1D(g.length, g.points, -0.5 * g.length)
    r0 = make_profile(ini.r_profile, grid, ini.r_amplitude, ini.r_width, ini.r_csv)
    u0 = make_profile(ini.u_profile, grid, ini.u_amplitude, ini.u_width, ini.u_csv)
    mean = float(np.mean(u0.values))
    if abs(mean) > 1e-14 * max(1.0, float(np.max(np.abs(u0.values)))):
        log.warning("u0 has mean %.3e; subtracting it so the phase stays periodic", mean)
    u0 = RealField(grid, u0.values - mean)
    phi0 = RealField(grid, grid.antiderivative(u0.values))
    edge = float(max(abs(r0.values[0]), abs(r0.values[-1]), abs(u0.values[0]), abs(u0.values[-1])))
    return InitialData(grid, r0, u0, phi0, edge)


def run_base(cfg, data, T_final=None, dt=None):
    k = cfg.wave.k
    s0 = ModulationState(0.0, data.r0, data.u0, k)
    dt = cfg.time.dt if dt is None else dt
    cap = cfl_limit(data.grid, k, data.r0.values, data.u0.values, cfg.time.cfl)
    if dt > cap:
        raise cfgmod.ConfigError(f"[time].dt={dt!r} exceeds the CFL bound {cap:.4g}")
    return wme_integrate(s0, cfg.run.t0 if T_final is None else T_final, dt)


# -- hyperbolicity ------------------------------------------------------------

@dataclass
class Classification:
    signs: np.ndarray
    summary: str


def classify_hyperbolicity(theta_T, theta_X):
    """Sign of ``Theta_T + Theta_X^2`` per point; negative means hyperbolic."""
    if theta_T.grid != theta_X.grid:
        raise ValueError("theta_T and theta_X must share a grid")
    signs = np.sign(theta_T.values + theta_X.values**2).astype(int)
    if np.all(signs < 0):
        summary = "hyperbolic"
    elif np.all(signs > 0):
        summary = "elliptic"
    else:
        summary = "mixed"
    return Classification(signs, summary)


def classify_phase(phase, j, params):
    """Classify the approximate wave ``Theta = omega T + k X + phi`` at step ``j``."""
    grid = phase.grid
    theta_T = RealField(grid, params.omega + phase.phi_rate[j])
    theta_X = RealField(grid, params.k + grid.diff(phase.phi[j], 1))
    return classify_hyperbolicity(theta_T, theta_X)


# -- convergence study --------------------------------------------------------

@dataclass
class ConvergenceRow:
    eps: float
    n: int
    T0: float
    err_H1: float = math.nan
    err_Linf: float = math.nan
    res_H1: float = math.nan
    res_disagreement: float = math.nan
    w_defect: float = math.nan
    fast_points: int = 0
    nls_dt: float = math.nan
    hyperbolic: bool = False
    status: str = "ok"
    runtime: float = 0.0
    series: dict = field(default_factory=dict)


@dataclass
class ConvergenceTable:
    rows: list
    err_fit: object = None
    res_fit: object = None
    err_ci95: float = math.nan
    res_ci95: float = math.nan
    degenerate: bool = False

    @property
    def eps(self):
        return [r.eps for r in self.rows]

    def to_dict(self, with_series=True):
        rows = []
        for r in self.rows:
            d = asdict(r)
            d.pop("runtime")
            if not with_series:
                d.pop("series")
            rows.append(d)
        return {
            "rows": rows,
            "err_fit": None if self.err_fit is None else self.err_fit._asdict(),
            "res_fit": None if self.res_fit is None else self.res_fit._asdict(),
            "err_ci95": self.err_ci95,
            "res_ci95": self.res_ci95,
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_dict(cls, d):
        rows = [ConvergenceRow(**r) for r in d["rows"]]
        fit = lambda v: None if v is None else SlopeFit(**v)  # noqa: E731
        return cls(rows, fit(d["err_fit"]), fit(d["res_fit"]), d["err_ci95"], d["res_ci95"],
                   d["degenerate"])

    def to_csv(self):
        head = "eps,n,T0,err_H1,err_Linf,res_H1,res_disagreement,w_defect,fast_points,nls_dt,hyperbolic,status"
        lines = [head]
        for r in self.rows:
            lines.append(",".join(str(v) for v in (
                repr(r.eps), r.n, repr(r.T0), repr(r.err_H1), repr(r.err_Linf), repr(r.res_H1),
                repr(r.res_disagreement), repr(r.w_defect), r.fast_points, repr(r.nls_dt),
                r.hyperbolic, r.status.replace(",", ";"))))
        return "\n".join(lines) + "\n"


def _series_norms(grid, values):
    return [float(v) for v in grid.sobolev_norm(values, 1)]


def run_eps(cfg, data, hier, eps):
    """One table row: phase lift, residuals, NLS run and deviation at every snapshot."""
    start = time.perf_counter()
    row = ConvergenceRow(eps, hier.n, cfg.run.t0)
    try:
        params = WaveParams(cfg.wave.k)
        grid = data.grid
        phase = lift_phase(hier, eps, data.phi0)
        res = residuals(hier, phase, eps)
        stride = cfg.slow_steps_per_snapshot
        snaps = list(range(0, hier.nsteps + 1, stride))
        row.res_H1 = float(np.max(res.norms["defect"][snaps]))
        row.res_disagreement = float(res.disagreement)

        points = cfg.fast_points_for(eps)
        m = cfg.nls_steps_per_snapshot(eps)
        dt = cfg.snapshot_interval / eps / m
        row.fast_points, row.nls_dt = points, dt
        s0 = nls_init(data.r0, data.phi0, params, eps, points)
        states = nls_evolve(s0, dt, m * cfg.run.snapshots, every=m)

        T, h1, linf, l2, w1n, w2n, energy, resn = ([] for _ in range(8))
        defect, scale = 0.0, 0.0
        hyperbolic = True
        for i, st in enumerate(states):
            j = snaps[i]
            A = RealField(grid, np.exp(phase.r_hat[j]))
            phi = RealField(grid, phase.phi[j])
            d = extract_W(st, A, phi, params, eps)
            T.append(float(hier.times[j]))
            h1.append(d.h1_norm())
            linf.append(d.sup_norm())
            l2.append(float(grid.sobolev_norm(d.values, 0)))
            w1n.append(float(grid.sobolev_norm(d.W1.values, 0)))
            w2n.append(float(grid.sobolev_norm(d.W2.values, 0)))
            energy.append(validity_energy(d, RealField(grid, phase.r_hat[j]), eps))
            resn.append(float(res.norms["defect"][j]))
            dj, sj = w_equation_defect(st, A, phi, phase.r_hat_T[j], phase.phi_rate[j],
                                       res.defect["A"][j], res.defect["phi"][j], params, eps)
            defect, scale = max(defect, dj), max(scale, sj)
            hyperbolic &= classify_phase(phase, j, params).summary == "hyperbolic"
        row.err_H1 = max(h1)
        row.err_Linf = max(linf)
        row.w_defect = defect / scale if scale > 0 else defect
        row.hyperbolic = bool(hyperbolic)
        row.series = {"T": T, "W_L2": l2, "W_H1": h1, "W1_L2": w1n, "W2_L2": w2n,
                      "validity_energy": energy, "res_H1": resn}
    except (BlowUpError, ConsistencyError, ValueError, ArithmeticError) as exc:
        row.status = f"{type(exc).__name__}: {exc}"
        log.error("eps=%g failed: %s", eps, exc)
    row.runtime = time.perf_counter() - start
    return row


def build_study(cfg, n=None):
    data = initial_data(cfg)
    base = run_base(cfg, data)
    hier = build_hierarchy(base, cfg.run.n if n is None else n)
    return data, base, hier


def run_convergence(cfg, study=None):
    """Errors and residuals for every eps of the configured ladder, with slope fits."""
    data, base, hier = build_study(cfg) if study is None else study
    eps_list = list(cfg.run.eps)
    threads = max(1, cfg.run.threads)
    if threads > 1 and len(eps_list) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda e: run_eps(cfg, data, hier, e), eps_list))
    else:
        rows = [run_eps(cfg, data, hier, e) for e in eps_list]
    table = ConvergenceTable(rows)
    ok = [r for r in rows if r.status == "ok"]
    if len(ok) >= 3:
        eps = [r.eps for r in ok]
        errs = [r.err_H1 for r in ok]
        if max(errs) < DEGENERATE_LEVEL:
            table.degenerate = True
        else:
            table.err_fit = fit_slope(eps, errs)
            table.err_ci95 = slope_interval(eps, errs)
            ress = [r.res_H1 for r in ok]
            if min(ress) > 0:
                table.res_fit = fit_slope(eps, ress)
                table.res_ci95 = slope_interval(eps, ress)
    return table


# -- wavetrain stability ------------------------------------------------------

def _stability_grid(cfg):
    st = cfg.stability
    return Grid1D(st.length, st.points, 0.0)


def run_stability_demo(cfg):
    """Conservation, Jordan growth and bounded gradients of the linearised wavetrain."""
    st = cfg.stability
    grid = _stability_grid(cfg)
    params = WaveParams(cfg.wave.k)
    X = grid.x
    c = 2 * np.pi / grid.length
    # mean-free smooth data: secular growth must be absent
    free = 0.01 * (np.cos(c * X) + 0.5 * np.sin(3 * c * X)) + 0.01j * np.cos(2 * c * X)
    free_run = wavetrain_linearized(ComplexField(grid, free), params, st.t_final, st.dt)
    envelope = modal_envelope(ComplexField(grid, free))
    # constant W_1: exact Jordan growth of W_2
    jordan = np.full(grid.points, st.w1_mean, dtype=complex)
    jordan_run = wavetrain_linearized(ComplexField(grid, jordan), params, st.t_final, st.dt)
    w2 = jordan_run.w2_norms
    half = len(w2) // 2
    slope = float(np.polyfit(jordan_run.times[half:], w2[half:], 1)[0])
    expected = 2.0 * abs(params.gamma) * abs(st.w1_mean) * math.sqrt(grid.length)
    q = free_run.conserved
    q_j = jordan_run.conserved
    drift = float(max(np.max(np.abs(q - q[0])) / q[0], np.max(np.abs(q_j - q_j[0])) / q_j[0]))
    xis = grid.wavenumbers[grid.wavenumbers != 0]
    eig = wavetrain_eigenvalues(xis, params.k, params.gamma)
    return {
        "times": [float(t) for t in free_run.times],
        "conserved": [float(v) for v in q],
        "conserved_drift": drift,
        "free_w2": [float(v) for v in free_run.w2_norms],
        "free_envelope": envelope,
        "free_max_ratio": float(np.max(free_run.w2_norms) / envelope),
        "free_gradient": [float(v) for v in free_run.gradient_norms],
        "jordan_w2": [float(v) for v in w2],
        "jordan_slope": slope,
        "jordan_expected": expected,
        "jordan_rel_error": abs(slope - expected) / expected,
        "max_abs_real_eig": float(np.max(np.abs(eig.real))),
        "jordan_cell": jordan_defect(params.k, params.gamma),
    }


# -- acceptance criteria ------------------------------------------------------

@dataclass
class CriterionResult:
    key: str
    title: str
    passed: bool
    measured: dict
    threshold: dict
    runtime: float = 0.0
    detail: str = ""

    def line(self):
        verdict = "PASS" if self.passed else "FAIL"
        shown = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"[{verdict}] {self.key} {self.title}: {shown}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def default_config(**run_overrides):
    cfg = cfgmod.Config()
    if run_overrides:
        cfg = replace(cfg, run=replace(cfg.run, **run_overrides))
    return cfgmod.validate(cfg)


def wavetrain_config(cfg):
    ini = replace(cfg.initial, r_profile="zero", u_profile="zero",
                  r_amplitude=0.0, u_amplitude=0.0)
    return replace(cfg, initial=ini)


def _timed(fn):
    def wrapper(*args, **kwargs):
        start = time.perf_counter()
        res = fn(*args, **kwargs)
        res.runtime = time.perf_counter() - start
        limit = res.threshold.get("runtime_s")
        if limit is not None and res.runtime > limit:
            res.passed = False
            res.detail += f" runtime {res.runtime:.1f}s over {limit}s"
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def criterion_energy(cfg):
    """Modulation-system energy drift at N = 1024 over [0, t0]."""
    cfg1024 = replace(cfg, grid=replace(cfg.grid, points=1024,
                                        fast_points=max(cfg.grid.fast_points, 1024)))
    data = initial_data(cfg1024)
    cap = cfl_limit(data.grid, cfg.wave.k, data.r0.values, data.u0.values)
    dt = cfg.snapshot_interval / math.ceil(cfg.snapshot_interval / (0.5 * cap))
    base = run_base(cfg1024, data, dt=dt)
    E = trajectory_energy(base)
    drift = float(np.max(np.abs(E - E[0])) / E[0])
    return CriterionResult("C1", "energy conservation", drift < 1e-8,
                           {"relative_drift": drift, "dt": dt},
                           {"relative_drift": 1e-8, "runtime_s": 10.0})


@_timed
def criterion_residual_order(cfg):
    """Residual slopes for n = 1 and n = 2 over the eps ladder."""
    data = initial_data(cfg)
    base = run_base(cfg, data)
    measured, passed = {}, True
    stride = cfg.slow_steps_per_snapshot
    for n, need in ((1, 4.0 - cfg.run.slope_tolerance), (2, 6.0 - cfg.run.slope_tolerance)):
        hier = build_hierarchy(base, n)
        sups = []
        for eps in cfg.run.eps:
            res = residuals(hier, lift_phase(hier, eps, data.phi0), eps)
            sups.append(float(np.max(res.norms["defect"][::stride])))
        fit = fit_slope(cfg.run.eps, sups)
        measured[f"slope_n{n}"] = fit.slope
        measured[f"sup_res_n{n}"] = sups
        passed &= fit.slope >= need
    return CriterionResult("C2", "residual order", bool(passed), measured,
                           {"slope_n1": 3.8, "slope_n2": 5.8, "runtime_s": 120.0})


@_timed
def criterion_validity(cfg, table=None):
    """Deviation slope sup_T ||W||_{H^1} against eps for n = 1."""
    cfg1 = replace(cfg, run=replace(cfg.run, n=1))
    data = initial_data(cfg1)
    sizes = {"r0_sup": float(np.max(np.abs(data.r0.values))),
             "u0_sup": float(np.max(np.abs(data.u0.values)))}
    table = run_convergence(cfg1) if table is None else table
    failed = [r.status for r in table.rows if r.status != "ok"]
    slope = table.err_fit.slope if table.err_fit is not None else math.nan
    passed = (not failed and not table.degenerate and slope >= 2.0 - cfg.run.slope_tolerance
              and max(sizes.values()) <= 0.2)
    return CriterionResult("C3", "validity law", bool(passed),
                           {"slope": slope, "ci95": table.err_ci95,
                            "sup_W_H1": [r.err_H1 for r in table.rows], **sizes},
                           {"slope": 1.8, "runtime_s": 600.0},
                           detail="; ".join(failed))


@_timed
def criterion_dual_path(cfg, eps=0.2):
    """Formula and defect residual routes agree at every snapshot (n = 1)."""
    data = initial_data(cfg)
    hier = build_hierarchy(run_base(cfg, data), 1)
    stride = cfg.slow_steps_per_snapshot
    grid = data.grid

    def relative_gap(e):
        res = residuals(hier, lift_phase(hier, e, data.phi0), e)
        gap = (grid.sobolev_norm(res.formula["A"] - res.defect["A"], 1)
               + grid.sobolev_norm(res.formula["phi"] - res.defect["phi"], 1))[::stride]
        return float(np.max(gap) / np.max(res.norms["defect"][::stride])), float(np.max(gap))

    rel, _ = relative_gap(eps)
    # smaller eps: the absolute gap sits at the roundoff floor while the residual shrinks
    ladder = [relative_gap(e) for e in cfg.run.eps]
    return CriterionResult("C4", "dual-path residuals", rel <= 1e-8,
                           {"eps": eps, "relative_gap": rel,
                            "ladder_relative_gap": [g[0] for g in ladder],
                            "ladder_absolute_gap": [g[1] for g in ladder]},
                           {"relative_gap": 1e-8, "runtime_s": 60.0})


@_timed
def criterion_hand_oracles(cfg):
    """Machine forcings against hand-transcribed first-order formulas."""
    data = initial_data(cfg)
    base = run_base(cfg, data)
    hier = build_hierarchy(base, 2)
    grid = data.grid
    r = base.stages[..., 0, :]
    h0r, h0u = hand_forcing_h0(grid, r)
    f1 = hier.forcings[0]
    err_h0 = float(max(np.max(np.abs(f1[..., 0, :] - h0r)), np.max(np.abs(f1[..., 1, :] - h0u))))
    lvl = hier.levels[0]
    R1r, R1u = hand_residual_r1(grid, r, lvl.stages[..., 0, :], lvl.stages[..., 1, :], 0.0)
    f2 = hier.forcings[1]
    scale = max(1.0, float(np.max(np.abs(R1u))))
    err_r1 = float(max(np.max(np.abs(f2[..., 0, :] + R1r)),
                       np.max(np.abs(f2[..., 1, :] + R1u)))) / scale
    return CriterionResult("C5", "hand-formula oracles", err_h0 <= 1e-10 and err_r1 <= 1e-8,
                           {"H0_max_error": err_h0, "R1_max_rel_error": err_r1},
                           {"H0_max_error": 1e-10, "R1_max_rel_error": 1e-8})


@_timed
def criterion_wavetrain(cfg):
    """Pure wavetrain: extracted deviation stays at roundoff."""
    wcfg = wavetrain_config(cfg)
    table = run_convergence(wcfg)
    failed = [r.status for r in table.rows if r.status != "ok"]
    worst = max((r.err_H1 for r in table.rows), default=math.nan)
    return CriterionResult("C6", "wavetrain exactness", bool(not failed and worst < 1e-8),
                           {"max_W_H1": worst}, {"max_W_H1": 1e-8}, detail="; ".join(failed))


@_timed
def criterion_stability(cfg, demo=None):
    """Conservation law, Jordan growth rate and neutral spectrum."""
    demo = run_stability_demo(cfg) if demo is None else demo
    passed = (demo["conserved_drift"] < 1e-11 and demo["jordan_rel_error"] < 0.02
              and demo["max_abs_real_eig"] < 1e-12 and demo["jordan_cell"]
              and demo["free_max_ratio"] <= 3.0)
    return CriterionResult("C7", "wavetrain stability structure", bool(passed),
                           {k: demo[k] for k in ("conserved_drift", "jordan_slope", "jordan_expected",
                                                 "jordan_rel_error", "max_abs_real_eig",
                                                 "jordan_cell", "free_max_ratio")},
                           {"conserved_drift": 1e-11, "jordan_rel_error": 0.02,
                            "max_abs_real_eig": 1e-12, "free_max_ratio": 3.0})


@_timed
def criterion_hyperbolic(cfg, table=None):
    """Wavetrain and validated runs classify hyperbolic at every snapshot."""
    params = WaveParams(cfg.wave.k)
    grid = Grid1D(cfg.grid.length, cfg.grid.points, -0.5 * cfg.grid.length)
    wave = classify_hyperbolicity(RealField(grid, np.full(grid.points, params.omega)),
                                  RealField(grid, np.full(grid.points, params.k)))
    # base modulation solution: Theta_T + Theta_X^2 = gamma exp(2r) along the run
    data = initial_data(cfg)
    base = run_base(cfg, data)
    base_ok = all(
        classify_hyperbolicity(
            RealField(grid, params.omega - 2 * params.k * u - u * u - np.expm1(2 * r)),
            RealField(grid, params.k + u)).summary == "hyperbolic"
        for r, u in base.values[::cfg.slow_steps_per_snapshot])
    table = run_convergence(cfg) if table is None else table
    runs_ok = all(r.hyperbolic and r.status == "ok" for r in table.rows)
    passed = wave.summary == "hyperbolic" and base_ok and runs_ok
    return CriterionResult("C8", "hyperbolicity", bool(passed),
                           {"wavetrain": wave.summary, "base_all_snapshots": base_ok,
                            "runs_all_snapshots": runs_ok}, {})


@_timed
def criterion_self_convergence(cfg):
    """RK4 order of the modulation solver and Strang order of the NLS solver."""
    data = initial_data(cfg)
    grid = data.grid
    cap = cfl_limit(grid, cfg.wave.k, data.r0.values, data.u0.values)
    dt0 = cfg.run.t0 / math.ceil(cfg.run.t0 / cap)
    finals = [run_base(cfg, data, dt=dt0 / 2**j).values[-1] for j in range(3)]
    diffs = [float(np.hypot(grid.sobolev_norm(a[0] - b[0], 2), grid.sobolev_norm(a[1] - b[1], 2)))
             for a, b in zip(finals, finals[1:])]
    rk4 = float(observed_order(diffs)[0])
    # Strang: modulated data at eps = 0.1 over fast time 5
    eps = 0.1
    params = WaveParams(cfg.wave.k)
    s0 = nls_init(data.r0, data.phi0, params, eps, cfg.fast_points_for(eps))
    psis = [nls_evolve(s0, 0.2 / 2**j, 25 * 2**j)[-1].psi.values for j in range(3)]
    fgrid = s0.grid
    sdiffs = [float(fgrid.sobolev_norm(a - b, 0)) for a, b in zip(psis, psis[1:])]
    strang = float(observed_order(sdiffs)[0])
    return CriterionResult("C9", "self-convergence", rk4 >= 3.9 and strang >= 1.9,
                           {"rk4_order": rk4, "strang_order": strang, "rk4_dt": dt0},
                           {"rk4_order": 3.9, "strang_order": 1.9})


CRITERIA = {
    "C1": criterion_energy,
    "C2": criterion_residual_order,
    "C3": criterion_validity,
    "C4": criterion_dual_path,
    "C5": criterion_hand_oracles,
    "C6": criterion_wavetrain,
    "C7": criterion_stability,
    "C8": criterion_hyperbolic,
    "C9": criterion_self_convergence,
}


def run_acceptance(cfg=None, keys=None, table=None):
    """Evaluate the selected criteria (all by default) on ``cfg``."""
    cfg = default_config() if cfg is None else cfg
    keys = list(CRITERIA) if keys is None else list(keys)
    table_time = 0.0
    if table is None and ("C3" in keys or "C8" in keys):
        start = time.perf_counter()
        table = run_convergence(replace(cfg, run=replace(cfg.run, n=1)))
        table_time = time.perf_counter() - start
    out = []
    for key in keys:
        fn = CRITERIA[key]
        try:
            if key in ("C3", "C8"):
                res = fn(cfg, table=table)
                # the shared convergence table counts against both budgets
                res.runtime += table_time
                limit = res.threshold.get("runtime_s")
                if limit is not None and res.runtime > limit:
                    res.passed = False
                    res.detail += f" runtime {res.runtime:.1f}s over {limit}s"
                out.append(res)
            else:
                out.append(fn(cfg))
        except Exception as exc:  # a crashing criterion is a failed criterion
            out.append(CriterionResult(key, fn.__doc__.strip().splitlines()[0], False, {}, {},
                                       detail=f"{type(exc).__name__}: {exc}"))
    return out


# -- report -------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _unjson(obj):
    if isinstance(obj, dict):
        return {k: _unjson(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_unjson(v) for v in obj]
    if obj in ("nan", "inf", "-inf"):
        return float(obj)
    return obj


@dataclass
class RunReport:
    config: dict
    content_hash: str
    tables: dict = field(default_factory=dict)
    sections: dict = field(default_factory=dict)
    criteria: list = field(default_factory=list)  # dicts without runtimes
    timings: dict = field(default_factory=dict)

    @classmethod
    def start(cls, cfg):
        return cls(cfg.to_dict(), input_hash(cfg))

    def add_table(self, name, table):
        self.tables[name] = table.to_dict()
        self.timings[f"table:{name}"] = {f"{r.eps!r}": r.runtime for r in table.rows}

    def add_criteria(self, results):
        for res in results:
            d = asdict(res)
            self.timings[f"criterion:{res.key}"] = d.pop("runtime")
            self.criteria.append(d)

    @property
    def all_passed(self):
        return all(c["passed"] for c in self.criteria)

    def to_json(self):
        payload = {"config": self.config, "content_hash": self.content_hash,
                   "tables": self.tables, "sections": self.sections, "criteria": self.criteria}
        return json.dumps(_jsonable(payload), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text):
        d = _unjson(json.loads(text))
        return cls(d["config"], d["content_hash"], d["tables"], d["sections"], d["criteria"])

    def write(self, directory, cfg=None):
        """Write report, config snapshot, table CSVs, .dat series and timings."""
        os.makedirs(directory, exist_ok=True)
        _write(os.path.join(directory, "report.json"), self.to_json())
        _write(os.path.join(directory, "timings.json"),
               json.dumps(_jsonable(self.timings), sort_keys=True, indent=1) + "\n")
        if cfg is not None:
            _write(os.path.join(directory, "config.toml"), cfgmod.dumps(cfg))
        for name, t in self.tables.items():
            table = ConvergenceTable.from_dict(_unjson(_jsonable(t)))
            _write(os.path.join(directory, f"{name}_table.csv"), table.to_csv())
            _write(os.path.join(directory, f"{name}_slopes.dat"),
                   "# eps err_H1 res_H1\n" + "".join(
                       f"{r.eps!r} {r.err_H1!r} {r.res_H1!r}\n" for r in table.rows))
            for r in table.rows:
                if r.series:
                    cols = list(r.series)
                    lines = ["# " + " ".join(cols)]
                    lines += [" ".join(repr(r.series[c][i]) for c in cols)
                              for i in range(len(r.series["T"]))]
                    _write(os.path.join(directory, f"{name}_W_eps{r.eps!r}.dat"), "\n".join(lines) + "\n")
        stab = self.sections.get("stability")
        if stab:
            lines = ["# t conserved free_w2 free_grad"]
            lines += [f"{t!r} {q!r} {w!r} {gr!r}" for t, q, w, gr in zip(
                stab["times"], stab["conserved"], stab["free_w2"], stab["free_gradient"])]
            _write(os.path.join(directory, "stability.dat"), "\n".join(lines) + "\n")
            jl = ["# t jordan_w2"] + [f"{t!r} {w!r}" for t, w in zip(stab["times"], stab["jordan_w2"])]
            _write(os.path.join(directory, "jordan.dat"), "\n".join(jl) + "\n")


def _write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def input_hash(cfg):
    """sha256 over the canonical config and any custom profile files."""
    import hashlib
    h = hashlib.sha256(cfg.content_hash().encode("utf-8"))
    for path in (cfg.initial.r_csv, cfg.initial.u_csv):
        if path and os.path.exists(path):
            with open(path, "rb") as fh:
                h.update(fh.read())
    return h.hexdigest()


def hierarchy_manifest(hier):
    """Per-level sup-in-time ``H^1`` and ``H^2`` sizes and the spectral tail monitor."""
    grid = hier.grid
    levels = []
    for l, traj in enumerate([hier.base] + hier.levels):
        v = traj.values
        size = grid.sobolev_norm(v[:, 0], 1) + grid.sobolev_norm(v[:, 1], 1)
        size2 = grid.sobolev_norm(v[:, 0], 2) + grid.sobolev_norm(v[:, 1], 2)
        levels.append({"level": l, "sup_H1": float(np.max(size)), "sup_H2": float(np.max(size2)),
                       "tail_ratio": spectral_tail_ratio(grid, v)})
    return {"order": hier.n, "steps": hier.nsteps, "dt": hier.dt, "levels": levels}


def gronwall_report(base):
    k_hom, k, c = gronwall_constants(base)
    return {"K_hom": k_hom, "K": k, "C": c}


def validity_constants(table, n):
    """``sup_T E(T) / eps^(4n)`` per row: the fitted Gronwall-type constant."""
    out = {}
    for r in table.rows:
        if r.status == "ok" and r.series:
            out[repr(r.eps)] = float(max(r.series["validity_energy"]) / r.eps ** (4 * n))
    return out
