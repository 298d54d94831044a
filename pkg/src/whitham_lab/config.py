"""Experiment configuration: strict TOML parsing, validation and serialisation."""
from dataclasses import asdict, dataclass, field, fields, replace
import hashlib
import json
import logging
import math
import os

import tomli

from .exceptions import ConfigError

log = logging.getLogger(__name__)

SUBCOMMANDS = ("wme", "hierarchy", "nls", "converge", "stability", "classify")
PROFILES = ("gaussian-bump", "sech-bump", "sine", "dgaussian", "zero", "custom-csv")
THREADS_ENV = "WHITHAM_LAB_THREADS"


@dataclass(frozen=True)
class InitialSection:
    r_profile: str = "sech-bump"
    r_amplitude: float = 0.1
    r_width: float = 2.0
    r_csv: str = ""
    u_profile: str = "dgaussian"
    u_amplitude: float = 0.1
    u_width: float = 2.0
    u_csv: str = ""


@dataclass(frozen=True)
class WaveSection:
    k: float = 1.0
    gamma: float = -1.0


@dataclass(frozen=True)
class RunSection:
    subcommand: str = "converge"
    n: int = 1
    eps: tuple = (0.2, 0.1, 0.05, 0.025)
    t0: float = 0.5
    snapshots: int = 50
    seed: int = 0
    slope_tolerance: float = 0.2
    threads: int = 1


@dataclass(frozen=True)
class GridSection:
    length: float = 20.0 * math.pi
    points: int = 512
    fast_points: int = 8192  # at the smallest eps; scaled so fast spacing is eps independent


@dataclass(frozen=True)
class TimeSection:
    dt: float = 0.005  # slow-time RK4 step
    nls_dt: float = 0.005  # fast-time Strang step (upper bound)
    cfl: float = 0.5


@dataclass(frozen=True)
class OutputSection:
    directory: str = "runs/latest"


@dataclass(frozen=True)
class StabilitySection:
    length: float = 20.0 * math.pi
    points: int = 256
    w1_mean: float = 0.01
    t_final: float = 100.0
    dt: float = 0.5


@dataclass(frozen=True)
class Config:
    initial: InitialSection = field(default_factory=InitialSection)
    wave: WaveSection = field(default_factory=WaveSection)
    run: RunSection = field(default_factory=RunSection)
    grid: GridSection = field(default_factory=GridSection)
    time: TimeSection = field(default_factory=TimeSection)
    output: OutputSection = field(default_factory=OutputSection)
    stability: StabilitySection = field(default_factory=StabilitySection)

    # -- derived quantities ----------------------------------------------

    @property
    def eps_min(self):
        return min(self.run.eps)

    def fast_points_for(self, eps):
        """Fast grid size giving the same fast spacing as at the smallest eps."""
        target = self.grid.fast_points * self.eps_min / eps
        points = max(self.grid.points, 2 ** math.ceil(math.log2(target) - 1e-9))
        return int(points)

    @property
    def snapshot_interval(self):
        return self.run.t0 / self.run.snapshots

    @property
    def slow_steps_per_snapshot(self):
        return int(round(self.snapshot_interval / self.time.dt))

    def nls_steps_per_snapshot(self, eps):
        return int(math.ceil(self.snapshot_interval / eps / self.time.nls_dt - 1e-9))

    def to_dict(self):
        d = asdict(self)
        d["run"]["eps"] = list(d["run"]["eps"])
        return d

    def content_hash(self):
        """sha256 of the inputs that affect results (not output location or threads)."""
        d = self.to_dict()
        d.pop("output")
        d["run"].pop("threads")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


_SECTION_TYPES = {
    "initial": InitialSection, "wave": WaveSection, "run": RunSection,
    "grid": GridSection, "time": TimeSection, "output": OutputSection,
    "stability": StabilitySection,
}


def _coerce(section, key, value, default):
    where = f"[{section}].{key}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = [value]
        if not isinstance(value, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"{where} must be a list of numbers, got {value!r}")
        return tuple(float(v) for v in value)
    raise ConfigError(f"{where}: unsupported type")


def from_mapping(data):
    """Build a validated :class:`Config` from a nested mapping (strict keys)."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a table of sections")
    sections = {}
    for name, value in data.items():
        if name not in _SECTION_TYPES:
            raise ConfigError(
                f"unknown section [{name}]; allowed: {', '.join(sorted(_SECTION_TYPES))}")
        if not isinstance(value, dict):
            raise ConfigError(f"[{name}] must be a table")
        cls = _SECTION_TYPES[name]
        defaults = cls()
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, v in value.items():
            if key not in known:
                raise ConfigError(
                    f"unknown key '{key}' in [{name}]; allowed: {', '.join(sorted(known))}")
            kwargs[key] = _coerce(name, key, v, getattr(defaults, key))
        sections[name] = cls(**kwargs)
    return validate(Config(**sections))


def _power_of_two(n):
    return n >= 8 and n & (n - 1) == 0


def validate(cfg):
    """Check invariants; returns ``cfg`` (with ``u`` defaults untouched)."""
    ini, wave, run, grid, tm, st = cfg.initial, cfg.wave, cfg.run, cfg.grid, cfg.time, cfg.stability
    if wave.gamma != -1.0:
        raise ConfigError(
            f"gamma={wave.gamma!r} rejected: only the defocusing case gamma = -1 is supported "
            "(the modulation equations are elliptic and ill-posed for gamma > 0)")
    if run.subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand '{run.subcommand}'; choose from {', '.join(SUBCOMMANDS)}")
    for which in ("r", "u"):
        prof = getattr(ini, f"{which}_profile")
        if prof not in PROFILES:
            raise ConfigError(f"[initial].{which}_profile '{prof}' not in {', '.join(PROFILES)}")
        if getattr(ini, f"{which}_width") <= 0:
            raise ConfigError(f"[initial].{which}_width must be positive")
        if prof == "custom-csv" and not getattr(ini, f"{which}_csv"):
            raise ConfigError(f"[initial].{which}_csv is required for the custom-csv profile")
    if not 0 <= run.n <= 3:
        raise ConfigError(f"[run].n must be in 0..3, got {run.n}")
    if not run.t0 > 0:
        raise ConfigError(f"[run].t0 must be positive, got {run.t0!r}")
    if run.snapshots < 1:
        raise ConfigError("[run].snapshots must be at least 1")
    if run.threads < 1:
        raise ConfigError("[run].threads must be at least 1")
    if not run.slope_tolerance >= 0:
        raise ConfigError("[run].slope_tolerance must be nonnegative")
    eps = run.eps
    if not eps or any(not (0 < e < 1) for e in eps):
        raise ConfigError(f"[run].eps values must lie in (0, 1), got {list(eps)}")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("[run].eps must be strictly decreasing")
    if len(eps) > 2:
        ratios = [a / b for a, b in zip(eps, eps[1:])]
        if max(ratios) - min(ratios) > 1e-9 * max(ratios):
            raise ConfigError(f"[run].eps must form a geometric sequence, ratios {ratios}")
    if not grid.length > 0:
        raise ConfigError("[grid].length must be positive")
    for name, n in (("[grid].points", grid.points), ("[grid].fast_points", grid.fast_points),
                    ("[stability].points", st.points)):
        if not _power_of_two(n):
            raise ConfigError(f"{name} must be a power of two >= 8, got {n}")
    if grid.fast_points > 2**15:
        raise ConfigError("[grid].fast_points must not exceed 32768")
    if grid.fast_points < grid.points:
        raise ConfigError("[grid].fast_points must be at least [grid].points")
    if not (tm.dt > 0 and tm.nls_dt > 0):
        raise ConfigError("[time].dt and [time].nls_dt must be positive")
    if not 0 < tm.cfl <= 0.5:
        raise ConfigError(f"[time].cfl must lie in (0, 0.5], got {tm.cfl!r}")
    m = cfg.snapshot_interval / tm.dt
    if abs(m - round(m)) > 1e-9 * max(1.0, m) or round(m) < 1:
        raise ConfigError(
            f"[time].dt={tm.dt!r} must divide the snapshot interval "
            f"t0/snapshots={cfg.snapshot_interval!r}")
    # carrier on the lattice 2 pi Z / L_fast for every eps
    for e in eps:
        lf = grid.length / e
        mult = wave.k * lf / (2 * math.pi)
        if abs(mult - round(mult)) > 1e-9 * max(1.0, abs(mult)):
            step = 2 * math.pi * max(eps) / grid.length
            nearest = round(wave.k / step) * step
            raise ConfigError(
                f"[wave].k={wave.k!r} is not on the lattice 2*pi*Z/L_fast for eps={e!r}; "
                f"nearest admissible k is {nearest!r}")
        spacing = lf / cfg.fast_points_for(e)
        if wave.k and spacing > 2 * math.pi / (16 * abs(wave.k)):
            raise ConfigError(
                f"[grid].fast_points too small: fewer than 16 points per carrier wavelength at eps={e!r}")
        if cfg.fast_points_for(e) > 2**15:
            raise ConfigError(f"fast grid at eps={e!r} would exceed 32768 points")
    if not (st.length > 0 and st.t_final > 0 and st.dt > 0):
        raise ConfigError("[stability] length, t_final and dt must be positive")
    return cfg


def load(path):
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {path}: {exc}") from exc
    return from_mapping(data)


def loads(text):
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML: {exc}") from exc
    return from_mapping(data)


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isinf(v) or math.isnan(v):
            raise ConfigError("non-finite numbers cannot be serialised")
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialise {v!r}")


def dumps(cfg):
    lines = []
    for name, section in cfg.to_dict().items():
        lines.append(f"[{name}]")
        lines.extend(f"{key} = {_toml_value(value)}" for key, value in section.items())
        lines.append("")
    return "\n".join(lines)


def with_overrides(cfg, n=None, eps=None, t0=None, out=None, threads=None, subcommand=None):
    """Apply command-line overrides and re-validate."""
    run = cfg.run
    if n is not None:
        run = replace(run, n=n)
    if eps is not None:
        run = replace(run, eps=tuple(float(e) for e in eps))
    if t0 is not None:
        run = replace(run, t0=float(t0))
    if threads is None and os.environ.get(THREADS_ENV):
        try:
            threads = int(os.environ[THREADS_ENV])
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from exc
    if threads is not None:
        run = replace(run, threads=threads)
    if subcommand is not None:
        run = replace(run, subcommand=subcommand)
    output = cfg.output if out is None else replace(cfg.output, directory=str(out))
    return validate(replace(cfg, run=run, output=output))
