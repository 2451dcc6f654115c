"""Scenario files: JSON with a versioned schema and unit-suffixed quantities.

Bare numbers are SI (angles in radians).  Strings such as ``"6378 km"`` or
``"-0.1 deg"`` are converted on ingestion.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .dynamics import Environment, VehicleParams
from .reach import ReachConfig
from .setalg import Zonotope
from .thermal import ThermalParams

SCHEMA_VERSION = 1

# unit -> (dimension, factor to SI)
UNITS = {
    "m": ("length", 1.0), "km": ("length", 1e3), "ft": ("length", 0.3048),
    "m/s": ("speed", 1.0), "km/s": ("speed", 1e3),
    "rad": ("angle", 1.0), "deg": ("angle", math.pi / 180.0),
    "s": ("time", 1.0), "ms": ("time", 1e-3), "min": ("time", 60.0),
    "kg": ("mass", 1.0), "g": ("mass", 1e-3), "t": ("mass", 1e3),
    "m^2": ("area", 1.0), "cm^2": ("area", 1e-4),
    "kg/m^3": ("density", 1.0), "g/cm^3": ("density", 1e3),
    "m^3/s^2": ("grav_param", 1.0), "km^3/s^2": ("grav_param", 1e9),
    "W/m^2": ("heat_flux", 1.0), "kW/m^2": ("heat_flux", 1e3), "MW/m^2": ("heat_flux", 1e6),
}
STATE_DIMS = ("length", "speed", "angle", "angle", "angle", "angle")
DEFAULT_HALF_WIDTHS = (500.0, 50.0, math.radians(0.05), math.radians(0.01), math.radians(0.1), math.radians(0.01))

_QTY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S+)\s*$")


class ScenarioError(ValueError):
    """Schema or unit violation; ``errors`` lists field-level messages."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def quantity(value, dim: str, where: str = "") -> float:
    """Convert a bare number or a unit-suffixed string to SI."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    m = _QTY.match(str(value))
    if not m:
        raise ScenarioError([f"{where}: cannot parse quantity {value!r}"])
    unit = m.group(2)
    if unit not in UNITS:
        raise ScenarioError([f"{where}: unknown unit {unit!r}"])
    udim, factor = UNITS[unit]
    if udim != dim:
        raise ScenarioError([f"{where}: unit {unit!r} is a {udim}, expected a {dim}"])
    return float(m.group(1)) * factor


def _schema():
    text = resources.files("hyreach").joinpath("schemas/scenario.schema.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class ReachSettings:
    time_step: float = 10.0
    horizon: float = 120.0
    error_tolerance: tuple | None = None
    max_order: float = 20.0
    max_constraints: int | None = 20
    max_splits: int = 0
    kappa: float = 1.0
    remainder_pieces: int = 3
    remainder_dims: int = 5


@dataclass(frozen=True)
class ThermalSettings:
    C: float = ThermalParams.C
    sigma: float = ThermalParams.sigma
    epsilon: float = ThermalParams.epsilon
    Qdot_max: float = ThermalParams.Qdot_max
    audit_factor: float = 0.05
    trust_box: tuple = (2000.0, 100.0)

    @property
    def params(self) -> ThermalParams:
        return ThermalParams(self.C, self.sigma, self.epsilon, self.Qdot_max)


@dataclass(frozen=True)
class MpcSettings:
    N: int = 20
    Ts: float = 0.1
    duration: float = 120.0
    Q_diag: tuple = (100.0,) * 6
    R_diag: tuple = (1.0, 1.0)
    du_max: tuple | None = None
    heat_constrained: bool = False
    plant: str = "rk4"
    max_iterations: int = 15
    max_order: float = 5.0


@dataclass(frozen=True)
class ValidationSettings:
    n_samples: int = 1000
    substeps: int = 100
    slack: float = 1e-9


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    center: tuple
    half_widths: tuple
    alpha: tuple
    beta: tuple
    vehicle: VehicleParams = VehicleParams()
    environment: Environment = Environment()
    reach: ReachSettings = ReachSettings()
    thermal: ThermalSettings = ThermalSettings()
    mpc: MpcSettings | None = None
    validation: ValidationSettings = ValidationSettings()
    seed: int = 42
    output_dir: str = "out"
    description: str = ""

    def initial_set(self) -> Zonotope:
        return Zonotope(np.array(self.center), np.diag(self.half_widths))

    def input_set(self) -> Zonotope:
        return Zonotope.from_box([self.alpha[0], self.beta[0]], [self.alpha[1], self.beta[1]])

    def reach_config(self, time_step: float | None = None, horizon: float | None = None,
                     max_order: float | None = None) -> ReachConfig:
        r = self.reach
        tol = None if r.error_tolerance is None else np.array(r.error_tolerance)
        return ReachConfig(
            time_step=r.time_step if time_step is None else time_step,
            horizon=r.horizon if horizon is None else horizon,
            input_set=self.input_set(),
            error_tolerance=tol,
            max_splits=r.max_splits,
            max_order=r.max_order if max_order is None else max_order,
            max_constraints=r.max_constraints,
            kappa=r.kappa,
            remainder_pieces=r.remainder_pieces,
            remainder_dims=r.remainder_dims,
        )

    def mpc_config(self):
        from .nmpc import MpcConfig

        m = self.mpc or MpcSettings()
        return MpcConfig(
            horizon=m.N,
            sampling_time=m.Ts,
            Q=np.diag(m.Q_diag),
            R=np.diag(m.R_diag),
            du_max=None if m.du_max is None else np.array(m.du_max),
            plant=m.plant,
            max_iterations=m.max_iterations,
        )

    def to_dict(self) -> dict:
        """Fully resolved document (SI numbers only) that parses back to an equal config."""
        out = {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "description": self.description,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "vehicle": asdict(self.vehicle),
            "environment": asdict(self.environment),
            "initial_set": {"center": list(self.center), "half_widths": list(self.half_widths)},
            "controls": {"alpha": list(self.alpha), "beta": list(self.beta)},
            "reach": _plain(asdict(self.reach)),
            "thermal": _plain(asdict(self.thermal)),
            "validation": asdict(self.validation),
        }
        if self.mpc is not None:
            out["mpc"] = _plain(asdict(self.mpc))
        return out


def _plain(d: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _vec(values, dims, where):
    return tuple(quantity(v, d, f"{where}[{i}]") for i, (v, d) in enumerate(zip(values, dims)))


def _build(doc: dict) -> ScenarioConfig:
    errors = []

    def grab(section, key, dim, default):
        raw = doc.get(section, {}).get(key)
        if raw is None:
            return default
        try:
            return quantity(raw, dim, f"{section}.{key}")
        except ScenarioError as e:
            errors.extend(e.errors)
            return default

    def guarded(fn, *a):
        try:
            return fn(*a)
        except ScenarioError as e:
            errors.extend(e.errors)
            return None

    veh = doc.get("vehicle", {})
    vehicle_kw = {"m": grab("vehicle", "m", "mass", VehicleParams.m), "S": grab("vehicle", "S", "area", VehicleParams.S)}
    vehicle_kw.update({k: float(veh[k]) for k in ("a0", "a1", "b0", "b1", "b2") if k in veh})
    env_kw = {
        "G": grab("environment", "G", "grav_param", Environment.G),
        "rho0": grab("environment", "rho0", "density", Environment.rho0),
        "Re": grab("environment", "Re", "length", Environment.Re),
        "hr": grab("environment", "hr", "length", Environment.hr),
    }
    init = doc["initial_set"]
    center = guarded(_vec, init["center"], STATE_DIMS, "initial_set.center")
    hw = DEFAULT_HALF_WIDTHS if "half_widths" not in init else guarded(
        _vec, init["half_widths"], STATE_DIMS, "initial_set.half_widths")
    alpha = guarded(_vec, doc["controls"]["alpha"], ("angle",) * 2, "controls.alpha")
    beta = guarded(_vec, doc["controls"]["beta"], ("angle",) * 2, "controls.beta")

    r = doc.get("reach", {})
    tol = r.get("error_tolerance")
    reach = ReachSettings(
        time_step=grab("reach", "time_step", "time", ReachSettings.time_step),
        horizon=grab("reach", "horizon", "time", ReachSettings.horizon),
        error_tolerance=None if tol is None else guarded(_vec, tol, STATE_DIMS, "reach.error_tolerance"),
        **{k: r[k] for k in ("max_order", "max_constraints", "max_splits", "kappa",
                             "remainder_pieces", "remainder_dims") if k in r},
    )
    th = doc.get("thermal", {})
    trust = th.get("trust_box")
    thermal = ThermalSettings(
        Qdot_max=grab("thermal", "Qdot_max", "heat_flux", ThermalSettings.Qdot_max),
        trust_box=ThermalSettings.trust_box if trust is None else guarded(
            _vec, trust, ("length", "speed"), "thermal.trust_box"),
        **{k: th[k] for k in ("C", "sigma", "epsilon", "audit_factor") if k in th},
    )
    mpc = None
    if "mpc" in doc:
        mp = doc["mpc"]
        du = mp.get("du_max")
        mpc = MpcSettings(
            Ts=grab("mpc", "Ts", "time", MpcSettings.Ts),
            duration=grab("mpc", "duration", "time", MpcSettings.duration),
            du_max=None if du is None else guarded(_vec, du, ("angle",) * 2, "mpc.du_max"),
            **{k: (tuple(mp[k]) if isinstance(mp[k], list) else mp[k])
               for k in ("N", "Q_diag", "R_diag", "heat_constrained", "plant", "max_iterations", "max_order")
               if k in mp},
        )
    validation = ValidationSettings(**doc.get("validation", {}))
    if errors:
        raise ScenarioError(errors)

    semantic = []
    for name, (lo, hi) in (("controls.alpha", alpha), ("controls.beta", beta)):
        if lo > hi:
            semantic.append(f"{name}: lower bound exceeds upper bound")
    if any(w < 0 for w in hw):
        semantic.append("initial_set.half_widths: must be nonnegative")
    if reach.time_step <= 0 or reach.horizon < reach.time_step:
        semantic.append("reach: need 0 < time_step <= horizon")
    if mpc is not None and (mpc.Ts <= 0 or mpc.duration < mpc.Ts):
        semantic.append("mpc: need 0 < Ts <= duration")
    elif mpc is not None and reach.time_step > 0:
        ratio = max(mpc.Ts, reach.time_step) / min(mpc.Ts, reach.time_step)
        if abs(ratio - round(ratio)) > 1e-9:
            semantic.append("mpc.Ts: must divide reach.time_step or be a multiple of it")
    try:
        vehicle = VehicleParams(**vehicle_kw)
        environment = Environment(**env_kw)
        ThermalParams(thermal.C, thermal.sigma, thermal.epsilon, thermal.Qdot_max)
    except ValueError as e:
        semantic.append(str(e))
        vehicle = environment = None
    if semantic:
        raise ScenarioError(semantic)
    return ScenarioConfig(
        name=doc.get("name", "scenario"),
        description=doc.get("description", ""),
        center=center,
        half_widths=tuple(hw),
        alpha=alpha,
        beta=beta,
        vehicle=vehicle,
        environment=environment,
        reach=reach,
        thermal=thermal,
        mpc=mpc,
        validation=validation,
        seed=int(doc.get("seed", 42)),
        output_dir=doc.get("output_dir", "out"),
    )


def load_scenario(doc: dict) -> ScenarioConfig:
    """Validate a scenario document and resolve defaults and units."""
    validator = jsonschema.Draft202012Validator(_schema())
    problems = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if problems:
        raise ScenarioError(
            f"{'.'.join(str(p) for p in e.absolute_path) or '<root>'}: {e.message}" for e in problems
        )
    return _build(doc)


def parse_scenario(path) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ScenarioError([f"<file>: invalid JSON ({e})"]) from None
    return load_scenario(doc)


def write_resolved(cfg: ScenarioConfig, out_dir) -> Path:
    """Echo the resolved configuration next to the run's outputs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "scenario.resolved.json"
    path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    return path
