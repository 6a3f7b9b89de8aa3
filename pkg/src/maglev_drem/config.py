"""Scenario description and TOML loading."""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction

from .control import BacksteppingConfig, IdaPbcConfig, ReferenceProfile
from .plant import NoiseConfig, PlantParams
from .sigproc import InjectionConfig, samples_per

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CONTROLLERS = ("ida-sensorless", "ida-state", "backstepping")
OBSERVERS = ("kkl", "luenberger")


@dataclass(frozen=True)
class ObserverConfig:
    gamma: float = 3.89e3
    a: float = 500.0
    gamma_R: float = 500.0
    gamma_lambda: float = 8000.0
    gamma_p: float = 30.0
    ell: float = -1e-4
    variant: str = "kkl"
    c1: float | None = None  # Luenberger gains; None picks 2 gamma_p / m and gamma_p^2 / m
    c2: float | None = None
    luenberger_correction: str = "printed"
    yv0: float | None = None  # None: -c (ball at q = 0)
    R_hat0: float | None = None  # None: half the true resistance
    true_yv: bool = False  # test hook: feed the true x2 wherever yv_hat is consumed

    def __post_init__(self):
        if self.variant not in OBSERVERS:
            raise ValueError(f"unknown observer variant {self.variant!r}")


@dataclass(frozen=True)
class ControllerConfig:
    kind: str = "ida-state"
    ida: IdaPbcConfig = field(default_factory=IdaPbcConfig)
    backstepping: BacksteppingConfig = field(default_factory=BacksteppingConfig)

    def __post_init__(self):
        if self.kind not in CONTROLLERS:
            raise ValueError(f"unknown controller {self.kind!r}")


@dataclass(frozen=True)
class SimConfig:
    duration: float = 8.0
    N: int = 200
    log_every: int = 20
    x0: tuple[float, float, float] | None = None  # None: at rest on the first reference level
    pe_window: float | None = None  # None: 10 epsilon
    backend: str = "auto"  # auto | compiled | python

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if int(self.log_every) != self.log_every or self.log_every < 1:
            raise ValueError("log_every must be a positive integer")
        if not self.duration >= 0:
            raise ValueError("duration must be >= 0")
        if self.backend not in ("auto", "compiled", "python"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.x0 is not None:
            object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))


@dataclass(frozen=True)
class ScenarioConfig:
    plant: PlantParams = field(default_factory=PlantParams)
    injection: InjectionConfig = field(default_factory=InjectionConfig)
    observer: ObserverConfig = field(default_factory=ObserverConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    reference: ReferenceProfile = field(default_factory=ReferenceProfile)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    sim: SimConfig = field(default_factory=SimConfig)

    @property
    def h(self) -> float:
        return self.injection.epsilon / self.sim.N

    @property
    def n_steps(self) -> int:
        return samples_per(self.sim.duration, self.h)

    @property
    def warmup(self) -> float:
        return self.injection.w

    @property
    def x0(self) -> tuple[float, float, float]:
        if self.sim.x0 is not None:
            return self.sim.x0
        return (self.plant.lambda_star, self.reference.levels[0] - self.plant.c, 0.0)

    @property
    def pe_window(self) -> float:
        return 10.0 * self.injection.epsilon if self.sim.pe_window is None else self.sim.pe_window

    def validate(self) -> "ScenarioConfig":
        """Check the cross-field invariants; returns self."""
        h = self.h
        samples_per(self.injection.d, h)
        samples_per(self.injection.w, h)
        self.n_steps
        if self.sim.duration > 0 and not self.sim.duration > self.warmup:
            raise ValueError("duration must exceed the warm-up window 2d")
        self.reference.check(self.plant)
        if not self.x0[1] < 0:
            raise ValueError("initial x2 must be negative (ball below the magnet)")
        if self.noise.hold_interval is not None:
            samples_per(self.noise.hold_interval, h)
        return self

    def with_epsilon(self, epsilon: float) -> "ScenarioConfig":
        return replace(self, injection=replace(self.injection, epsilon=epsilon))

    def with_N(self, N: int) -> "ScenarioConfig":
        return replace(self, sim=replace(self.sim, N=N))

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, noise=replace(self.noise, seed=seed))

    def with_observer(self, variant: str) -> "ScenarioConfig":
        return replace(self, observer=replace(self.observer, variant=variant))

    def with_controller(self, kind: str) -> "ScenarioConfig":
        return replace(self, controller=replace(self.controller, kind=kind))


def parse_number(text) -> float:
    """Accept numbers or strings such as ``"1/300"``."""
    if isinstance(text, (int, float)):
        return float(text)
    return float(Fraction(str(text).strip()))


def _build(cls, table: dict, section: str):
    names = {f.name for f in fields(cls)}
    unknown = set(table) - names
    if unknown:
        raise ValueError(f"unknown keys in [{section}]: {sorted(unknown)}")
    kwargs = {}
    for f in fields(cls):
        if f.name not in table:
            continue
        value = table[f.name]
        if f.type in ("float", "float | None") and isinstance(value, str):
            value = parse_number(value)
        kwargs[f.name] = value
    return cls(**kwargs)


_IDA_KEYS = {"Kp", "alpha", "lambda_star", "u_max"}
_BS_KEYS = {"Ki", "gamma1", "gamma2", "p_star", "wiring", "resistance"}


def _controller_from(table: dict) -> ControllerConfig:
    table = dict(table)
    kind = table.pop("kind", "ida-state")
    unknown = set(table) - _IDA_KEYS - _BS_KEYS
    if unknown:
        raise ValueError(f"unknown keys in [controller]: {sorted(unknown)}")
    ida = _build(IdaPbcConfig, {k: v for k, v in table.items() if k in _IDA_KEYS}, "controller")
    bs_table = {k: v for k, v in table.items() if k in _BS_KEYS}
    if "u_max" in table:
        bs_table["u_max"] = table["u_max"]
    bs = _build(BacksteppingConfig, bs_table, "controller")
    return ControllerConfig(kind=kind, ida=ida, backstepping=bs)


def config_from_dict(data: dict) -> ScenarioConfig:
    sections = {"plant", "injection", "observer", "controller", "reference", "noise", "sim"}
    unknown = set(data) - sections
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    ref = dict(data.get("reference", {}))
    if "levels" in ref:
        ref["levels"] = tuple(parse_number(v) for v in ref["levels"])
    return ScenarioConfig(
        plant=_build(PlantParams, data.get("plant", {}), "plant"),
        injection=_build(InjectionConfig, data.get("injection", {}), "injection"),
        observer=_build(ObserverConfig, data.get("observer", {}), "observer"),
        controller=_controller_from(data.get("controller", {})),
        reference=_build(ReferenceProfile, ref, "reference"),
        noise=_build(NoiseConfig, data.get("noise", {}), "noise"),
        sim=_build(SimConfig, data.get("sim", {}), "sim"),
    )


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(data)


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Plain nested dict (useful for reports)."""
    d = dataclasses.asdict(cfg)
    ctrl = d.pop("controller")
    d["controller"] = {"kind": ctrl["kind"], **ctrl["ida"], **ctrl["backstepping"]}
    return d
