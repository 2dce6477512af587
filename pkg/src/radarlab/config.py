"""Typed run configuration: YAML in, validated dataclasses out.

A config file is a mapping of sections (``scenario``, ``detection``, ``radar``,
``env``, ``agent``, ``train``, ``sweep``, ``nsga``, ``simulate``) plus the
top-level ``out_dir`` and ``master_seed``. Every key is checked against the
matching dataclass; unknown or ill-typed entries raise :class:`ConfigError`
with the full field path so a typo is findable from the message alone.

The resolved config is what gets frozen into each run directory: it is fully
materialised (all defaults filled in) and hashes stably via
:func:`config_hash`.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .drl.train import TrainSchedule
from .env import CdrlEnv, EnvParams
from .scanning import DetectionSpec, RadarParams
from .scenario import ScenarioConfig, SpawnRecord

ALGORITHMS = ("sac", "ddpg")
SIMULATE_POLICIES = ("equal", "checkpoint", "scripted")


class ConfigError(ValueError):
    """Invalid configuration; the message carries the offending field path."""


@dataclass
class AgentSettings:
    """Hyperparameters handed to the agent constructor."""

    algorithm: str = "sac"
    alpha: float = 0.025
    discount: float = 0.9
    lr: float = 1e-4
    rho: float = 0.005
    noise_std: float = 0.1
    actor_hidden: tuple[int, ...] | None = None  # None -> per-algorithm default
    critic_hidden: tuple[int, ...] = (100, 100)
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError(f"discount must lie in [0, 1], got {self.discount}")
        for name in ("alpha", "lr", "rho", "noise_std"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def build_kwargs(self) -> dict:
        kwargs = {"discount": self.discount, "lr": self.lr, "rho": self.rho}
        if self.algorithm == "sac":
            kwargs["alpha"] = self.alpha
        else:
            kwargs["noise_std"] = self.noise_std
        if self.actor_hidden is not None:
            kwargs["actor_hidden"] = self.actor_hidden
        kwargs["critic_hidden"] = self.critic_hidden
        return kwargs


@dataclass
class TrainSettings:
    """Mirror of the training loop schedule (see drl.train.TrainSchedule)."""

    steps: int = 12_000
    warmup: int = 1_000
    batch_size: int = 128
    buffer_capacity: int = 100_000
    noise_final: float = 0.01
    reward_clip: float = 100.0

    def __post_init__(self):
        for name in ("steps", "warmup", "batch_size", "buffer_capacity"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def schedule(self) -> TrainSchedule:
        return TrainSchedule(**dataclasses.asdict(self))


@dataclass
class SweepSettings:
    """Which scan-weight values the sweep trains a policy for."""

    betas: tuple[float, ...] | None = None
    count: int = 12
    beta_max: float = 3e5
    beta_min: float = 1e3

    def __post_init__(self):
        if self.betas is None:
            if self.count < 2:
                raise ValueError(f"count must be >= 2, got {self.count}")
            if not 0 < self.beta_min < self.beta_max:
                raise ValueError("need 0 < beta_min < beta_max")
        else:
            if len(self.betas) == 0:
                raise ValueError("betas must not be empty")
            if any(b < 0 for b in self.betas):
                raise ValueError("betas must be non-negative")

    def resolve(self) -> tuple[float, ...]:
        """Explicit list if given, else zero plus a log-spaced ladder."""
        if self.betas is not None:
            return tuple(float(b) for b in self.betas)
        ladder = np.logspace(np.log10(self.beta_min), np.log10(self.beta_max), self.count - 1)
        return (0.0, *(float(b) for b in ladder))


@dataclass
class NsgaSettings:
    """Evolutionary baseline controls plus which RL fronts to compare against."""

    population_size: int = 120
    generations: int = 150
    n_points: int = 20
    crossover_prob: float = 0.9
    eta_c: float = 15.0
    mutation_prob: float | None = None
    eta_m: float = 20.0
    seed: int = 0
    eval_offset: int = 0
    # Seed the initial population with the binary corner allocations (full
    # scan, single-slot, idle, ...); random initialization cannot reach them.
    seed_corners: bool = True
    rl_fronts: tuple[str, ...] = ()

    def __post_init__(self):
        if self.n_points < 1:
            raise ValueError(f"n_points must be >= 1, got {self.n_points}")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")


@dataclass
class SimulateSettings:
    """What drives the single rollout: a fixed split, a checkpoint, or a file."""

    policy: str = "equal"
    checkpoint: str = ""
    schedule_csv: str = ""
    eval_offset: int = 0

    def __post_init__(self):
        if self.policy not in SIMULATE_POLICIES:
            raise ValueError(
                f"policy must be one of {SIMULATE_POLICIES}, got {self.policy!r}"
            )
        if self.policy == "checkpoint" and not self.checkpoint:
            raise ValueError("policy 'checkpoint' requires a checkpoint path")
        if self.policy == "scripted" and not self.schedule_csv:
            raise ValueError("policy 'scripted' requires a schedule_csv path")


@dataclass
class RunConfig:
    """Everything a command needs, with defaults already applied."""

    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    detection: DetectionSpec = field(default_factory=DetectionSpec)
    radar: RadarParams | None = None  # None -> calibrated from detection
    env: EnvParams = field(default_factory=EnvParams)
    agent: AgentSettings = field(default_factory=AgentSettings)
    train: TrainSettings = field(default_factory=TrainSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    nsga: NsgaSettings = field(default_factory=NsgaSettings)
    simulate: SimulateSettings = field(default_factory=SimulateSettings)
    out_dir: str = "runs"
    master_seed: int = 0

    def __post_init__(self):
        if self.radar is None:
            self.radar = RadarParams.calibrated(self.detection)

    def build_env(self, beta: float | None = None) -> CdrlEnv:
        params = self.env if beta is None else dataclasses.replace(self.env, beta=beta)
        return CdrlEnv(self.scenario, self.radar, self.detection, params)


# -- section parsing -----------------------------------------------------------


def _spawn_record(value, path: str) -> SpawnRecord:
    names = [f.name for f in dataclasses.fields(SpawnRecord)]
    if isinstance(value, dict):
        unknown = [k for k in value if k not in names]
        if unknown:
            raise ConfigError(f"{path}.{unknown[0]}: unknown field (expected {names})")
        missing = [k for k in names if k not in value]
        if missing:
            raise ConfigError(f"{path}.{missing[0]}: missing field")
        return SpawnRecord(**value)
    if isinstance(value, (list, tuple)):
        if len(value) != len(names):
            raise ConfigError(f"{path}: expected {len(names)} values {names}, got {len(value)}")
        return SpawnRecord(*value)
    raise ConfigError(f"{path}: expected a mapping or a {len(names)}-element list")


def _schedule(value, path: str):
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{path}: expected a list of spawn records")
    return tuple(_spawn_record(rec, f"{path}[{i}]") for i, rec in enumerate(value))


def _pair(value, path: str):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{path}: expected a [low, high] pair")
    return tuple(value)


def _int_tuple(value, path: str):
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{path}: expected a list of layer widths")
    return tuple(int(v) for v in value)


def _float_tuple(value, path: str):
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{path}: expected a list of numbers")
    return tuple(float(v) for v in value)


def _str_tuple(value, path: str):
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{path}: expected a list of paths")
    return tuple(str(v) for v in value)


_CONVERTERS = {
    "scenario": {
        "schedule": _schedule,
        "radius_range": _pair,
        "speed_range": _pair,
        "spawn_time_range": _pair,
        "lifetime_range": _pair,
    },
    "agent": {"actor_hidden": _int_tuple, "critic_hidden": _int_tuple},
    "sweep": {"betas": _float_tuple},
    "nsga": {"rl_fronts": _str_tuple},
}


def _build_section(cls, data, path: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    converters = _CONVERTERS.get(path, {})
    kwargs = {}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"{path}.{key}: unknown field")
        conv = converters.get(key)
        kwargs[key] = conv(value, f"{path}.{key}") if (conv and value is not None) else value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _build_radar(data, detection: DetectionSpec) -> RadarParams:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"radar: expected a mapping, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(RadarParams)}
    for key in data:
        if key not in names and key != "tau_scan_ref":
            raise ConfigError(f"radar.{key}: unknown field")
    data = dict(data)
    tau_scan_ref = data.pop("tau_scan_ref", 0.25)
    try:
        if "transmit_power" in data:
            return RadarParams(**data)
        reference_range = data.pop("reference_range", 10e3)
        return RadarParams.calibrated(
            detection, reference_range=reference_range, tau_scan_ref=tau_scan_ref, **data
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"radar: {exc}") from None


_SECTIONS = {
    "scenario": ScenarioConfig,
    "detection": DetectionSpec,
    "env": EnvParams,
    "agent": AgentSettings,
    "train": TrainSettings,
    "sweep": SweepSettings,
    "nsga": NsgaSettings,
    "simulate": SimulateSettings,
}


def parse_config(data: dict | None, source: str = "config") -> RunConfig:
    """Validate a raw mapping (already parsed YAML) into a RunConfig."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    known = set(_SECTIONS) | {"radar", "out_dir", "master_seed"}
    for key in data:
        if key not in known:
            raise ConfigError(f"{key}: unknown section")
    sections = {name: _build_section(cls, data.get(name), name) for name, cls in _SECTIONS.items()}
    radar = _build_radar(data.get("radar"), sections["detection"])
    out_dir = data.get("out_dir", "runs")
    master_seed = data.get("master_seed", 0)
    if not isinstance(out_dir, str):
        raise ConfigError(f"out_dir: expected a string, got {type(out_dir).__name__}")
    if not isinstance(master_seed, int) or isinstance(master_seed, bool):
        raise ConfigError(f"master_seed: expected an integer, got {master_seed!r}")
    return RunConfig(radar=radar, out_dir=out_dir, master_seed=master_seed, **sections)


def load_config(path=None, *, seed: int | None = None, out_dir: str | None = None) -> RunConfig:
    """Read YAML from `path` (defaults apply when None) and apply overrides."""
    data: dict | None = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"{path}: no such config file")
        try:
            data = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from None
        source = str(path)
    else:
        source = "config"
    config = parse_config(data, source)
    if seed is not None:
        config.master_seed = seed
    if out_dir is not None:
        config.out_dir = out_dir
    return config


# -- serialisation -------------------------------------------------------------


def config_to_dict(config: RunConfig) -> dict:
    """Plain nested dict (tuples become lists) suitable for YAML or JSON."""
    return json.loads(json.dumps(dataclasses.asdict(config), sort_keys=True))


def config_hash(config: RunConfig) -> str:
    """First 16 hex digits of the SHA-256 of the canonical JSON form."""
    canonical = json.dumps(dataclasses.asdict(config), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def save_resolved_config(config: RunConfig, path) -> Path:
    """Freeze the fully-resolved config next to a run's artifacts."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(config_to_dict(config), sort_keys=True))
    return path
