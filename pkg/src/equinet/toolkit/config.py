"""Versioned JSON run configuration.

Example::

    {
      "version": 1,
      "problem": "miso2d",
      "system": {"K": 2, "N_t": 4, "P_tot": 1.0, "sigma2": 0.1},
      "model": {"hidden": [64, 64, 64], "norm": true},
      "channel": {"kind": "rayleigh"},
      "train": {"epochs": 30, "batch_size": 200, "lr": 0.001, "seed": 0,
                "n_train": 20000, "n_val": 1000},
      "data": {"n_samples": 2000, "seed": 1}
    }

Validation errors raise :class:`ConfigError` naming the dotted field.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from equinet.channels import SVParams, WidebandParams
from equinet.problems.heads import HEADS, ModelSpec

VERSION = 1
CHANNEL_KINDS = ("rayleigh", "sv", "wideband", "pc_gains")


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class SystemConfig:
    K: int = 2
    N_t: int = 4
    N_s: int = 2
    M: int = 1
    P_tot: float = 1.0
    sigma2: float = 0.1


@dataclass
class ModelConfig:
    hidden: list[int] = field(default_factory=lambda: [32, 32, 32])
    norm: bool = True
    antenna_subsets: list[int] | None = None


@dataclass
class ChannelConfig:
    kind: str = "rayleigh"
    N_cl: int = 4
    N_ray: int = 5
    angular_spread_deg: float = 10.0
    d_over_lambda: float = 0.5
    D: int = 4
    rolloff: float = 0.3


@dataclass
class TrainSection:
    epochs: int = 10
    batch_size: int = 500
    lr: float = 1e-3
    seed: int = 0
    n_train: int = 10_000
    n_val: int = 1_000


@dataclass
class DataSection:
    n_samples: int = 1_000
    seed: int = 1


@dataclass
class RunConfig:
    problem: str = "miso2d"
    system: SystemConfig = field(default_factory=SystemConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    train: TrainSection = field(default_factory=TrainSection)
    data: DataSection = field(default_factory=DataSection)
    version: int = VERSION

    def model_spec(self) -> ModelSpec:
        s = self.system
        return ModelSpec(self.problem, s.K, s.N_t, s.N_s, s.M, list(self.model.hidden), self.model.norm,
                         s.P_tot, s.sigma2, self.model.antenna_subsets)

    def sv_params(self) -> SVParams:
        c = self.channel
        return SVParams(c.N_cl, c.N_ray, c.angular_spread_deg, c.d_over_lambda)

    def wb_params(self) -> WidebandParams:
        return WidebandParams(self.system.M, self.channel.D, self.channel.rolloff)

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def _section(cls, raw, name):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(name, "must be an object")
    known = set(cls.__dataclass_fields__)
    for key in raw:
        if key not in known:
            raise ConfigError(f"{name}.{key}", "unknown field")
    return cls(**raw)


def _positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(name, f"must be a positive integer, got {value!r}")


def _positive(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise ConfigError(name, f"must be a positive number, got {value!r}")


def from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    known = set(RunConfig.__dataclass_fields__)
    for key in raw:
        if key not in known:
            raise ConfigError(key, "unknown field")
    version = raw.get("version")
    if version != VERSION:
        raise ConfigError("version", f"expected {VERSION}, got {version!r}")
    problem = raw.get("problem")
    if problem not in HEADS:
        raise ConfigError("problem", f"expected one of {sorted(HEADS)}, got {problem!r}")
    try:
        cfg = RunConfig(
            problem=problem,
            system=_section(SystemConfig, raw.get("system"), "system"),
            model=_section(ModelConfig, raw.get("model"), "model"),
            channel=_section(ChannelConfig, raw.get("channel"), "channel"),
            train=_section(TrainSection, raw.get("train"), "train"),
            data=_section(DataSection, raw.get("data"), "data"),
        )
    except TypeError as exc:  # missing required values cannot happen; keep the message anyway
        raise ConfigError("<root>", str(exc)) from exc
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    s = cfg.system
    for name in ("K", "N_t", "N_s", "M"):
        _positive_int(getattr(s, name), f"system.{name}")
    _positive(s.P_tot, "system.P_tot")
    _positive(s.sigma2, "system.sigma2")
    if cfg.problem.startswith("hybrid") or cfg.problem == "wideband4d":
        if s.N_s > s.N_t:
            raise ConfigError("system.N_s", f"must not exceed N_t={s.N_t}")
    if not isinstance(cfg.model.hidden, list) or not cfg.model.hidden:
        raise ConfigError("model.hidden", "must be a non-empty list of channel counts")
    for i, c in enumerate(cfg.model.hidden):
        _positive_int(c, f"model.hidden[{i}]")
    if not isinstance(cfg.model.norm, bool):
        raise ConfigError("model.norm", "must be true or false")
    subsets = cfg.model.antenna_subsets
    if subsets is not None:
        if cfg.problem != "miso2d":
            raise ConfigError("model.antenna_subsets", "only supported for problem miso2d")
        if not isinstance(subsets, list) or sum(subsets) != s.N_t:
            raise ConfigError("model.antenna_subsets", f"must be a list of sizes summing to N_t={s.N_t}")
    c = cfg.channel
    if c.kind not in CHANNEL_KINDS:
        raise ConfigError("channel.kind", f"expected one of {CHANNEL_KINDS}, got {c.kind!r}")
    expected = {"power": ("pc_gains",), "wideband4d": ("wideband",)}.get(cfg.problem, ("rayleigh", "sv"))
    if c.kind not in expected:
        raise ConfigError("channel.kind", f"problem {cfg.problem} needs one of {expected}, got {c.kind!r}")
    for name in ("N_cl", "N_ray", "D"):
        _positive_int(getattr(c, name), f"channel.{name}")
    if not 0 <= c.rolloff <= 1:
        raise ConfigError("channel.rolloff", "must lie in [0, 1]")
    t = cfg.train
    for name in ("epochs", "batch_size", "n_train", "n_val"):
        _positive_int(getattr(t, name), f"train.{name}")
    if isinstance(t.lr, bool) or not isinstance(t.lr, (int, float)) or t.lr < 0:
        raise ConfigError("train.lr", f"must be a nonnegative number, got {t.lr!r}")
    if isinstance(t.seed, bool) or not isinstance(t.seed, int) or t.seed < 0:
        raise ConfigError("train.seed", "must be a nonnegative integer")
    _positive_int(cfg.data.n_samples, "data.n_samples")


def load(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
    return from_dict(raw)
