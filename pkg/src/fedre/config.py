"""Experiment configuration: dataclasses, JSON parsing, validation.

Configs are plain JSON objects. Every field has a default except the ones a
run cannot invent (nothing, currently: a minimal ``{}`` runs the default
blob experiment). Unknown keys are rejected by name so typos never silently
fall back to defaults.
"""

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import baselines, data, entangle, protocol


class ConfigError(ValueError):
    """A config file failed validation."""


@dataclass
class DatasetConfig:
    kind: str = "blobs"  # "blobs" | "csv"
    classes: int = 10
    per_class: int = 50
    dim: int = 2
    spread: float = 1.0
    path: str | None = None

    def validate(self):
        if self.kind not in ("blobs", "csv"):
            raise ConfigError(f"dataset.kind {self.kind!r} is not blobs or csv")
        if self.kind == "csv" and not self.path:
            raise ConfigError("dataset.kind csv needs dataset.path")
        if self.kind == "blobs":
            if min(self.classes, self.per_class, self.dim) < 1:
                raise ConfigError("dataset sizes must be positive")
            if self.spread <= 0:
                raise ConfigError("dataset.spread must be positive")


@dataclass
class PartitionConfig:
    mode: str = data.PRA
    alpha: float = 0.1
    categories_per_client: int = 2
    imbalance_factor: float = 100.0

    def validate(self):
        if self.mode not in data.PARTITION_MODES:
            raise ConfigError(f"partition.mode {self.mode!r} unknown")
        if self.alpha <= 0:
            raise ConfigError("partition.alpha must be positive")
        if self.categories_per_client < 1:
            raise ConfigError("partition.categories_per_client must be positive")
        if self.imbalance_factor < 1:
            raise ConfigError("partition.imbalance_factor must be >= 1")


@dataclass
class InversionConfig:
    steps: int = 300
    lr: float = 0.05
    init_scale: float = 1.0
    num_targets: int = 3
    restarts: int = 1  # independent attack starts per target, best kept
    data_range: float | None = None  # None: empirical range of the client data

    def validate(self):
        if self.steps < 0:
            raise ConfigError("inversion.steps must be nonnegative")
        if self.lr <= 0:
            raise ConfigError("inversion.lr must be positive")
        if self.num_targets < 1:
            raise ConfigError("inversion.num_targets must be positive")
        if self.restarts < 1:
            raise ConfigError("inversion.restarts must be positive")
        if self.data_range is not None and self.data_range <= 0:
            raise ConfigError("inversion.data_range must be positive")


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    num_clients: int = 10
    participation_rate: float = 1.0
    rounds: int = 100
    strategy: str = baselines.FEDRE
    mechanism: str = entangle.RAP
    weight_distribution: str = entangle.UNIFORM
    resample: str = baselines.RESAMPLED
    rm_op: str = entangle.AP
    unified_dim: int = 8
    architectures: list | None = None  # hidden sizes per client; last is d_k
    client_lr: float = 0.05
    client_batch_size: int = 16
    client_epochs: int = 1
    server_lr: float = 0.01
    server_batch_size: int = 10
    server_epochs: int = 5
    train_fraction: float = 0.75
    comm_convention: str = protocol.REPRESENTATION_ONLY
    lambda_proto: float = 0.1
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    output_path: str = "runs/metrics.jsonl"
    inversion: InversionConfig = field(default_factory=InversionConfig)

    def validate(self):
        self.dataset.validate()
        self.partition.validate()
        self.inversion.validate()
        if self.num_clients < 1:
            raise ConfigError("num_clients must be positive")
        if not 0.0 < self.participation_rate <= 1.0:
            raise ConfigError("participation_rate must lie in (0, 1]")
        if self.rounds < 0:
            raise ConfigError("rounds must be nonnegative")
        if self.strategy not in baselines.STRATEGIES:
            raise ConfigError(
                f"strategy {self.strategy!r} not one of {baselines.STRATEGIES}"
            )
        if self.mechanism not in entangle.MECHANISMS:
            raise ConfigError(f"mechanism {self.mechanism!r} unknown")
        if self.weight_distribution not in entangle.DISTRIBUTIONS:
            raise ConfigError(
                f"weight_distribution {self.weight_distribution!r} unknown"
            )
        if self.resample not in baselines.RESAMPLE_MODES:
            raise ConfigError(f"resample {self.resample!r} not rs or fs")
        if self.rm_op not in entangle.RM_KINDS:
            raise ConfigError(f"rm_op {self.rm_op!r} unknown")
        if self.unified_dim < 1:
            raise ConfigError("unified_dim must be positive")
        if self.architectures is None:
            self.architectures = [[2 * self.unified_dim]] * self.num_clients
        if len(self.architectures) != self.num_clients:
            raise ConfigError(
                f"architectures lists {len(self.architectures)} entries but "
                f"num_clients is {self.num_clients}"
            )
        for k, hidden in enumerate(self.architectures):
            if not hidden or any(int(h) < 1 for h in hidden):
                raise ConfigError(f"architectures[{k}] must be positive sizes")
            if self.rm_op in (entangle.AP, entangle.MP) and (
                int(hidden[-1]) % self.unified_dim != 0
            ):
                raise ConfigError(
                    f"architectures[{k}] ends in {hidden[-1]}, which is not "
                    f"divisible by unified_dim {self.unified_dim} under "
                    f"{self.rm_op} mapping"
                )
        for name in ("client_lr", "server_lr"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        for name in (
            "client_batch_size",
            "client_epochs",
            "server_batch_size",
            "server_epochs",
        ):
            if getattr(self, name) < (0 if name.endswith("epochs") else 1):
                raise ConfigError(f"{name} is out of range")
        if not 0.0 <= self.train_fraction <= 1.0:
            raise ConfigError("train_fraction must lie in [0, 1]")
        if self.comm_convention not in protocol.CONVENTIONS:
            raise ConfigError(
                f"comm_convention {self.comm_convention!r} unknown"
            )
        if self.lambda_proto < 0:
            raise ConfigError("lambda_proto must be nonnegative")
        if not self.seeds:
            raise ConfigError("seeds must list at least one seed")
        if self.dataset.kind == "blobs" and self.partition.mode == data.PAT:
            if self.partition.categories_per_client > self.dataset.classes:
                raise ConfigError(
                    "partition.categories_per_client exceeds dataset.classes"
                )


def _from_mapping(cls, mapping, prefix=""):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{prefix or 'config'} must be a JSON object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(mapping) - names
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown config key {prefix + key!r}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in mapping:
            continue
        value = mapping[f.name]
        nested = {
            "dataset": DatasetConfig,
            "partition": PartitionConfig,
            "inversion": InversionConfig,
        }.get(f.name)
        kwargs[f.name] = (
            _from_mapping(nested, value, prefix=f.name + ".")
            if nested and prefix == ""
            else value
        )
    return cls(**kwargs)


def parse_config(mapping):
    """Build and validate an ExperimentConfig from a plain dict."""
    cfg = _from_mapping(ExperimentConfig, mapping)
    if cfg.architectures is None:
        cfg.architectures = [[2 * cfg.unified_dim]] * cfg.num_clients
    cfg.architectures = [[int(h) for h in hidden] for hidden in cfg.architectures]
    cfg.seeds = [int(s) for s in cfg.seeds]
    cfg.validate()
    return cfg


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path} is not valid JSON: {e}") from e
    return parse_config(raw)


def config_to_dict(cfg):
    return dataclasses.asdict(cfg)


def save_config(cfg, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n", encoding="utf-8")
