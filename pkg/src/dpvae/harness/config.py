"""Flat training configuration and its JSON file form."""
from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ..datagen import GENERATORS, Dataset2D, train_heldout
from ..netlib import Mlp
from ..objectives import ObjectiveConfig, discriminator
from ..vae import VaeModel


class ConfigError(ValueError):
    pass


class NumericAbort(ArithmeticError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, iteration: int, components: dict):
        self.iteration = iteration
        self.components = components
        parts = ", ".join(f"{k}={v!r}" for k, v in components.items())
        super().__init__(f"non-finite loss at iteration {iteration}: {parts}")


@dataclass
class TrainConfig:
    # objective
    kind: str = "vanilla"
    prior_mode: str = "standard"
    beta: float | None = None
    gamma: float | None = None
    alpha: float | None = None
    lam: float | None = None
    c_max: float | None = None
    c_stop: int | None = None
    # optimization
    learning_rate: float = 1e-4
    batch_size: int = 100
    iterations: int = 20000
    seed: int = 0
    # data
    dataset: str = "two_moons"
    n_train: int = 2048
    n_heldout: int = 512
    noise: float = 0.05
    data_seed: int = 0
    grid_k: int = 3
    grid_spacing: float = 2.0
    # model
    latent_dim: int = 2
    hidden: list = field(default_factory=lambda: [100, 50])
    obs_std: float = 1.0
    flow_blocks: int = 4
    flow_width: int = 64
    s_max: float = 2.0
    disc_width: int = 1000
    disc_depth: int = 5
    disc_learning_rate: float = 1e-4
    output_dir: str | None = None

    def __post_init__(self):
        try:
            self.objective
        except ValueError as err:
            raise ConfigError(str(err)) from None
        for name in ("learning_rate", "batch_size", "n_train", "latent_dim", "obs_std", "disc_learning_rate"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.iterations < 0:
            raise ConfigError("iterations must be non-negative")
        if self.dataset not in GENERATORS:
            raise ConfigError(f"unknown dataset {self.dataset!r}")
        if self.batch_size > self.n_train:
            raise ConfigError("batch_size exceeds the training set")
        if self.kind in ("beta-tc", "factor") and self.batch_size < 2:
            raise ConfigError(f"{self.kind} needs batch_size >= 2")
        self.hidden = [int(h) for h in self.hidden]

    @property
    def objective(self) -> ObjectiveConfig:
        return ObjectiveConfig(
            self.kind, self.beta, self.gamma, self.alpha, self.lam, self.c_max, self.c_stop, self.prior_mode
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        raw = dict(raw)
        if "lambda" in raw:
            raw["lam"] = raw.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**raw)
        except TypeError as err:
            raise ConfigError(str(err)) from None

    @classmethod
    def load(cls, path) -> "TrainConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config {path}: {err}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(raw)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path


def stream(seed: int, purpose: str) -> np.random.Generator:
    """Independent generator for one purpose (init, batching, noise, ...)."""
    return np.random.default_rng([seed, zlib.crc32(purpose.encode())])


def build_model(cfg: TrainConfig) -> tuple[VaeModel, Mlp | None]:
    model = VaeModel.build(
        data_dim=2,
        latent_dim=cfg.latent_dim,
        hidden=cfg.hidden,
        prior_mode=cfg.prior_mode,
        flow_blocks=cfg.flow_blocks,
        flow_width=cfg.flow_width,
        s_max=cfg.s_max,
        obs_std=cfg.obs_std,
    )
    disc = discriminator(cfg.latent_dim, cfg.disc_width, cfg.disc_depth) if cfg.kind == "factor" else None
    return model, disc


def load_data(cfg: TrainConfig) -> tuple[Dataset2D, Dataset2D]:
    kwargs = {"noise": cfg.noise}
    if cfg.dataset == "gaussian_grid":
        kwargs.update(k=cfg.grid_k, spacing=cfg.grid_spacing)
    return train_heldout(cfg.dataset, cfg.n_train, cfg.n_heldout, cfg.data_seed, **kwargs)
