"""Checkpoints: a JSON manifest plus named parameter arrays.

Parameters are written as decimal text with 17 significant digits in a
fixed order, which round-trips float64 exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..diffcore import ParamStore
from ..netlib import Mlp, init_params
from ..vae import VaeModel
from .config import ConfigError, TrainConfig, build_model

FORMAT = "dpvae-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: TrainConfig
    iteration: int
    params: ParamStore
    disc_params: ParamStore | None = None

    def model(self) -> tuple[VaeModel, Mlp | None]:
        return build_model(self.config)

    def _all_params(self):
        yield from self.params.items()
        if self.disc_params is not None:
            yield from self.disc_params.items()

    def manifest(self) -> dict:
        return {
            "format": FORMAT,
            "version": VERSION,
            "iteration": self.iteration,
            "config": self.config.to_dict(),
            "shapes": {name: list(v.shape) for name, v in self._all_params()},
        }

    def dumps(self) -> str:
        lines = ["{", f'"manifest": {json.dumps(self.manifest(), sort_keys=True)},', '"params": [']
        entries = []
        for name, v in self._all_params():
            vals = ", ".join("%.17g" % x for x in v.ravel())
            entries.append(f'{{"name": {json.dumps(name)}, "shape": {json.dumps(list(v.shape))}, "values": [{vals}]}}')
        lines.append(",\n".join(entries))
        lines.append("]}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.dumps())
        return path

    @classmethod
    def loads(cls, text: str) -> "Checkpoint":
        try:
            raw = json.loads(text)
            manifest = raw["manifest"]
        except (json.JSONDecodeError, KeyError, TypeError) as err:
            raise CheckpointError(f"malformed checkpoint: {err}") from None
        if manifest.get("format") != FORMAT:
            raise CheckpointError("not a dpvae checkpoint")
        try:
            cfg = TrainConfig.from_dict(manifest["config"])
        except ConfigError as err:
            raise CheckpointError(f"bad config in checkpoint: {err}") from None
        model, disc = build_model(cfg)
        expected = dict(manifest["shapes"])
        params = model.init_params(cfg.seed)
        disc_params = None
        if disc is not None:
            disc_params = init_params(disc, ParamStore(), cfg.seed)
        stores = [params] + ([disc_params] if disc_params is not None else [])
        owned = {name: store for store in stores for name in store}
        if set(owned) != set(expected):
            raise CheckpointError("parameter names do not match the configured model")
        for entry in raw["params"]:
            name = entry["name"]
            arr = np.array(entry["values"], dtype=np.float64).reshape(entry["shape"])
            store = owned[name]
            if store[name].shape != arr.shape:
                raise CheckpointError(f"{name}: shape {arr.shape} != {store[name].shape}")
            store[name] = arr
        return cls(cfg, int(manifest["iteration"]), params, disc_params)

    @classmethod
    def load(cls, path) -> "Checkpoint":
        try:
            text = Path(path).read_text()
        except OSError as err:
            raise CheckpointError(f"cannot read {path}: {err}") from None
        return cls.loads(text)
