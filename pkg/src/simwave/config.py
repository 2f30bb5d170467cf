"""Experiment configuration: JSON in, fully resolved config out.

Every section and key is optional; missing keys take the defaults below
(the geometry and link defaults reproduce the 2048-element, four-layer,
5 GHz, 150 km setup). Unknown keys are rejected. Sub-config seeds left at
``null`` inherit the top-level ``seed``; the resolved dump writes them out
explicitly, so ``parse(dump(parse(x))) == parse(x)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from simwave.channel import ChannelConfig
from simwave.core import SimGeometry
from simwave.errors import ConfigError
from simwave.optimize import OPTIMIZERS, QUANT_SCHEDULES, TrainConfig

MODES = ("fit-operator", "train-classifier", "evaluate", "gen-dataset", "grad-check")
U64 = 2**64


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _ge1(v):
    return v >= 1


def _seed(v):
    return v is None or 0 <= v < U64


# key: (types, default, check or None, requirement text)
SCHEMA = {
    "": {
        "mode": (str, "train-classifier", lambda v: v in MODES, f"one of {MODES}"),
        "seed": (int, 0, lambda v: 0 <= v < U64, "an unsigned 64-bit integer"),
        "output_dir": (str, "out", None, ""),
    },
    "geometry": {
        "layers": (int, 4, _ge1, ">= 1"),
        "n_x": (int, 32, _ge1, ">= 1"),
        "n_y": (int, 16, _ge1, ">= 1"),
        "spacing_x": ((float, type(None)), None, lambda v: v is None or v > 0, "> 0 (null = lambda/2)"),
        "spacing_y": ((float, type(None)), None, lambda v: v is None or v > 0, "> 0 (null = lambda/2)"),
        "depth": (float, 0.05, _pos, "> 0"),
        "carrier_freq": (float, 5e9, _pos, "> 0"),
    },
    "channel": {
        "rx_count": (int, 4, _ge1, ">= 1"),
        "distance": (float, 150e3, _pos, "> 0"),
        "kappa": (float, 10.0, _nonneg, ">= 0"),
        "noise_power": (float, 1.0, _pos, "> 0"),
        "seed": ((int, type(None)), None, _seed, "null or an unsigned 64-bit integer"),
        "include_path_loss": (bool, False, None, ""),
        "atmospheric_loss_db": (float, 0.0, _nonneg, ">= 0"),
    },
    "train": {
        "learning_rate": (float, 1e-3, _pos, "> 0"),
        "epochs": (int, 100, _ge1, ">= 1"),
        "batch_size": (int, 32, _ge1, ">= 1"),
        "optimizer": (str, "adaptive-moment", lambda v: v in OPTIMIZERS, f"one of {OPTIMIZERS}"),
        "beta1": (float, 0.9, lambda v: 0 < v < 1, "in (0, 1)"),
        "beta2": (float, 0.999, lambda v: 0 < v < 1, "in (0, 1)"),
        "epsilon": (float, 1e-8, _pos, "> 0"),
        "seed": ((int, type(None)), None, _seed, "null or an unsigned 64-bit integer"),
        "quantization_bits": ((int, type(None)), None, lambda v: v is None or v >= 1, "null or >= 1"),
        "quantization_schedule": (str, "none", lambda v: v in QUANT_SCHEDULES, f"one of {QUANT_SCHEDULES}"),
    },
    "classifier": {
        "class_count": (int, 4, lambda v: 2 <= v <= 4, "in [2, 4]"),
        "rotation_deg": (float, 90.0, lambda v: 0 <= v < 360, "in [0, 360)"),
        "rotation_enabled": (bool, True, None, ""),
        "beta": (float, 10.0, _pos, "> 0"),
        "per_class": (int, 200, lambda v: v >= 2, ">= 2"),
        "dataset_path": ((str, type(None)), None, None, ""),
        "weights_path": ((str, type(None)), None, None, ""),
        "channel_draw": (int, 0, _nonneg, ">= 0"),
        "dnn_baseline": (bool, False, None, ""),
        "dnn_hidden": ((int, type(None)), None, lambda v: v is None or v >= 1, "null or >= 1"),
    },
    "operator": {
        "target": (str, "dft", lambda v: v in ("dft", "zf"), "'dft' or 'zf'"),
        "size": (int, 8, _ge1, ">= 1"),
        "power": (float, 1.0, _pos, "> 0"),
    },
    "grad_check": {
        "layers": (int, 3, _ge1, ">= 1"),
        "n_x": (int, 4, _ge1, ">= 1"),
        "n_y": (int, 2, _ge1, ">= 1"),
        "trials": (int, 5, _ge1, ">= 1"),
        "step": (float, 1e-6, _pos, "> 0"),
        "tolerance": (float, 1e-5, _pos, "> 0"),
    },
}


def _coerce(key: str, value, types, default):
    accepted = types if isinstance(types, tuple) else (types,)
    # bool is an int subclass; keep them apart
    if isinstance(value, bool) and bool not in accepted:
        raise ConfigError(f"{key}: expected {accepted[0].__name__}, got a boolean", key)
    if float in accepted and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, accepted):
        names = "/".join("null" if t is type(None) else t.__name__ for t in accepted)
        raise ConfigError(f"{key}: expected {names}, got {type(value).__name__}", key)
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved configuration; ``sections`` holds plain JSON values keyed by section."""

    sections: dict

    @property
    def mode(self) -> str:
        return self.sections[""]["mode"]

    @property
    def seed(self) -> int:
        return self.sections[""]["seed"]

    @property
    def output_dir(self) -> str:
        return self.sections[""]["output_dir"]

    def __getitem__(self, section: str) -> dict:
        return self.sections[section]

    def geometry(self) -> SimGeometry:
        return SimGeometry(**self.sections["geometry"])

    def channel(self, **overrides) -> ChannelConfig:
        return ChannelConfig(**{**self.sections["channel"], **overrides})

    def train(self) -> TrainConfig:
        return TrainConfig(**self.sections["train"])

    def with_overrides(self, mode=None, seed=None, output_dir=None) -> "ExperimentConfig":
        return resolve(_override(to_dict(self), mode, seed, output_dir))


def _override(raw, mode=None, seed=None, output_dir=None) -> dict:
    """Apply command-line overrides to raw config data; a seed replaces every sub-seed."""
    if not isinstance(raw, dict):
        return raw
    if mode is not None:
        raw["mode"] = mode
    if output_dir is not None:
        raw["output_dir"] = output_dir
    if seed is not None:
        raw["seed"] = seed
        for name in ("channel", "train"):
            section = raw.setdefault(name, {})
            if isinstance(section, dict):
                section["seed"] = seed
    return raw


def resolve(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    sections = {name: {} for name in SCHEMA}
    for key, value in raw.items():
        if key in SCHEMA and key != "":
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: expected an object", key)
            for sub, v in value.items():
                if sub not in SCHEMA[key]:
                    raise ConfigError(f"unknown key {key}.{sub}", f"{key}.{sub}")
                sections[key][sub] = v
        elif key in SCHEMA[""]:
            sections[""][key] = value
        else:
            raise ConfigError(f"unknown key {key}", key)

    resolved = {}
    for name, spec in SCHEMA.items():
        out = {}
        for key, (types, default, check, need) in spec.items():
            dotted = f"{name}.{key}" if name else key
            value = _coerce(dotted, sections[name].get(key, default), types, default)
            if check is not None and not check(value):
                raise ConfigError(f"{dotted} must be {need}, got {value!r}", dotted)
            out[key] = value
        resolved[name] = out

    top = resolved[""]
    for name in ("channel", "train"):
        if resolved[name]["seed"] is None:
            resolved[name]["seed"] = top["seed"]
    geo = resolved["geometry"]
    lam = 299_792_458.0 / geo["carrier_freq"]
    for key in ("spacing_x", "spacing_y"):
        if geo[key] is None:
            geo[key] = lam / 2.0
    tr = resolved["train"]
    if tr["quantization_schedule"] != "none" and tr["quantization_bits"] is None:
        raise ConfigError("train.quantization_schedule needs train.quantization_bits",
                          "train.quantization_schedule")
    if top["mode"] in ("train-classifier", "evaluate") and \
            resolved["classifier"]["class_count"] != resolved["channel"]["rx_count"]:
        raise ConfigError("classifier.class_count must equal channel.rx_count "
                          "(one readout antenna per class)", "classifier.class_count")
    return ExperimentConfig(resolved)


def parse_config(text: str, mode=None, seed=None, output_dir=None) -> ExperimentConfig:
    """Parse JSON configuration text into a resolved config.

    The keyword overrides are applied before validation, so cross-checks
    that depend on the mode see the mode actually being run.
    """
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed configuration JSON: {exc}") from exc
    return resolve(_override(raw, mode, seed, output_dir))


def to_dict(config: ExperimentConfig) -> dict:
    out = dict(config.sections[""])
    for name, values in config.sections.items():
        if name:
            out[name] = dict(values)
    return out


def dump_config(config: ExperimentConfig) -> str:
    return json.dumps(to_dict(config), indent=2, sort_keys=True) + "\n"
