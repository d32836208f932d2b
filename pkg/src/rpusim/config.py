"""Experiment configuration in a flat ``section.key = value`` text format.

Example::

    preset = fcn_mnist
    seed = 3
    trainer.mode = analog_tikitaka
    trainer.eta = 0.01
    model.hidden = 64, 32
    tiki.lambda_c = 0.02
    tiki.layers.0.ns = 5      # per-layer override
    data.train_subset_size = 10000

Lines starting with ``#`` are comments.  Unset keys keep their defaults.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

from .calibration import CalibrationConfig
from .device import DevicePopulationConfig
from .tiki_taka import TikiTakaConfig
from .tile import PeripheryConfig
from .networks.trainer import TrainerConfig

PRESETS = ("fcn_mnist", "cnn_mnist", "lstm_wp", "toy")


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    hidden: Tuple[int, ...] = (256, 128)
    toy_inputs: int = 8
    toy_hidden: int = 16
    toy_classes: int = 4
    lstm_hidden: int = 64


@dataclass
class DataConfig:
    """Empty paths fall back to ``$RPUSIM_DATA``; subset sizes of 0 mean the full split."""

    mnist_dir: str = ""
    corpus_path: str = ""
    corpus_test_size: int = 0
    train_subset_size: int = 0
    test_subset_size: int = 0
    toy_train: int = 600
    toy_test: int = 400


@dataclass
class OutputConfig:
    dir: str = "runs/default"
    metrics_path: str = "metrics.csv"
    plot_path: str = "learning_curve.svg"
    plot: bool = True


# the run seed lives at the top level; the trainer copy is filled in at run time
_TRAINER_SKIP = ("seed", "tiki_per_layer")


@dataclass
class ExperimentConfig:
    preset: str = "toy"
    seed: int = 0
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    device: DevicePopulationConfig = field(default_factory=DevicePopulationConfig)
    periphery: PeripheryConfig = field(default_factory=PeripheryConfig)
    tiki: TikiTakaConfig = field(default_factory=TikiTakaConfig)
    tiki_layers: Dict[int, Dict[str, object]] = field(default_factory=dict)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    data: DataConfig = field(default_factory=DataConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"preset must be one of {PRESETS}, got {self.preset!r}")

    def trainer_config(self) -> TrainerConfig:
        per_layer = {i: dataclasses.replace(self.tiki, **overrides) for i, overrides in self.tiki_layers.items()}
        return dataclasses.replace(self.trainer, seed=self.seed, tiki_per_layer=per_layer)


_SECTIONS = ("trainer", "model", "device", "periphery", "tiki", "calibration", "data", "output")


def _hints(cls):
    return typing.get_type_hints(cls)


def _convert(text: str, hint, key: str):
    text = text.strip()
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union and type(None) in args:
        if text.lower() in ("none", "null", ""):
            return None
        hint = next(a for a in args if a is not type(None))
        origin = typing.get_origin(hint)
        args = typing.get_args(hint)
    try:
        if hint is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if hint is int:
            return int(text)
        if hint is float:
            if text.lower() in ("none", "null"):
                return None
            return float(text)
        if hint is str:
            return text
        if origin in (tuple, Tuple):
            items = [t for t in text.replace("(", "").replace(")", "").split(",") if t.strip()]
            return tuple(int(t) for t in items)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {text!r} as {getattr(hint, '__name__', hint)}") from exc
    raise ConfigError(f"{key}: unsupported field type {hint}")


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_pairs(pairs) -> Dict[str, str]:
    """Turn ``key = value`` lines (or ``key=value`` CLI overrides) into a dict."""
    out = {}
    for lineno, raw in enumerate(pairs, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def build_config(values: Dict[str, str], base: ExperimentConfig = None) -> ExperimentConfig:
    """Apply string-valued ``values`` on top of ``base`` (defaults if None) and validate."""
    base = base if base is not None else ExperimentConfig()
    top = {"preset": base.preset, "seed": base.seed}
    sections = {name: dataclasses.asdict(getattr(base, name)) for name in _SECTIONS}
    sections["trainer"].pop("tiki_per_layer")
    tiki_layers = {i: dict(v) for i, v in base.tiki_layers.items()}
    tiki_hints = _hints(TikiTakaConfig)

    for key, text in values.items():
        parts = key.split(".")
        if len(parts) == 1:
            if key == "preset":
                top["preset"] = text.strip()
            elif key == "seed":
                top["seed"] = _convert(text, int, key)
            else:
                raise ConfigError(f"unknown key {key!r}")
        elif parts[0] == "tiki" and len(parts) == 4 and parts[1] == "layers":
            try:
                index = int(parts[2])
            except ValueError as exc:
                raise ConfigError(f"{key}: layer index must be an integer") from exc
            if parts[3] not in tiki_hints:
                raise ConfigError(f"unknown key {key!r}")
            tiki_layers.setdefault(index, {})[parts[3]] = _convert(text, tiki_hints[parts[3]], key)
        elif len(parts) == 2 and parts[0] in _SECTIONS:
            section, name = parts
            cls = type(getattr(base, section))
            hints = _hints(cls)
            if name not in hints or (section == "trainer" and name in _TRAINER_SKIP):
                raise ConfigError(f"unknown key {key!r}")
            sections[section][name] = _convert(text, hints[name], key)
        else:
            raise ConfigError(f"unknown key {key!r}")

    try:
        return ExperimentConfig(
            preset=top["preset"],
            seed=top["seed"],
            trainer=TrainerConfig(**sections["trainer"]),
            model=ModelConfig(**sections["model"]),
            device=DevicePopulationConfig(**sections["device"]),
            periphery=PeripheryConfig(**sections["periphery"]),
            tiki=TikiTakaConfig(**sections["tiki"]),
            tiki_layers=tiki_layers,
            calibration=CalibrationConfig(**sections["calibration"]),
            data=DataConfig(**sections["data"]),
            output=OutputConfig(**sections["output"]),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(text: str, overrides: Dict[str, str] = None) -> ExperimentConfig:
    values = parse_pairs(text.splitlines())
    values.update(overrides or {})
    return build_config(values)


def load_config(path, overrides: Dict[str, str] = None) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    return parse_config(path.read_text(), overrides)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Render every field, so the output fully determines the run."""
    lines = [f"preset = {cfg.preset}", f"seed = {cfg.seed}"]
    for section in _SECTIONS:
        obj = getattr(cfg, section)
        for f in dataclasses.fields(obj):
            if section == "trainer" and f.name in _TRAINER_SKIP:
                continue
            lines.append(f"{section}.{f.name} = {_format(getattr(obj, f.name))}")
    for index in sorted(cfg.tiki_layers):
        for name, value in sorted(cfg.tiki_layers[index].items()):
            lines.append(f"tiki.layers.{index}.{name} = {_format(value)}")
    return "\n".join(lines) + "\n"
