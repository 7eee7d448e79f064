"""Flat sectioned key-value configuration with recorded provenance.

Config files look like::

    # comment
    loss.temperature = 0.2
    train.epochs = 30

Every run resolves each registered key from, in decreasing precedence:
command-line flag, config-file entry, preset value, built-in default. The
resolved value and its source are recorded in the experiment manifest, and
a manifest can be replayed to reproduce a run exactly.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

from . import __version__
from .errors import ConfigError
from .losses import LossConfig
from .training import TrainConfig
from .datagen import SyntheticConfig

__all__ = [
    "REGISTRY",
    "PRESETS",
    "parse_config_file",
    "resolve",
    "loss_config_from",
    "train_config_from",
    "synthetic_config_from",
    "Manifest",
]


@dataclass(frozen=True)
class KeySpec:
    name: str
    kind: str  # int | float | bool | str | opt_float | float_list | int_list
    default: object
    help: str = ""


def _spec(*args, **kwargs) -> tuple[str, KeySpec]:
    ks = KeySpec(*args, **kwargs)
    return ks.name, ks


REGISTRY: dict[str, KeySpec] = dict(
    [
        # synthetic data
        _spec("data.num_relations", "int", 96),
        _spec("data.train_docs", "int", 100),
        _spec("data.dev_docs", "int", 25),
        _spec("data.test_docs", "int", 25),
        _spec("data.pairs_min", "int", 8),
        _spec("data.pairs_max", "int", 16),
        _spec("data.zipf_exponent", "float", 1.05),
        _spec("data.multi_label_rate", "float", 0.15),
        _spec("data.embedding_dim", "int", 32),
        _spec("data.noise_sigma", "float", 0.4),
        _spec("data.na_fraction", "float", 0.5),
        _spec("data.num_entities", "int", 150),
        _spec("data.kg_pairs", "int", 300),
        _spec("data.seed", "int", 0),
        # regime assembly
        _spec("regime.kind", "str", "OOG"),
        _spec("regime.noise_rate", "float", 0.4),
        _spec("regime.corruption", "str", "example"),
        _spec("regime.seed", "int", 0),
        # loss
        _spec("loss.temperature", "float", 1.0),
        _spec("loss.contrastive_weight", "float", 1.0),
        _spec("loss.entropy_norm", "str", "unit"),
        _spec("loss.neg_sampling_ratio", "float", 1.0),
        _spec("loss.use_entropy", "bool", True),
        _spec("loss.use_contrastive", "bool", True),
        _spec("loss.use_neg_sampling", "bool", False),
        _spec("loss.resample", "str", "per_epoch"),
        # training
        _spec("train.epochs", "int", 20),
        _spec("train.batch_size", "int", 4),
        _spec("train.learning_rate", "float", 1e-3),
        _spec("train.warmup_ratio", "float", 0.06),
        _spec("train.beta1", "float", 0.9),
        _spec("train.beta2", "float", 0.999),
        _spec("train.eps", "float", 1e-8),
        _spec("train.weight_decay", "float", 0.01),
        _spec("train.grad_clip_norm", "opt_float", None),
        _spec("train.seed", "int", 0),
        _spec("train.hidden_dim", "int", 32),
        _spec("train.group_count", "int", 4),
        # evaluation / experiments
        _spec("eval.head_cut", "int", 10),
        _spec("eval.tail_cut", "int", 20),
        _spec("eval.use_gold", "bool", True),
        _spec("experiment.seeds", "int_list", (0, 1, 2)),
        _spec("experiment.ratios", "float_list", (0.1, 0.5, 1.0)),
    ]
)

# named hyperparameter presets, selectable with --preset
PRESETS: dict[str, dict[str, object]] = {
    "docred-like": {
        "loss.temperature": 2.0,
        "loss.contrastive_weight": 2.0,
        "loss.entropy_norm": "unit",
    },
    "redocred-like": {
        "loss.temperature": 0.2,
        "loss.contrastive_weight": 0.1,
        "loss.entropy_norm": "set_size",
    },
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def coerce(key: str, raw: str) -> object:
    spec = REGISTRY.get(key)
    if spec is None:
        raise ConfigError(f"unknown config key {key!r}")
    kind = spec.kind
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "opt_float":
            return None if raw.lower() in {"none", ""} else float(raw)
        if kind == "float_list":
            return tuple(float(part) for part in raw.split(",") if part.strip())
        if kind == "int_list":
            return tuple(int(part) for part in raw.split(",") if part.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(f"config key {key}: {exc}") from exc


def parse_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = body.split("=", 1)
            values[key.strip()] = raw.strip()
    return values


def resolve(
    flag_values: dict[str, object] | None = None,
    file_values: dict[str, str] | None = None,
    preset: str | None = None,
    manifest_values: dict[str, object] | None = None,
) -> dict[str, dict]:
    """Resolve every registered key to {value, source}.

    Precedence: flag > replayed manifest > file > preset > default. A
    manifest replay therefore reproduces the recorded run unless a flag
    explicitly overrides a key.
    """
    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; available: {sorted(PRESETS)}")
    flag_values = flag_values or {}
    file_values = file_values or {}
    preset_values = PRESETS.get(preset, {}) if preset else {}
    manifest_values = manifest_values or {}

    for key in file_values:
        if key not in REGISTRY:
            raise ConfigError(f"unknown config key {key!r} in config file")

    resolved: dict[str, dict] = {}
    for key, spec in REGISTRY.items():
        if key in flag_values and flag_values[key] is not None:
            resolved[key] = {"value": flag_values[key], "source": "flag"}
        elif key in manifest_values:
            resolved[key] = {"value": _decode_value(spec, manifest_values[key]), "source": "manifest"}
        elif key in file_values:
            resolved[key] = {"value": coerce(key, file_values[key]), "source": "file"}
        elif key in preset_values:
            resolved[key] = {"value": preset_values[key], "source": f"preset:{preset}"}
        else:
            resolved[key] = {"value": spec.default, "source": "default"}
    return resolved


def _decode_value(spec: KeySpec, value):
    # JSON round-trips tuples as lists
    if spec.kind in ("float_list", "int_list") and isinstance(value, list):
        return tuple(value)
    return value


def values(resolved: dict[str, dict]) -> dict[str, object]:
    return {k: v["value"] for k, v in resolved.items()}


def loss_config_from(resolved: dict[str, dict]) -> LossConfig:
    v = values(resolved)
    return LossConfig(
        temperature=v["loss.temperature"],
        contrastive_weight=v["loss.contrastive_weight"],
        entropy_norm=v["loss.entropy_norm"],
        neg_sampling_ratio=v["loss.neg_sampling_ratio"],
        use_entropy=v["loss.use_entropy"],
        use_contrastive=v["loss.use_contrastive"],
        use_neg_sampling=v["loss.use_neg_sampling"],
        resample=v["loss.resample"],
    )


def train_config_from(resolved: dict[str, dict]) -> TrainConfig:
    v = values(resolved)
    return TrainConfig(
        epochs=v["train.epochs"],
        batch_size=v["train.batch_size"],
        learning_rate=v["train.learning_rate"],
        warmup_ratio=v["train.warmup_ratio"],
        beta1=v["train.beta1"],
        beta2=v["train.beta2"],
        eps=v["train.eps"],
        weight_decay=v["train.weight_decay"],
        grad_clip_norm=v["train.grad_clip_norm"],
        seed=v["train.seed"],
        hidden_dim=v["train.hidden_dim"],
        group_count=v["train.group_count"],
        loss=loss_config_from(resolved),
    )


def synthetic_config_from(resolved: dict[str, dict]) -> SyntheticConfig:
    v = values(resolved)
    return SyntheticConfig(
        num_relations=v["data.num_relations"],
        num_documents=v["data.train_docs"],
        pairs_per_document=(v["data.pairs_min"], v["data.pairs_max"]),
        zipf_exponent=v["data.zipf_exponent"],
        multi_label_rate=v["data.multi_label_rate"],
        embedding_dim=v["data.embedding_dim"],
        prototype_noise_sigma=v["data.noise_sigma"],
        na_fraction=v["data.na_fraction"],
        num_entities=v["data.num_entities"],
        kg_pairs=v["data.kg_pairs"],
        seed=v["data.seed"],
    )


@dataclass(eq=False)
class Manifest:
    command: str
    config: dict[str, dict]
    inputs: dict[str, str]
    outputs: dict[str, str]
    version: str = __version__
    runtime_seconds: float | None = None
    started_at: float | None = None

    def start(self) -> "Manifest":
        self.started_at = time.time()
        return self

    def finish(self) -> "Manifest":
        if self.started_at is not None:
            self.runtime_seconds = time.time() - self.started_at
        return self

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "version": self.version,
            "runtime_seconds": self.runtime_seconds,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Manifest":
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        m = cls(
            command=obj["command"],
            config=obj["config"],
            inputs=obj.get("inputs", {}),
            outputs=obj.get("outputs", {}),
            version=obj.get("version", "unknown"),
        )
        m.runtime_seconds = obj.get("runtime_seconds")
        return m

    def config_values(self) -> dict[str, object]:
        return {k: v["value"] for k, v in self.config.items()}
