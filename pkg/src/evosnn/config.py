"""Run configuration: a flat, typed key-value document with dotted sections.

Files are JSON objects whose keys are dotted paths (``"evolution.n_pop": 16``).
CLI ``--set`` overrides and dedicated flags win over file values, which win
over defaults. The fully resolved map is written to every run manifest, and a
manifest is itself accepted anywhere a config file is.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Union

from .data import DataSpec
from .evolution import EvolutionConfig
from .fitness import FitnessConfig
from .genome import MOTIF_IDS, GenomeConfig
from .simulate import LifConfig

MANIFEST_SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid or unknown configuration."""


DEFAULTS = {
    "seed": 0,
    "genome.max_layers": 11,
    "genome.genes_per_layer": 20,
    "evolution.n_pop": 50,
    "evolution.n_offs": 50,
    "evolution.generations": 80,
    "evolution.crossover_prob": 0.3,
    "evolution.mutation_prob": 0.02,
    "evolution.tournament_size": 3,
    "evolution.top_k": 10,
    "evolution.freeze_meso": None,
    "evolution.freeze_macro_g1": None,
    "fitness.metric": "manhattan",
    "fitness.batches": 2,
    "fitness.batch_size": 8,
    "fitness.timesteps": 4,
    "fitness.alpha": 1.0,
    "fitness.liveness_floor": None,
    "fitness.binarize_threshold": 0.0,
    "lif.tau": 2.0,
    "lif.v_th": 0.5,
    "lif.v_reset": 0.0,
    "net.channels": 16,
    "net.num_classes": 10,
    "net.downsample_interval": 3,
    "data.source": "synthetic",
    "data.generator": "bars",
    "data.shape": [1, 8, 8],
    "data.path": None,
}


@dataclass(frozen=True)
class RunConfig:
    resolved: dict
    genome: GenomeConfig
    evolution: EvolutionConfig
    fitness: FitnessConfig
    lif: LifConfig
    data: DataSpec
    channels: Union[int, tuple]
    num_classes: int
    downsample_interval: int
    seed: int


def parse_override(text: str) -> tuple:
    """Parse one ``key=value`` override; values are JSON with string fallback."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if key not in DEFAULTS:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def load_config_file(path) -> dict:
    """Read a flat config document; run manifests are accepted too."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    if "config" in doc and "schema_version" in doc:
        doc = doc["config"]
    unknown = sorted(set(doc) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return dict(doc)


def _motif_value(value) -> Optional[int]:
    if value is None:
        return None
    if isinstance(value, str):
        if value not in MOTIF_IDS:
            raise ConfigError(f"unknown motif name {value!r}")
        return MOTIF_IDS[value]
    return int(value)


def resolve(file_values: Optional[dict] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Merge defaults, file values and overrides into validated sub-configs."""
    flat = dict(DEFAULTS)
    for layer in (file_values or {}), (overrides or {}):
        for key, value in layer.items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            if value is not None:
                flat[key] = value

    try:
        genome = GenomeConfig(
            max_layers=int(flat["genome.max_layers"]),
            genes_per_layer=int(flat["genome.genes_per_layer"]),
        )
        evolution = EvolutionConfig(
            n_pop=int(flat["evolution.n_pop"]),
            n_offs=int(flat["evolution.n_offs"]),
            generations=int(flat["evolution.generations"]),
            crossover_prob=float(flat["evolution.crossover_prob"]),
            mutation_prob=float(flat["evolution.mutation_prob"]),
            tournament_size=int(flat["evolution.tournament_size"]),
            top_k=int(flat["evolution.top_k"]),
            seed=int(flat["seed"]),
            freeze_meso=_motif_value(flat["evolution.freeze_meso"]),
            freeze_macro_g1=(
                None
                if flat["evolution.freeze_macro_g1"] is None
                else int(flat["evolution.freeze_macro_g1"])
            ),
        )
        fitness = FitnessConfig(
            metric=str(flat["fitness.metric"]),
            batches=int(flat["fitness.batches"]),
            batch_size=int(flat["fitness.batch_size"]),
            timesteps=int(flat["fitness.timesteps"]),
            alpha=float(flat["fitness.alpha"]),
            liveness_floor=(
                None
                if flat["fitness.liveness_floor"] is None
                else float(flat["fitness.liveness_floor"])
            ),
            binarize_threshold=float(flat["fitness.binarize_threshold"]),
        )
        lif = LifConfig(
            tau=float(flat["lif.tau"]),
            v_th=float(flat["lif.v_th"]),
            v_reset=float(flat["lif.v_reset"]),
        )
        shape = flat["data.shape"]
        if isinstance(shape, str):
            shape = json.loads(shape)
        data = DataSpec(
            source=str(flat["data.source"]),
            generator=str(flat["data.generator"]),
            shape=tuple(int(v) for v in shape),
            path=flat["data.path"],
        )
        channels = flat["net.channels"]
        channels = int(channels) if isinstance(channels, (int, float)) else tuple(
            int(c) for c in channels
        )
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc

    flat["evolution.freeze_meso"] = evolution.freeze_meso
    flat["data.shape"] = list(data.shape)
    return RunConfig(
        resolved=flat,
        genome=genome,
        evolution=evolution,
        fitness=fitness,
        lif=lif,
        data=data,
        channels=channels,
        num_classes=int(flat["net.num_classes"]),
        downsample_interval=int(flat["net.downsample_interval"]),
        seed=int(flat["seed"]),
    )


def manifest_dict(command: str, cfg: RunConfig) -> dict:
    return {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "command": command,
        "config": cfg.resolved,
    }


def write_manifest(path, command: str, cfg: RunConfig) -> None:
    with open(path, "w") as fh:
        json.dump(manifest_dict(command, cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
