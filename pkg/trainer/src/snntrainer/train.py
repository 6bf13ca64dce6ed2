"""Short surrogate-gradient training runs and top-k screening."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import torch
from torch import nn

from .data import make_dataset
from .model import ArchitectureError, MotifNet


class TrainingDiverged(RuntimeError):
    """Loss became non-finite."""


@dataclass
class TrainSpec:
    arch_path: str
    epochs: int = 20
    timesteps: int = 4
    learning_rate: float = 0.01
    batch_size: int = 16
    train_size: int = 128
    test_size: int = 64
    dataset: str = "bars"
    seed: int = 0
    surrogate_window: float = 2.0
    weights_path: Optional[str] = None

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.timesteps < 1:
            raise ValueError("timesteps must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


def _load_model(spec: TrainSpec) -> MotifNet:
    model = MotifNet.from_json(spec.arch_path, surrogate_window=spec.surrogate_window)
    if spec.weights_path:
        model.load_npz_weights(spec.weights_path)
    return model


def train_and_eval(spec: TrainSpec) -> dict:
    """Train briefly and report test accuracy; deterministic given the seed."""
    torch.manual_seed(spec.seed)
    torch.set_num_threads(1)
    model = _load_model(spec)

    shape = tuple(model.input_shape)
    train_x, train_y = make_dataset(spec.dataset, spec.train_size, shape, spec.seed)
    test_x, test_y = make_dataset(spec.dataset, spec.test_size, shape, spec.seed + 1)

    optimizer = torch.optim.Adam(model.parameters(), lr=spec.learning_rate)
    loss_fn = nn.CrossEntropyLoss()
    loss_curve = []
    order = torch.randperm(spec.train_size, generator=torch.Generator().manual_seed(spec.seed))
    for _ in range(spec.epochs):
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, spec.train_size, spec.batch_size):
            idx = order[start : start + spec.batch_size]
            optimizer.zero_grad()
            logits = model(train_x[idx], T=spec.timesteps)
            loss = loss_fn(logits, train_y[idx])
            if not math.isfinite(loss.item()):
                raise TrainingDiverged(f"loss became {loss.item()}")
            loss.backward()
            optimizer.step()
            epoch_loss += loss.item()
            n_batches += 1
        loss_curve.append(epoch_loss / n_batches)

    with torch.no_grad():
        logits = model(test_x, T=spec.timesteps)
        accuracy = (logits.argmax(dim=1) == test_y).double().mean().item()
    return {
        "genome_id": model.genome_id,
        "accuracy": accuracy,
        "epochs": spec.epochs,
        "loss_curve": loss_curve,
    }


def rank_topk(arch_dir, spec: TrainSpec) -> list:
    """Train every architecture in a directory briefly; best accuracy first.

    Per-architecture failures are reported in place and do not stop the rest.
    """
    paths = sorted(Path(arch_dir).glob("arch_*.json"))
    if not paths:
        raise ArchitectureError(f"no arch_*.json files in {arch_dir}")
    results = []
    for path in paths:
        entry = {"arch": path.name}
        try:
            spec_i = TrainSpec(**{**spec.__dict__, "arch_path": str(path)})
            entry.update(train_and_eval(spec_i))
        except (ArchitectureError, TrainingDiverged) as exc:
            entry["error"] = str(exc)
            entry["accuracy"] = float("-inf")
        results.append(entry)
    results.sort(key=lambda e: -e["accuracy"])
    for entry in results:
        if entry["accuracy"] == float("-inf"):
            entry["accuracy"] = None
    return results


def results_to_json(results) -> str:
    return json.dumps(results, indent=2, sort_keys=True) + "\n"
