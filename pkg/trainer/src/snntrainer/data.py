"""Tiny labeled datasets for screening exported architectures."""

from __future__ import annotations

import numpy as np
import torch


def bars(n: int, shape=(1, 8, 8), seed: int = 0):
    """Two linearly separable classes: one full row (0) or one full column (1)."""
    c, h, w = shape
    rng = np.random.default_rng(seed)
    data = np.zeros((n, c, h, w))
    labels = np.zeros(n, dtype=np.int64)
    for i in range(n):
        if rng.integers(2) == 0:
            data[i, :, rng.integers(h), :] = 1.0
        else:
            data[i, :, :, rng.integers(w)] = 1.0
            labels[i] = 1
    return torch.from_numpy(data), torch.from_numpy(labels)


DATASETS = {"bars": bars}


def make_dataset(name: str, n: int, shape, seed: int):
    if name not in DATASETS:
        raise ValueError(f"unknown dataset {name!r}, pick from {sorted(DATASETS)}")
    return DATASETS[name](n, shape=shape, seed=seed)
