"""Evaluation batches: synthetic generators and binary file loaders.

Two little-endian binary formats are supported, documented byte-exactly in
the README: raw sample files (magic ``SNNR``) holding static tensors and
event-frame files (magic ``SNNE``) holding pre-binned per-timestep polarity
frames for neuromorphic data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

RAW_MAGIC = b"SNNR"
EVENT_MAGIC = b"SNNE"

GENERATORS = ("noise", "bars", "blobs")
SOURCES = ("synthetic", "raw", "events")


class DataFormatError(ValueError):
    """Malformed or mismatched sample file."""


@dataclass(frozen=True)
class SampleBatch:
    """(j, c, h, w) static samples or (j, T, p, h, w) event frames."""

    data: np.ndarray
    labels: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class DataSpec:
    source: str = "synthetic"
    generator: str = "bars"
    shape: tuple = (1, 8, 8)
    path: Optional[str] = None

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown data source {self.source!r}")
        if self.source == "synthetic" and self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}")
        if self.source != "synthetic" and not self.path:
            raise ValueError(f"data source {self.source!r} needs a path")


def _gen_noise(shape, j, rng):
    return rng.random((j, *shape)), None


def _gen_bars(shape, j, rng):
    """One full-intensity row (class 0) or column (class 1) per sample."""
    c, h, w = shape
    data = np.zeros((j, c, h, w))
    labels = np.zeros(j, dtype=np.int64)
    for i in range(j):
        if rng.integers(2) == 0:
            data[i, :, rng.integers(h), :] = 1.0
        else:
            data[i, :, :, rng.integers(w)] = 1.0
            labels[i] = 1
    return data, labels


def _gen_blobs(shape, j, rng):
    """Gaussian bump centered in one of the four quadrants (the class)."""
    c, h, w = shape
    centers = [
        (h * 0.25, w * 0.25),
        (h * 0.25, w * 0.75),
        (h * 0.75, w * 0.25),
        (h * 0.75, w * 0.75),
    ]
    sigma = max(1.0, min(h, w) / 6.0)
    ys, xs = np.mgrid[0:h, 0:w]
    data = np.zeros((j, c, h, w))
    labels = rng.integers(len(centers), size=j)
    for i, cls in enumerate(labels):
        cy, cx = centers[cls]
        bump = np.exp(-((ys - cy) ** 2 + (xs - cx) ** 2) / (2 * sigma**2))
        data[i] = bump / bump.max()
    return data, labels.astype(np.int64)


_GENERATOR_FNS = {"noise": _gen_noise, "bars": _gen_bars, "blobs": _gen_blobs}


def synthetic_batches(
    generator: str,
    shape: Sequence,
    j: int,
    s: int,
    rng: np.random.Generator,
) -> list:
    """s batches of j samples each, deterministic given the rng state."""
    if generator not in _GENERATOR_FNS:
        raise ValueError(f"unknown generator {generator!r}")
    shape = tuple(int(v) for v in shape)
    fn = _GENERATOR_FNS[generator]
    batches = []
    for _ in range(s):
        data, labels = fn(shape, j, rng)
        batches.append(SampleBatch(data=data, labels=labels))
    return batches


def write_raw_samples(path, samples: np.ndarray) -> None:
    """Write an SNNR file: magic, uint32 (n, c, h, w), float32 data, C order."""
    samples = np.asarray(samples, dtype=np.float32)
    if samples.ndim != 4:
        raise DataFormatError(f"raw samples must be 4-D (n,c,h,w), got {samples.shape}")
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC)
        np.asarray(samples.shape, dtype="<u4").tofile(fh)
        samples.astype("<f4").tofile(fh)


def _read_header(fh, magic: bytes, n_dims: int, path) -> tuple:
    got = fh.read(4)
    if got != magic:
        raise DataFormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
    dims = np.frombuffer(fh.read(4 * n_dims), dtype="<u4")
    if dims.size != n_dims:
        raise DataFormatError(f"{path}: truncated header")
    return tuple(int(d) for d in dims)


def load_raw_batches(path, j: int, s: int, rng: np.random.Generator) -> list:
    """Subsample a raw file without replacement into s batches of j samples.

    Values are min-max rescaled to [0, 1] over the whole file (a constant
    file loads as all zeros).
    """
    with open(path, "rb") as fh:
        n, c, h, w = _read_header(fh, RAW_MAGIC, 4, path)
        flat = np.fromfile(fh, dtype="<f4")
    if flat.size != n * c * h * w:
        raise DataFormatError(
            f"{path}: expected {n * c * h * w} values, found {flat.size}"
        )
    if n < j * s:
        raise DataFormatError(f"{path}: holds {n} samples, need j*s = {j * s}")
    samples = flat.reshape(n, c, h, w).astype(np.float64)
    lo, hi = samples.min(), samples.max()
    samples = (samples - lo) / (hi - lo) if hi > lo else np.zeros_like(samples)
    picks = rng.permutation(n)[: j * s]
    return [
        SampleBatch(data=samples[picks[k * j : (k + 1) * j]]) for k in range(s)
    ]


def write_event_frames(path, frames: np.ndarray) -> None:
    """Write an SNNE file: magic, uint32 (n, T, p, h, w), float32 data, C order."""
    frames = np.asarray(frames, dtype=np.float32)
    if frames.ndim != 5:
        raise DataFormatError(
            f"event frames must be 5-D (n,T,p,h,w), got {frames.shape}"
        )
    with open(path, "wb") as fh:
        fh.write(EVENT_MAGIC)
        np.asarray(frames.shape, dtype="<u4").tofile(fh)
        frames.astype("<f4").tofile(fh)


def load_event_frames(path, T: int, j: int, s: int) -> list:
    """Load pre-binned event frames as per-timestep input currents.

    The requested T must match the file header; samples are assigned to
    batches in file order, so loading is fully deterministic.
    """
    with open(path, "rb") as fh:
        n, t_file, p, h, w = _read_header(fh, EVENT_MAGIC, 5, path)
        flat = np.fromfile(fh, dtype="<f4")
    if t_file != T:
        raise DataFormatError(f"{path}: file has T={t_file}, requested T={T}")
    if flat.size != n * T * p * h * w:
        raise DataFormatError(
            f"{path}: expected {n * T * p * h * w} values, found {flat.size}"
        )
    if n < j * s:
        raise DataFormatError(f"{path}: holds {n} samples, need j*s = {j * s}")
    frames = flat.reshape(n, T, p, h, w).astype(np.float64)
    if frames.min() < 0:
        raise DataFormatError(f"{path}: negative event counts")
    return [SampleBatch(data=frames[k * j : (k + 1) * j]) for k in range(s)]


def make_batches(spec: DataSpec, j: int, s: int, T: int, rng: np.random.Generator) -> list:
    """Batches for one evolution run, drawn once and reused across generations."""
    if spec.source == "synthetic":
        return synthetic_batches(spec.generator, spec.shape, j, s, rng)
    if spec.source == "raw":
        return load_raw_batches(spec.path, j, s, rng)
    return load_event_frames(spec.path, T, j, s)
