"""Forward-only discrete-time simulation of a network graph with LIF neurons.

The membrane update is explicit Euler with unit step, ``v' = v + (I - v)/tau``,
with a hard reset to ``v_reset`` on spiking. Static samples are presented as a
constant input current at every timestep; 4-D samples supply one current map
per timestep. The classifier head is non-spiking (real-valued logits from the
time-averaged pooled output) and is excluded from firing patterns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .motifs import FEEDBACK, INH, NetworkGraph


@dataclass(frozen=True)
class LifConfig:
    tau: float = 2.0
    v_th: float = 0.5
    v_reset: float = 0.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.v_th > self.v_reset:
            raise ValueError("v_th must exceed v_reset")


@dataclass
class LifState:
    v: np.ndarray


@dataclass(frozen=True)
class FiringPattern:
    counts: np.ndarray


@dataclass(frozen=True)
class SimResult:
    firing_pattern: FiringPattern
    logits: np.ndarray
    total_spikes: int


def lif_step(state: LifState, input_current: np.ndarray, cfg: LifConfig):
    """One membrane update; returns the new state and a binary spike map."""
    input_current = np.asarray(input_current, dtype=np.float64)
    if input_current.shape != state.v.shape:
        raise ValueError(
            f"input shape {input_current.shape} does not match state {state.v.shape}"
        )
    if not np.all(np.isfinite(input_current)):
        raise ValueError("non-finite input current")
    v, spikes = _lif_update(state.v, input_current, cfg)
    return LifState(v=v), spikes


def _lif_update(v: np.ndarray, current: np.ndarray, cfg: LifConfig):
    v = v + (current - v) / cfg.tau
    spikes = v >= cfg.v_th
    v = np.where(spikes, cfg.v_reset, v)
    return v, spikes.astype(np.float64)


def conv2d_same(x: np.ndarray, w: np.ndarray, stride: int = 1) -> np.ndarray:
    """Same-padding 2-D convolution via im2col; strides by subsampling."""
    k = w.shape[-1]
    pad = k // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(xp, (k, k), axis=(1, 2))
    h, wd = x.shape[1], x.shape[2]
    cols = win.transpose(1, 2, 0, 3, 4).reshape(h * wd, -1)
    out = cols @ w.reshape(w.shape[0], -1).T
    out = out.T.reshape(w.shape[0], h, wd)
    if stride > 1:
        out = out[:, ::stride, ::stride]
    return out


def avg_pool2(x: np.ndarray) -> np.ndarray:
    """2x2 average pooling with stride 2 (floor on odd sizes)."""
    c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    return x[:, : h2 * 2, : w2 * 2].reshape(c, h2, 2, w2, 2).mean(axis=(2, 4))


def weight_specs(net: NetworkGraph):
    """Deterministic enumeration of every weight tensor: key, shape, fan-in."""
    for stage in net.stages:
        for e in stage.edges:
            shape = (e.out_channels, e.in_channels, e.kernel, e.kernel)
            yield e.weight_key, shape, e.in_channels * e.kernel * e.kernel
    for x in net.cross_edges:
        shape = (x.out_channels, x.in_channels, x.kernel, x.kernel)
        yield x.weight_key, shape, x.in_channels * x.kernel * x.kernel
    yield net.head.weight_key, (net.head.num_classes, net.head.in_features), net.head.in_features


def init_weights(net: NetworkGraph, rng: np.random.Generator) -> dict:
    """Zero-mean normal weights with stddev 1/sqrt(fan_in), per tensor."""
    return {
        key: rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape)
        for key, shape, fan_in in weight_specs(net)
    }


def save_weights(path, weights: dict) -> None:
    np.savez(path, **weights)


def load_weights(path) -> dict:
    with np.load(path) as data:
        return {key: data[key] for key in data.files}


def _check_sample(net: NetworkGraph, sample: np.ndarray, T: int) -> np.ndarray:
    sample = np.asarray(sample, dtype=np.float64)
    if sample.ndim == 3:
        if sample.shape != net.input_shape:
            raise ValueError(
                f"sample shape {sample.shape} does not match input {net.input_shape}"
            )
    elif sample.ndim == 4:
        if sample.shape[0] != T:
            raise ValueError(
                f"time-varying sample has {sample.shape[0]} frames, expected T={T}"
            )
        if sample.shape[1:] != net.input_shape:
            raise ValueError(
                f"sample shape {sample.shape[1:]} does not match input {net.input_shape}"
            )
    else:
        raise ValueError(f"sample must be 3-D or 4-D, got ndim={sample.ndim}")
    if not np.all(np.isfinite(sample)):
        raise ValueError("non-finite values in sample")
    return sample


def forward(
    net: NetworkGraph,
    weights: dict,
    sample: np.ndarray,
    T: int,
    lif: Optional[LifConfig] = None,
) -> SimResult:
    """Simulate T timesteps; returns firing pattern, logits and total spikes."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    lif = lif or LifConfig()
    sample = _check_sample(net, sample, T)

    v = {}
    prev_spikes = {}
    counts = {}
    for stage in net.stages:
        h, w = stage.in_resolution
        for node in stage.nodes:
            key = (stage.index, node.name)
            v[key] = np.zeros((node.channels, h, w))
            prev_spikes[key] = np.zeros((node.channels, h, w))
            counts[key] = np.zeros((node.channels, h, w), dtype=np.int64)

    cross_by_dst = {}
    for x in net.cross_edges:
        cross_by_dst.setdefault(x.to_stage, []).append(x)

    pooled_sum = np.zeros(net.head.in_features)
    for step in range(T):
        drive = sample if sample.ndim == 3 else sample[step]
        stage_out = {}
        for stage in net.stages:
            if stage.index == 1:
                a = drive
            else:
                a = stage_out[stage.index - 1]
                for x in cross_by_dst.get(stage.index, ()):
                    a = a + conv2d_same(
                        stage_out[x.from_stage], weights[x.weight_key], stride=x.stride
                    )
            spikes_now = {}
            for name in stage.eval_order:
                key = (stage.index, name)
                current = np.zeros_like(v[key])
                for e in stage.edges:
                    if e.dst != name:
                        continue
                    if e.src == "A":
                        src_act = a
                    elif e.kind == FEEDBACK:
                        src_act = prev_spikes[(stage.index, e.src)]
                    else:
                        src_act = spikes_now[e.src]
                    contrib = conv2d_same(src_act, weights[e.weight_key])
                    current = current - contrib if e.polarity == INH else current + contrib
                v[key], spike = _lif_update(v[key], current, lif)
                spikes_now[name] = spike
                counts[key] += spike.astype(np.int64)
            for name, spike in spikes_now.items():
                prev_spikes[(stage.index, name)] = spike
            out = np.concatenate(
                [spikes_now[n] for n in stage.output_nodes], axis=0
            )
            if stage.pool_after:
                out = avg_pool2(out)
            stage_out[stage.index] = out
        pooled_sum += stage_out[net.stages[-1].index].mean(axis=(1, 2))

    logits = weights[net.head.weight_key] @ (pooled_sum / T)
    flat_counts = np.concatenate(
        [
            counts[(stage.index, node.name)].ravel()
            for stage in net.stages
            for node in stage.nodes
        ]
    )
    return SimResult(
        firing_pattern=FiringPattern(counts=flat_counts),
        logits=logits,
        total_spikes=int(flat_counts.sum()),
    )


def batch_forward(
    net: NetworkGraph,
    weights: dict,
    batch: Sequence,
    T: int,
    lif: Optional[LifConfig] = None,
) -> list:
    """``forward`` mapped over the batch, order preserved."""
    return [forward(net, weights, sample, T, lif=lif) for sample in batch]


def sim_result_to_json(res: SimResult) -> dict:
    return {
        "total_spikes": res.total_spikes,
        "n_neurons": int(res.firing_pattern.counts.size),
        "logits": [float(x) for x in res.logits],
        "firing_pattern": [int(c) for c in res.firing_pattern.counts],
    }
