"""Trainable spiking network built from an exported architecture JSON.

The model mirrors the exporting simulator exactly: same stages, signed conv
edges, kernels, cross projections, pooling schedule and non-spiking linear
head, with spiking activations made differentiable by a rectangular
surrogate window around the threshold. Everything runs in float64 so spike
counts at init line up with the exporting simulator.
"""

from __future__ import annotations

import json

import torch
import torch.nn.functional as F
from torch import nn

import numpy as np

INH = "inhibitory"
FEEDBACK = "feedback"


class ArchitectureError(ValueError):
    """Architecture document does not match the expected schema."""


class _SpikeFn(torch.autograd.Function):
    """Heaviside spike with a rectangular surrogate gradient."""

    @staticmethod
    def forward(ctx, v, v_th, window):
        ctx.save_for_backward(v)
        ctx.v_th = v_th
        ctx.window = window
        return (v >= v_th).to(v.dtype)

    @staticmethod
    def backward(ctx, grad_output):
        (v,) = ctx.saved_tensors
        gate = (torch.abs(v - ctx.v_th) < ctx.window / 2).to(grad_output.dtype)
        return grad_output * gate / ctx.window, None, None


def spike(v, v_th: float, window: float):
    return _SpikeFn.apply(v, v_th, window)


def _key(weight_key: str) -> str:
    # ModuleDict keys may not contain dots
    return weight_key.replace(".", "_")


class MotifNet(nn.Module):
    """Stage-by-stage LIF network decoded from an architecture document."""

    def __init__(
        self,
        arch: dict,
        tau: float = 2.0,
        v_th: float = 0.5,
        v_reset: float = 0.0,
        surrogate_window: float = 2.0,
    ):
        super().__init__()
        try:
            self.stages = arch["stages"]
            self.cross_edges = arch["cross_edges"]
            self.head_doc = arch["head"]
            self.input_shape = tuple(arch["input_shape"])
            self.genome_id = arch.get("genome_id")
        except (KeyError, TypeError) as exc:
            raise ArchitectureError(f"missing field in architecture: {exc}") from exc
        if not self.stages:
            raise ArchitectureError("architecture has no stages")
        self.tau = tau
        self.v_th = v_th
        self.v_reset = v_reset
        self.window = surrogate_window

        self.convs = nn.ModuleDict()
        for stage in self.stages:
            for edge in stage["edges"]:
                conv = nn.Conv2d(
                    edge["in_channels"],
                    edge["out_channels"],
                    edge["kernel"],
                    padding=edge["kernel"] // 2,
                    bias=False,
                )
                self.convs[_key(edge["weight_key"])] = conv
        for edge in self.cross_edges:
            conv = nn.Conv2d(
                edge["in_channels"],
                edge["out_channels"],
                edge["kernel"],
                stride=edge["stride"],
                padding=edge["kernel"] // 2,
                bias=False,
            )
            self.convs[_key(edge["weight_key"])] = conv
        self.head = nn.Linear(
            self.head_doc["in_features"], self.head_doc["num_classes"], bias=False
        )
        self.double()

    @classmethod
    def from_json(cls, path, **kwargs) -> "MotifNet":
        with open(path) as fh:
            arch = json.load(fh)
        return cls(arch, **kwargs)

    def load_npz_weights(self, path) -> None:
        """Adopt weights exported by the simulator (same key scheme)."""
        with np.load(path) as data:
            tensors = {key: torch.from_numpy(data[key]) for key in data.files}
        with torch.no_grad():
            for stage in self.stages:
                for edge in stage["edges"]:
                    self.convs[_key(edge["weight_key"])].weight.copy_(
                        tensors[edge["weight_key"]]
                    )
            for edge in self.cross_edges:
                self.convs[_key(edge["weight_key"])].weight.copy_(
                    tensors[edge["weight_key"]]
                )
            self.head.weight.copy_(tensors[self.head_doc["weight_key"]])

    def forward(self, x: torch.Tensor, T: int = 4, record_counts: bool = False):
        """Run T timesteps of constant-current input; returns logits.

        With ``record_counts`` also returns per-sample spike-count vectors
        flattened in stage order then node order, matching the simulator's
        firing-pattern layout.
        """
        x = x.to(torch.float64)
        n = x.shape[0]
        v = {}
        prev = {}
        counts = {}
        for stage in self.stages:
            h, w = stage["in_resolution"]
            for node in stage["nodes"]:
                key = (stage["index"], node["name"])
                shape = (n, node["channels"], h, w)
                v[key] = torch.zeros(shape, dtype=torch.float64)
                prev[key] = torch.zeros(shape, dtype=torch.float64)
                if record_counts:
                    counts[key] = torch.zeros(shape, dtype=torch.float64)

        cross_by_dst = {}
        for edge in self.cross_edges:
            cross_by_dst.setdefault(edge["to_stage"], []).append(edge)

        pooled_sum = torch.zeros((n, self.head_doc["in_features"]), dtype=torch.float64)
        for _ in range(T):
            stage_out = {}
            for stage in self.stages:
                idx = stage["index"]
                if idx == 1:
                    a = x
                else:
                    a = stage_out[idx - 1]
                    for edge in cross_by_dst.get(idx, ()):
                        a = a + self.convs[_key(edge["weight_key"])](
                            stage_out[edge["from_stage"]]
                        )
                spikes_now = {}
                edges_by_dst = {}
                for edge in stage["edges"]:
                    edges_by_dst.setdefault(edge["dst"], []).append(edge)
                for name in stage["eval_order"]:
                    key = (idx, name)
                    current = torch.zeros_like(v[key])
                    for edge in edges_by_dst.get(name, ()):
                        if edge["src"] == "A":
                            src_act = a
                        elif edge["kind"] == FEEDBACK:
                            src_act = prev[(idx, edge["src"])]
                        else:
                            src_act = spikes_now[edge["src"]]
                        contrib = self.convs[_key(edge["weight_key"])](src_act)
                        current = current - contrib if edge["polarity"] == INH else current + contrib
                    v[key] = v[key] + (current - v[key]) / self.tau
                    s = spike(v[key], self.v_th, self.window)
                    v[key] = v[key] * (1.0 - s) + self.v_reset * s
                    spikes_now[name] = s
                    if record_counts:
                        counts[key] = counts[key] + s
                for name, s in spikes_now.items():
                    prev[(idx, name)] = s
                out = torch.cat([spikes_now[nm] for nm in stage["output_nodes"]], dim=1)
                if stage["pool_after"]:
                    out = F.avg_pool2d(out, 2)
                stage_out[idx] = out
            pooled_sum = pooled_sum + stage_out[self.stages[-1]["index"]].mean(dim=(2, 3))

        logits = self.head(pooled_sum / T)
        if not record_counts:
            return logits
        flat = torch.cat(
            [
                counts[(stage["index"], node["name"])].reshape(n, -1)
                for stage in self.stages
                for node in stage["nodes"]
            ],
            dim=1,
        )
        return logits, flat

    def spike_counts(self, x: torch.Tensor, T: int = 4) -> np.ndarray:
        """Integer per-neuron spike counts for each sample, detached."""
        with torch.no_grad():
            _, flat = self.forward(x, T=T, record_counts=True)
        return flat.numpy().astype(np.int64)

    def structure_counts(self) -> dict:
        """Node/edge/polarity tallies of the realized module graph."""
        n_nodes = 0
        n_edges = 0
        inhibitory = 0
        feedback = 0
        kernels = []
        for stage in self.stages:
            n_nodes += len(stage["nodes"])
            for edge in stage["edges"]:
                conv = self.convs[_key(edge["weight_key"])]
                n_edges += 1
                kernels.append(conv.kernel_size[0])
                if edge["polarity"] == INH:
                    inhibitory += 1
                if edge["kind"] == FEEDBACK:
                    feedback += 1
        return {
            "stages": len(self.stages),
            "nodes": n_nodes,
            "edges": n_edges,
            "inhibitory_edges": inhibitory,
            "feedback_edges": feedback,
            "cross_edges": len(self.cross_edges),
            "kernels": sorted(kernels),
        }


def build_trainable(arch: dict, **kwargs) -> MotifNet:
    """Realize an architecture document as a trainable torch module."""
    return MotifNet(arch, **kwargs)
