"""Five excitatory/inhibitory circuit templates and the genome -> network decoder.

Each non-empty genome layer becomes one stage: an instance of a motif
template whose edges are small convolutions. ``A`` names the stage's
aggregated input feature map, not a neuron, so ``A -> *`` edges are the
stage's input convs. Inhibitory edges contribute the negation of their
conv output to the destination's input current. Feedback edges are applied
with a one-timestep delay by the simulator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

from .genome import (
    KERNEL_SIZES,
    Genome,
    LayerBlock,
    GenomeConfig,
    depth,
    genome_to_json,
)

EXC = "excitatory"
INH = "inhibitory"
FEEDFORWARD = "feedforward"
FEEDBACK = "feedback"

# Excitation/inhibition class per motif, ordered by the share of inhibitory
# connections (FI and FbI tie, so they share a class).
EI_CLASS = {"FE": 1, "FI": 2, "FbI": 2, "LI": 3, "MI": 4}


class PhenotypeError(ValueError):
    """Raised when a genome cannot be realized as a network."""


class DegenerateGenomeError(PhenotypeError):
    """Raised for genomes whose every layer is empty."""


@dataclass(frozen=True)
class MotifNode:
    name: str
    polarity: str


@dataclass(frozen=True)
class MotifEdge:
    src: str
    dst: str
    polarity: str
    kind: str


@dataclass(frozen=True)
class MotifTemplate:
    id: str
    nodes: tuple
    edges: tuple
    output_nodes: tuple
    # Node evaluation order: every non-feedback edge's source comes before
    # its destination, so within-step currents are available when needed.
    eval_order: tuple


_TEMPLATES = {
    # A drives B, B drives C; purely excitatory chain.
    "FE": MotifTemplate(
        id="FE",
        nodes=(MotifNode("B", EXC), MotifNode("C", EXC)),
        edges=(
            MotifEdge("A", "B", EXC, FEEDFORWARD),
            MotifEdge("B", "C", EXC, FEEDFORWARD),
        ),
        output_nodes=("C",),
        eval_order=("B", "C"),
    ),
    # A drives both B and the inhibitory C; C gates B in the same step.
    "FI": MotifTemplate(
        id="FI",
        nodes=(MotifNode("B", EXC), MotifNode("C", INH)),
        edges=(
            MotifEdge("A", "B", EXC, FEEDFORWARD),
            MotifEdge("A", "C", EXC, FEEDFORWARD),
            MotifEdge("C", "B", INH, FEEDFORWARD),
        ),
        output_nodes=("B",),
        eval_order=("C", "B"),
    ),
    # B excites C, which inhibits B one step later.
    "FbI": MotifTemplate(
        id="FbI",
        nodes=(MotifNode("B", EXC), MotifNode("C", INH)),
        edges=(
            MotifEdge("A", "B", EXC, FEEDFORWARD),
            MotifEdge("B", "C", EXC, FEEDFORWARD),
            MotifEdge("C", "B", INH, FEEDBACK),
        ),
        output_nodes=("B",),
        eval_order=("B", "C"),
    ),
    # C inhibits both halves of the output in the same step.
    "LI": MotifTemplate(
        id="LI",
        nodes=(MotifNode("B1", EXC), MotifNode("B2", EXC), MotifNode("C", INH)),
        edges=(
            MotifEdge("A", "B1", EXC, FEEDFORWARD),
            MotifEdge("A", "B2", EXC, FEEDFORWARD),
            MotifEdge("A", "C", EXC, FEEDFORWARD),
            MotifEdge("C", "B1", INH, FEEDFORWARD),
            MotifEdge("C", "B2", INH, FEEDFORWARD),
        ),
        output_nodes=("B1", "B2"),
        eval_order=("C", "B1", "B2"),
    ),
    # B and C suppress each other with one-step delays; both feed forward.
    "MI": MotifTemplate(
        id="MI",
        nodes=(MotifNode("B", INH), MotifNode("C", INH)),
        edges=(
            MotifEdge("A", "B", EXC, FEEDFORWARD),
            MotifEdge("A", "C", EXC, FEEDFORWARD),
            MotifEdge("B", "C", INH, FEEDBACK),
            MotifEdge("C", "B", INH, FEEDBACK),
        ),
        output_nodes=("B", "C"),
        eval_order=("B", "C"),
    ),
}

MOTIF_BY_GENE = {1: "FE", 2: "FI", 3: "FbI", 4: "LI", 5: "MI"}


def template(motif_id: Union[int, str]) -> MotifTemplate:
    """Fixed template for a motif, by gene value (1..5) or name."""
    if isinstance(motif_id, int):
        if motif_id not in MOTIF_BY_GENE:
            raise KeyError(f"unknown motif gene value {motif_id}")
        motif_id = MOTIF_BY_GENE[motif_id]
    if motif_id not in _TEMPLATES:
        raise KeyError(f"unknown motif id {motif_id!r}")
    return _TEMPLATES[motif_id]


@dataclass(frozen=True)
class StageNode:
    name: str
    polarity: str
    channels: int


@dataclass(frozen=True)
class StageEdge:
    src: str
    dst: str
    polarity: str
    kind: str
    kernel: int
    in_channels: int
    out_channels: int
    weight_key: str


@dataclass(frozen=True)
class Stage:
    index: int
    motif: str
    in_channels: int
    out_channels: int
    nodes: tuple
    edges: tuple
    output_nodes: tuple
    eval_order: tuple
    in_resolution: Optional[tuple] = None
    out_resolution: Optional[tuple] = None
    pool_after: bool = False

    def node(self, name: str) -> StageNode:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)


@dataclass(frozen=True)
class CrossEdge:
    from_stage: int
    to_stage: int
    kernel: int
    in_channels: int
    out_channels: int
    stride: int
    weight_key: str


@dataclass(frozen=True)
class Head:
    """Non-spiking classifier: global average pool, time average, linear map."""

    in_features: int
    num_classes: int
    weight_key: str = "head"


@dataclass(frozen=True)
class NetworkGraph:
    input_shape: tuple
    stages: tuple
    cross_edges: tuple
    head: Head
    channel_plan: tuple
    downsample_plan: tuple
    genome_id: Optional[str] = None

    def stage(self, index: int) -> Stage:
        return self.stages[index - 1]


@dataclass(frozen=True)
class EiProfile:
    classes: tuple
    histogram: dict


def _node_channels(tmpl: MotifTemplate, out_channels: int) -> dict:
    """Channel width per node; concatenated outputs split the stage width."""
    if len(tmpl.output_nodes) > 1 and out_channels < 2:
        raise PhenotypeError(
            f"motif {tmpl.id} concatenates {len(tmpl.output_nodes)} outputs and "
            f"needs out_channels >= 2, got {out_channels}"
        )
    widths = {}
    if len(tmpl.output_nodes) == 1:
        widths[tmpl.output_nodes[0]] = out_channels
    else:
        first, second = tmpl.output_nodes
        widths[first] = out_channels - out_channels // 2
        widths[second] = out_channels // 2
    for node in tmpl.nodes:
        if node.name not in widths:
            widths[node.name] = out_channels
    return widths


def build_stage(
    block: LayerBlock, in_channels: int, out_channels: int, index: int = 1
) -> Stage:
    """Instantiate ``block.m``'s template, consuming x genes in edge order.

    Edge k takes its kernel from gene ``x[k]``; surplus genes are ignored
    (genes wrap around only if a block carries fewer genes than the template
    has edges, which the default b=20 never triggers).
    """
    if block.m == 0:
        raise PhenotypeError("cannot build a stage from an empty layer (m=0)")
    if in_channels < 1 or out_channels < 1:
        raise PhenotypeError("stage channel widths must be positive")
    tmpl = template(block.m)
    widths = _node_channels(tmpl, out_channels)
    edges = []
    for k, edge in enumerate(tmpl.edges):
        kernel = KERNEL_SIZES[block.x[k % len(block.x)]]
        src_ch = in_channels if edge.src == "A" else widths[edge.src]
        edges.append(
            StageEdge(
                src=edge.src,
                dst=edge.dst,
                polarity=edge.polarity,
                kind=edge.kind,
                kernel=kernel,
                in_channels=src_ch,
                out_channels=widths[edge.dst],
                weight_key=f"s{index}.e{k}",
            )
        )
    nodes = tuple(
        StageNode(name=n.name, polarity=n.polarity, channels=widths[n.name])
        for n in tmpl.nodes
    )
    return Stage(
        index=index,
        motif=tmpl.id,
        in_channels=in_channels,
        out_channels=out_channels,
        nodes=nodes,
        edges=tuple(edges),
        output_nodes=tmpl.output_nodes,
        eval_order=tmpl.eval_order,
    )


def _resolve_channel_plan(channel_plan, n_stages: int) -> tuple:
    if isinstance(channel_plan, int):
        return (channel_plan,) * n_stages
    plan = tuple(int(c) for c in channel_plan)
    if not plan:
        raise PhenotypeError("channel_plan must not be empty")
    if len(plan) < n_stages:
        plan = plan + (plan[-1],) * (n_stages - len(plan))
    return plan[:n_stages]


def build_phenotype(
    g: Genome,
    input_shape: Sequence,
    channel_plan: Union[int, Sequence],
    *,
    num_classes: int = 10,
    downsample_interval: int = 3,
    genome_id: Optional[str] = None,
) -> NetworkGraph:
    """Decode a genome: skip empty layers, chain stages, add cross projections.

    Stage t takes its chain input from stage t-1 and, for g1=k, projections
    from stages t-2 .. t-k (where they exist). Projections are convs of the
    g2 kernel, strided to the destination's resolution, summed into the
    destination's input current. Spatial size is halved by average pooling
    after every ``downsample_interval``-th stage while the map is >= 2 wide.
    """
    n_stages = depth(g)
    if n_stages == 0:
        raise DegenerateGenomeError("genome has no non-empty layers")
    in_c, in_h, in_w = (int(v) for v in input_shape)
    plan = _resolve_channel_plan(channel_plan, n_stages)

    stages = []
    downsample = []
    res = (in_h, in_w)
    prev_channels = in_c
    t = 0
    for block in g.layers:
        if block.m == 0:
            continue
        t += 1
        stage = build_stage(block, prev_channels, plan[t - 1], index=t)
        pool = downsample_interval > 0 and t % downsample_interval == 0 and min(res) >= 2
        out_res = (res[0] // 2, res[1] // 2) if pool else res
        stages.append(
            replace(
                stage,
                in_resolution=res,
                out_resolution=out_res,
                pool_after=pool,
            )
        )
        downsample.append(2 if pool else 1)
        res = out_res
        prev_channels = plan[t - 1]

    cross = []
    for stage in stages:
        t = stage.index
        for span in range(2, g.g1 + 1):
            s = t - span
            if s < 1:
                continue
            src = stages[s - 1]
            stride = src.out_resolution[0] // stage.in_resolution[0]
            cross.append(
                CrossEdge(
                    from_stage=s,
                    to_stage=t,
                    kernel=KERNEL_SIZES[g.g2],
                    in_channels=src.out_channels,
                    out_channels=stage.in_channels,
                    stride=max(1, stride),
                    weight_key=f"x{s}to{t}",
                )
            )

    head = Head(in_features=stages[-1].out_channels, num_classes=num_classes)
    return NetworkGraph(
        input_shape=(in_c, in_h, in_w),
        stages=tuple(stages),
        cross_edges=tuple(cross),
        head=head,
        channel_plan=plan,
        downsample_plan=tuple(downsample),
        genome_id=genome_id,
    )


def ei_profile(net: NetworkGraph) -> EiProfile:
    """Per-stage excitation/inhibition class and the network-level histogram."""
    classes = tuple(EI_CLASS[stage.motif] for stage in net.stages)
    histogram = {c: 0 for c in sorted(set(EI_CLASS.values()))}
    for c in classes:
        histogram[c] += 1
    return EiProfile(classes=classes, histogram=histogram)


def firing_pattern_size(net: NetworkGraph) -> int:
    """Total neuron count across all stages (classifier head excluded)."""
    total = 0
    for stage in net.stages:
        h, w = stage.in_resolution
        total += sum(n.channels for n in stage.nodes) * h * w
    return total


def architecture_to_json(
    net: NetworkGraph,
    genome: Optional[Genome] = None,
    genome_cfg: Optional[GenomeConfig] = None,
) -> dict:
    """Derived architecture document consumed by external trainers."""
    doc = {
        "schema_version": 1,
        "genome_id": net.genome_id,
        "input_shape": list(net.input_shape),
        "num_classes": net.head.num_classes,
        "channel_plan": list(net.channel_plan),
        "downsample_plan": list(net.downsample_plan),
        "stages": [
            {
                "index": s.index,
                "motif": s.motif,
                "in_channels": s.in_channels,
                "out_channels": s.out_channels,
                "in_resolution": list(s.in_resolution),
                "out_resolution": list(s.out_resolution),
                "pool_after": s.pool_after,
                "nodes": [
                    {"name": n.name, "polarity": n.polarity, "channels": n.channels}
                    for n in s.nodes
                ],
                "eval_order": list(s.eval_order),
                "output_nodes": list(s.output_nodes),
                "edges": [
                    {
                        "src": e.src,
                        "dst": e.dst,
                        "polarity": e.polarity,
                        "kind": e.kind,
                        "kernel": e.kernel,
                        "in_channels": e.in_channels,
                        "out_channels": e.out_channels,
                        "weight_key": e.weight_key,
                    }
                    for e in s.edges
                ],
            }
            for s in net.stages
        ],
        "cross_edges": [
            {
                "from_stage": x.from_stage,
                "to_stage": x.to_stage,
                "kernel": x.kernel,
                "in_channels": x.in_channels,
                "out_channels": x.out_channels,
                "stride": x.stride,
                "weight_key": x.weight_key,
            }
            for x in net.cross_edges
        ],
        "head": {
            "pooling": "global_avg",
            "in_features": net.head.in_features,
            "num_classes": net.head.num_classes,
            "weight_key": net.head.weight_key,
        },
    }
    if genome is not None and genome_cfg is not None:
        doc["genome"] = genome_to_json(genome, genome_cfg)
    return doc


def architecture_json_bytes(doc: dict) -> bytes:
    """Stable byte serialization (sorted keys) so repeated decodes are identical."""
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode()
