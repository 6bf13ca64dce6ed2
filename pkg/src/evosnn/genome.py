"""Three-scale genome: per-neuron op genes, per-layer motif genes, cross-layer genes.

A genome is a fixed-length integer vector. Each of the ``l`` layer blocks
holds one motif gene ``m`` followed by ``b`` micro-operation genes ``x``;
two trailing genes ``g1, g2`` pick the cross-layer span and projection op.
The flat encoding (length ``l*(b+1)+2``) is the canonical interchange form:
crossover, mutation and (de)serialization all operate on it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

MOTIF_NAMES = {0: "empty", 1: "FE", 2: "FI", 3: "FbI", 4: "LI", 5: "MI"}
MOTIF_IDS = {name: mid for mid, name in MOTIF_NAMES.items() if mid != 0}

# Kernel sizes selected by the micro genes (and by g2 for projections).
KERNEL_SIZES = {1: 3, 2: 5}


class GenomeError(ValueError):
    """Base class for genome codec errors."""


class GenomeLengthError(GenomeError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"flat genome must have length {expected}, got {got}")
        self.expected = expected
        self.got = got


class GeneDomainError(GenomeError):
    def __init__(self, position: int, gene: str, value: int, domain: tuple):
        super().__init__(
            f"gene {gene!r} at flat position {position} has value {value}, "
            f"outside domain {domain}"
        )
        self.position = position
        self.gene = gene
        self.value = value


@dataclass(frozen=True)
class GeneDomains:
    """Admissible values per gene kind.

    The defaults are the full search space; evolution ablations pass
    restricted domains (e.g. a single motif id) without touching any
    operator code.
    """

    x: tuple = (1, 2)
    m: tuple = (0, 1, 2, 3, 4, 5)
    g1: tuple = (1, 2, 3)
    g2: tuple = (1, 2)


DEFAULT_DOMAINS = GeneDomains()


@dataclass(frozen=True)
class GenomeConfig:
    """Shape of the search space: ``max_layers`` blocks of ``genes_per_layer`` micro genes."""

    max_layers: int = 11
    genes_per_layer: int = 20

    def __post_init__(self):
        if self.max_layers < 1:
            raise GenomeError(f"max_layers must be >= 1, got {self.max_layers}")
        if self.genes_per_layer < 1:
            raise GenomeError(f"genes_per_layer must be >= 1, got {self.genes_per_layer}")

    @property
    def flat_length(self) -> int:
        return self.max_layers * (self.genes_per_layer + 1) + 2

    def block_start(self, layer: int) -> int:
        """Flat index of layer ``layer``'s motif gene (layers are 1-based)."""
        return (layer - 1) * (self.genes_per_layer + 1)


@dataclass(frozen=True)
class LayerBlock:
    m: int
    x: tuple

    def motif_name(self) -> str:
        return MOTIF_NAMES.get(self.m, f"?{self.m}")


@dataclass(frozen=True)
class Genome:
    layers: tuple
    g1: int
    g2: int


@dataclass(frozen=True)
class GeneIssue:
    """One out-of-domain or misshapen gene found by ``validate``."""

    gene: str
    value: int
    layer: Optional[int] = None
    index: Optional[int] = None

    def __str__(self) -> str:
        where = ""
        if self.layer is not None:
            where = f" in layer {self.layer}"
            if self.index is not None:
                where += f" (x_{self.index})"
        return f"gene {self.gene}={self.value}{where} is out of domain"


def random_genome(
    cfg: GenomeConfig,
    rng: np.random.Generator,
    domains: GeneDomains = DEFAULT_DOMAINS,
) -> Genome:
    """Draw every gene uniformly from its domain."""
    layers = []
    for _ in range(cfg.max_layers):
        m = int(domains.m[rng.integers(len(domains.m))])
        x = tuple(
            int(domains.x[rng.integers(len(domains.x))])
            for _ in range(cfg.genes_per_layer)
        )
        layers.append(LayerBlock(m=m, x=x))
    g1 = int(domains.g1[rng.integers(len(domains.g1))])
    g2 = int(domains.g2[rng.integers(len(domains.g2))])
    return Genome(layers=tuple(layers), g1=g1, g2=g2)


def validate(g: Genome, cfg: GenomeConfig) -> list:
    """Report every invariant violation; an empty list means a valid genome."""
    issues: list = []
    if len(g.layers) != cfg.max_layers:
        issues.append(GeneIssue(gene="layers", value=len(g.layers)))
    for li, block in enumerate(g.layers, start=1):
        if block.m not in DEFAULT_DOMAINS.m:
            issues.append(GeneIssue(gene="m", value=block.m, layer=li))
        if len(block.x) != cfg.genes_per_layer:
            issues.append(GeneIssue(gene="x", value=len(block.x), layer=li))
            continue
        for xi, xv in enumerate(block.x, start=1):
            if xv not in DEFAULT_DOMAINS.x:
                issues.append(GeneIssue(gene="x", value=xv, layer=li, index=xi))
    if g.g1 not in DEFAULT_DOMAINS.g1:
        issues.append(GeneIssue(gene="g1", value=g.g1))
    if g.g2 not in DEFAULT_DOMAINS.g2:
        issues.append(GeneIssue(gene="g2", value=g.g2))
    return issues


def depth(g: Genome) -> int:
    """Number of non-empty layers (motif gene != 0)."""
    return sum(1 for block in g.layers if block.m != 0)


def encode(g: Genome) -> list:
    """Flatten to ``(m_1, x_1^1..x_1^b, ..., m_l, x_l^1..x_l^b, g1, g2)``."""
    flat: list = []
    for block in g.layers:
        flat.append(block.m)
        flat.extend(block.x)
    flat.append(g.g1)
    flat.append(g.g2)
    return flat


def decode(vec: Sequence, cfg: GenomeConfig) -> Genome:
    """Inverse of ``encode``; rejects wrong length or out-of-domain genes."""
    vec = [int(v) for v in vec]
    if len(vec) != cfg.flat_length:
        raise GenomeLengthError(cfg.flat_length, len(vec))
    b = cfg.genes_per_layer
    layers = []
    for li in range(cfg.max_layers):
        start = li * (b + 1)
        m = vec[start]
        if m not in DEFAULT_DOMAINS.m:
            raise GeneDomainError(start, "m", m, DEFAULT_DOMAINS.m)
        x = vec[start + 1 : start + 1 + b]
        for k, xv in enumerate(x):
            if xv not in DEFAULT_DOMAINS.x:
                raise GeneDomainError(start + 1 + k, "x", xv, DEFAULT_DOMAINS.x)
        layers.append(LayerBlock(m=m, x=tuple(x)))
    g1, g2 = vec[-2], vec[-1]
    if g1 not in DEFAULT_DOMAINS.g1:
        raise GeneDomainError(cfg.flat_length - 2, "g1", g1, DEFAULT_DOMAINS.g1)
    if g2 not in DEFAULT_DOMAINS.g2:
        raise GeneDomainError(cfg.flat_length - 1, "g2", g2, DEFAULT_DOMAINS.g2)
    return Genome(layers=tuple(layers), g1=g1, g2=g2)


def genome_id(g: Genome, cfg: GenomeConfig) -> str:
    """Stable content hash, used to key fitness caches and exported files."""
    payload = f"{cfg.max_layers},{cfg.genes_per_layer}:" + ",".join(
        str(v) for v in encode(g)
    )
    return hashlib.sha1(payload.encode()).hexdigest()[:12]


def genome_to_json(g: Genome, cfg: GenomeConfig, meta: Optional[dict] = None) -> dict:
    """Interchange form: ``{"config": {"l", "b"}, "genes": [...]}`` plus optional meta."""
    doc = {
        "config": {"l": cfg.max_layers, "b": cfg.genes_per_layer},
        "genes": encode(g),
    }
    if meta:
        doc["meta"] = meta
    return doc


def genome_from_json(doc: dict):
    """Parse the interchange form; returns ``(genome, config)``. Unknown keys are ignored."""
    try:
        cfg = GenomeConfig(
            max_layers=int(doc["config"]["l"]),
            genes_per_layer=int(doc["config"]["b"]),
        )
        genes = doc["genes"]
    except (KeyError, TypeError) as exc:
        raise GenomeError(f"malformed genome document: {exc}") from exc
    return decode(genes, cfg), cfg


def save_genome(path, g: Genome, cfg: GenomeConfig, meta: Optional[dict] = None) -> None:
    with open(path, "w") as fh:
        json.dump(genome_to_json(g, cfg, meta), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_genome(path):
    with open(path) as fh:
        return genome_from_json(json.load(fh))
