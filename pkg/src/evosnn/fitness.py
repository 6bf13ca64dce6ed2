"""Training-free fitness: pairwise distances between firing patterns.

A network that responds to different samples with similar firing patterns
scores low (good). The score for one batch is the mean of the strict upper
triangle of the pairwise distance matrix; the final score averages over
batches. A network whose spike output falls below the liveness floor is
assigned the worst possible score, since a silent network would otherwise
trivially minimize every distance.
"""

from __future__ import annotations

import hashlib
import multiprocessing
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .genome import Genome, GenomeConfig, encode, decode, genome_id
from .motifs import DegenerateGenomeError, build_phenotype
from .simulate import LifConfig, batch_forward, init_weights

# Sentinel for dead or degenerate networks. Large but finite so population
# statistics stay representable in plain JSON.
DEAD_SCORE = 1e30


@dataclass(frozen=True)
class FitnessConfig:
    metric: str = "manhattan"
    batches: int = 2
    batch_size: int = 8
    timesteps: int = 4
    alpha: float = 1.0
    # Minimum summed spikes per batch; None means one spike per sample.
    liveness_floor: Optional[float] = None
    # Counts strictly above this are "active" for the binarized metrics.
    binarize_threshold: float = 0.0

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}, pick from {sorted(METRICS)}")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.batches < 1:
            raise ValueError("batches must be >= 1")
        if self.timesteps < 1:
            raise ValueError("timesteps must be >= 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")


def _pair(u, v):
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    return u, v


def manhattan(u, v) -> float:
    u, v = _pair(u, v)
    return float(np.abs(u - v).sum())


def jaccard(u, v, threshold: float = 0.0) -> float:
    """Share of active-anywhere dimensions where activity disagrees."""
    u, v = _pair(u, v)
    ub, vb = u > threshold, v > threshold
    m01 = int((~ub & vb).sum())
    m10 = int((ub & ~vb).sum())
    m11 = int((ub & vb).sum())
    denom = m01 + m10 + m11
    return 0.0 if denom == 0 else (m01 + m10) / denom


def cosine(u, v) -> float:
    """1 - cosine similarity; a zero vector is maximally distant by convention."""
    u, v = _pair(u, v)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 1.0
    return float(1.0 - float(u @ v) / (nu * nv))


def sahd(u, v, alpha: float = 1.0, threshold: float = 0.0) -> float:
    """Hamming distance on binarized activity, scaled by the desparse coefficient."""
    u, v = _pair(u, v)
    return float(alpha * ((u > threshold) != (v > threshold)).sum())


METRICS = {
    "manhattan": manhattan,
    "jaccard": jaccard,
    "cosine": cosine,
    "sahd": sahd,
}


def metric_fn(cfg: FitnessConfig) -> Callable:
    base = METRICS[cfg.metric]
    if cfg.metric == "sahd":
        return lambda u, v: base(u, v, alpha=cfg.alpha, threshold=cfg.binarize_threshold)
    if cfg.metric == "jaccard":
        return lambda u, v: base(u, v, threshold=cfg.binarize_threshold)
    return base


def bie_matrix(patterns: Sequence, metric: Union[str, Callable]) -> np.ndarray:
    """Pairwise distance matrix; symmetric with a zero diagonal by construction."""
    if isinstance(metric, str):
        metric = METRICS[metric]
    vecs = [np.asarray(getattr(p, "counts", p)) for p in patterns]
    j = len(vecs)
    if j < 2:
        raise ValueError("need at least two patterns")
    lengths = {v.shape for v in vecs}
    if len(lengths) > 1:
        raise ValueError(f"inconsistent pattern lengths: {sorted(lengths)}")
    d = np.zeros((j, j))
    for a in range(j):
        for b in range(a + 1, j):
            d[a, b] = d[b, a] = metric(vecs[a], vecs[b])
    return d


def upper_triangle_mean(d: np.ndarray) -> float:
    j = d.shape[0]
    iu = np.triu_indices(j, k=1)
    return float(d[iu].mean())


def batch_data(batch) -> np.ndarray:
    """Sample tensor of a batch, whether it is a SampleBatch or a bare array."""
    if isinstance(batch, np.ndarray):
        return batch
    return np.asarray(getattr(batch, "data", batch))


def bie_score(
    net,
    weights: dict,
    batches: Sequence,
    cfg: FitnessConfig,
    lif: Optional[LifConfig] = None,
) -> float:
    """Mean over batches of the mean pairwise distance; lower is better."""
    metric = metric_fn(cfg)
    total = 0.0
    for batch in batches:
        data = batch_data(batch)
        results = batch_forward(net, weights, data, cfg.timesteps, lif=lif)
        floor = cfg.liveness_floor if cfg.liveness_floor is not None else float(len(data))
        if sum(r.total_spikes for r in results) < floor:
            return DEAD_SCORE
        patterns = [r.firing_pattern.counts for r in results]
        total += upper_triangle_mean(bie_matrix(patterns, metric))
    return total / len(batches)


def genome_eval_seed(master_seed: int, g: Genome, gcfg: GenomeConfig) -> int:
    """Weight seed derived from the run seed and the genome's content.

    Makes fitness a fixed function of the genome within a run: the same
    genome always gets the same random weights, independent of evaluation
    order or worker count.
    """
    payload = f"{master_seed}:{gcfg.max_layers},{gcfg.genes_per_layer}:" + ",".join(
        str(v) for v in encode(g)
    )
    digest = hashlib.sha256(payload.encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class EvalContext:
    """Everything needed to score one genome, picklable for worker processes."""

    fitness: FitnessConfig
    lif: LifConfig
    channel_plan: Union[int, tuple]
    num_classes: int
    downsample_interval: int
    master_seed: int


def _input_shape(batches: Sequence) -> tuple:
    # (j, c, h, w) for static batches, (j, T, c, h, w) for event frames
    return tuple(int(v) for v in batch_data(batches[0]).shape[-3:])


def score_genome(ctx: EvalContext, g: Genome, gcfg: GenomeConfig, batches: Sequence) -> float:
    """Maximized fitness of one genome: negative stability score."""
    try:
        net = build_phenotype(
            g,
            _input_shape(batches),
            ctx.channel_plan,
            num_classes=ctx.num_classes,
            downsample_interval=ctx.downsample_interval,
            genome_id=genome_id(g, gcfg),
        )
    except DegenerateGenomeError:
        return -DEAD_SCORE
    rng = np.random.default_rng(genome_eval_seed(ctx.master_seed, g, gcfg))
    weights = init_weights(net, rng)
    return -bie_score(net, weights, batches, ctx.fitness, lif=ctx.lif)


_worker_state: dict = {}


def _init_worker(ctx: EvalContext, gcfg: GenomeConfig, batches) -> None:
    _worker_state["args"] = (ctx, gcfg, batches)


def _eval_worker(genes) -> float:
    ctx, gcfg, batches = _worker_state["args"]
    return score_genome(ctx, decode(genes, gcfg), gcfg, batches)


class PopulationEvaluator:
    """Scores genome lists against fixed batches, optionally across processes.

    Results are cached by genome content, so duplicated individuals cost one
    evaluation, and are identical for any worker count.
    """

    def __init__(self, ctx: EvalContext, gcfg: GenomeConfig, workers: int = 1):
        self.ctx = ctx
        self.gcfg = gcfg
        self.workers = max(1, int(workers))
        self._cache: dict = {}
        self._pool = None
        self._batches = None

    def __call__(self, genomes: Sequence, batches) -> list:
        if self._batches is None:
            self._batches = batches
        todo = []
        for g in genomes:
            key = tuple(encode(g))
            if key not in self._cache and key not in {t[0] for t in todo}:
                todo.append((key, g))
        if todo:
            if self.workers > 1:
                if self._pool is None:
                    self._pool = multiprocessing.Pool(
                        self.workers,
                        initializer=_init_worker,
                        initargs=(self.ctx, self.gcfg, self._batches),
                    )
                scores = self._pool.map(
                    _eval_worker, [list(key) for key, _ in todo], chunksize=1
                )
            else:
                scores = [
                    score_genome(self.ctx, g, self.gcfg, self._batches) for _, g in todo
                ]
            for (key, _), s in zip(todo, scores):
                self._cache[key] = s
        return [self._cache[tuple(encode(g))] for g in genomes]

    def close(self) -> None:
        if self._pool is not None:
            self._pool.close()
            self._pool.join()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
