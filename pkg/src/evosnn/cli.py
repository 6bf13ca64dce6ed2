"""Command-line surface: evolve, score, decode, transfer, inspect."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError, RunConfig, load_config_file, parse_override
from .data import DataFormatError, make_batches
from .evolution import evolve, stats_to_json
from .fitness import (
    DEAD_SCORE,
    EvalContext,
    PopulationEvaluator,
    bie_matrix,
    genome_eval_seed,
    metric_fn,
    upper_triangle_mean,
)
from .genome import GenomeError, genome_id, load_genome, save_genome
from .motifs import (
    DegenerateGenomeError,
    PhenotypeError,
    architecture_json_bytes,
    architecture_to_json,
    build_phenotype,
    ei_profile,
)
from .simulate import (
    batch_forward,
    forward,
    init_weights,
    save_weights,
    sim_result_to_json,
)
from . import genome as genome_mod

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_RUNTIME = 3

_INPUT_ERRORS = (
    ConfigError,
    GenomeError,
    DataFormatError,
    PhenotypeError,
    FileNotFoundError,
    NotADirectoryError,
)


def _resolve_run_config(args) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else {}
    overrides = {}
    for text in getattr(args, "overrides", []) or []:
        key, value = parse_override(text)
        overrides[key] = value
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "metric", None):
        overrides["fitness.metric"] = args.metric
    return cfgmod.resolve(file_values, overrides)


def _eval_context(cfg: RunConfig) -> EvalContext:
    return EvalContext(
        fitness=cfg.fitness,
        lif=cfg.lif,
        channel_plan=cfg.channels,
        num_classes=cfg.num_classes,
        downsample_interval=cfg.downsample_interval,
        master_seed=cfg.seed,
    )


def _load_batches(cfg: RunConfig) -> list:
    rng = np.random.default_rng(cfg.seed)
    return make_batches(
        cfg.data, cfg.fitness.batch_size, cfg.fitness.batches, cfg.fitness.timesteps, rng
    )


def _build_net(cfg: RunConfig, genome, input_shape):
    return build_phenotype(
        genome,
        input_shape,
        cfg.channels,
        num_classes=cfg.num_classes,
        downsample_interval=cfg.downsample_interval,
        genome_id=genome_id(genome, cfg.genome),
    )


def _run_evolution(args, command: str, initial=None) -> int:
    cfg = _resolve_run_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfgmod.write_manifest(out / "manifest.json", command, cfg)

    batches = _load_batches(cfg)
    input_shape = tuple(int(v) for v in np.asarray(batches[0].data).shape[-3:])
    ctx = _eval_context(cfg)

    stats_path = out / "stats.jsonl"
    with open(stats_path, "w") as stats_file, PopulationEvaluator(
        ctx, cfg.genome, workers=args.workers
    ) as evaluator:

        def on_generation(st):
            stats_file.write(json.dumps(stats_to_json(st), sort_keys=True) + "\n")

        _, top = evolve(
            cfg.evolution,
            cfg.genome,
            lambda: batches,
            evaluator,
            initial_population=initial,
            on_generation=on_generation,
        )

    top_dir = out / "top_k"
    top_dir.mkdir(exist_ok=True)
    for rank, (g, fit) in enumerate(top, start=1):
        gid = genome_id(g, cfg.genome)
        save_genome(
            top_dir / f"genome_{rank:02d}.json",
            g,
            cfg.genome,
            meta={"id": gid, "fitness": fit, "rank": rank},
        )
        try:
            net = _build_net(cfg, g, input_shape)
        except DegenerateGenomeError:
            print(f"rank {rank} genome {gid} is degenerate; no architecture", file=sys.stderr)
            continue
        doc = architecture_to_json(net, g, cfg.genome)
        (top_dir / f"arch_{rank:02d}.json").write_bytes(architecture_json_bytes(doc))
    return EXIT_OK


def cmd_evolve(args) -> int:
    return _run_evolution(args, "evolve")


def cmd_transfer(args) -> int:
    import_dir = Path(args.import_dir)
    if not import_dir.is_dir():
        raise ConfigError(f"import directory not found: {import_dir}")
    cfg = _resolve_run_config(args)
    imports = []
    for path in sorted(import_dir.glob("*.json")):
        doc = json.loads(path.read_text())
        if "genes" not in doc:
            continue
        g, g_cfg = genome_mod.genome_from_json(doc)
        if g_cfg != cfg.genome:
            raise ConfigError(
                f"{path.name}: genome config {g_cfg} does not match run config {cfg.genome}"
            )
        imports.append(g)
    if not imports:
        raise ConfigError(f"no genome files found in {import_dir}")
    return _run_evolution(args, "transfer", initial=imports)


def cmd_score(args) -> int:
    cfg = _resolve_run_config(args)
    g, g_cfg = load_genome(args.genome)
    if g_cfg != cfg.genome:
        raise ConfigError("genome config does not match run config")
    batches = _load_batches(cfg)
    input_shape = tuple(int(v) for v in np.asarray(batches[0].data).shape[-3:])
    net = _build_net(cfg, g, input_shape)

    rng = np.random.default_rng(genome_eval_seed(cfg.seed, g, cfg.genome))
    weights = init_weights(net, rng)
    metric = metric_fn(cfg.fitness)
    total_spikes = 0
    per_batch = []
    dead = False
    for batch in batches:
        results = batch_forward(net, weights, batch.data, cfg.fitness.timesteps, lif=cfg.lif)
        spikes = sum(r.total_spikes for r in results)
        total_spikes += spikes
        floor = (
            cfg.fitness.liveness_floor
            if cfg.fitness.liveness_floor is not None
            else float(len(batch.data))
        )
        if spikes < floor:
            dead = True
            continue
        patterns = [r.firing_pattern.counts for r in results]
        per_batch.append(upper_triangle_mean(bie_matrix(patterns, metric)))
    score = DEAD_SCORE if dead else sum(per_batch) / len(per_batch)

    profile = ei_profile(net)
    report = {
        "genome_id": genome_id(g, cfg.genome),
        "bie_score": score,
        "fitness": -score,
        "total_spikes": total_spikes,
        "depth": genome_mod.depth(g),
        "ei_histogram": {str(k): v for k, v in profile.histogram.items()},
        "metric": cfg.fitness.metric,
    }
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def cmd_decode(args) -> int:
    cfg = _resolve_run_config(args)
    g, g_cfg = load_genome(args.genome)
    if g_cfg != cfg.genome:
        raise ConfigError("genome config does not match run config")
    net = _build_net(cfg, g, cfg.data.shape)
    doc = architecture_to_json(net, g, cfg.genome)
    sys.stdout.write(architecture_json_bytes(doc).decode())
    return EXIT_OK


def cmd_inspect(args) -> int:
    cfg = _resolve_run_config(args)
    g, g_cfg = load_genome(args.genome)
    if g_cfg != cfg.genome:
        raise ConfigError("genome config does not match run config")
    batches = _load_batches(cfg)
    input_shape = tuple(int(v) for v in np.asarray(batches[0].data).shape[-3:])
    net = _build_net(cfg, g, input_shape)
    rng = np.random.default_rng(genome_eval_seed(cfg.seed, g, cfg.genome))
    weights = init_weights(net, rng)
    if args.dump_weights:
        save_weights(args.dump_weights, weights)
    sample = np.asarray(batches[0].data)[args.sample_index]
    result = forward(net, weights, sample, cfg.fitness.timesteps, lif=cfg.lif)
    doc = sim_result_to_json(result)
    doc["genome_id"] = genome_id(g, cfg.genome)
    print(json.dumps(doc, sort_keys=True))
    return EXIT_OK


def _add_common(sp, with_workers: bool = False):
    sp.add_argument("--config", help="flat JSON config file (or a run manifest)")
    sp.add_argument(
        "--set",
        action="append",
        dest="overrides",
        metavar="KEY=VALUE",
        default=[],
        help="override one config key",
    )
    sp.add_argument("--seed", type=int, help="override the run seed")
    sp.add_argument("--metric", help="override fitness.metric")
    if with_workers:
        sp.add_argument("--workers", type=int, default=1, help="evaluation processes")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="evosnn",
        description="Evolve motif-based spiking network architectures with a "
        "training-free stability fitness.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("evolve", help="run an evolution and export the best genomes")
    _add_common(sp, with_workers=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(fn=cmd_evolve)

    sp = sub.add_parser("transfer", help="evolve from an imported population")
    sp.add_argument("import_dir", help="directory of exported genome JSON files")
    _add_common(sp, with_workers=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(fn=cmd_transfer)

    sp = sub.add_parser("score", help="evaluate one genome's fitness")
    sp.add_argument("genome", help="genome JSON file")
    _add_common(sp)
    sp.set_defaults(fn=cmd_score)

    sp = sub.add_parser("decode", help="print a genome's architecture JSON")
    sp.add_argument("genome", help="genome JSON file")
    _add_common(sp)
    sp.set_defaults(fn=cmd_decode)

    sp = sub.add_parser("inspect", help="simulate one sample and print the result")
    sp.add_argument("genome", help="genome JSON file")
    _add_common(sp)
    sp.add_argument("--sample-index", type=int, default=0)
    sp.add_argument("--dump-weights", help="write the evaluation weights to an .npz")
    sp.set_defaults(fn=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
