import json
from pathlib import Path

import numpy as np
import pytest

from evosnn.cli import main

REPO = Path(__file__).resolve().parents[1]
DESK_CONFIG = REPO / "configs" / "desk.json"


@pytest.fixture(scope="module")
def tiny_config(tmp_path_factory):
    """Cut-down desk config so CLI tests stay fast."""
    cfg = json.loads(DESK_CONFIG.read_text())
    cfg.update(
        {
            "genome.max_layers": 4,
            "evolution.n_pop": 6,
            "evolution.n_offs": 6,
            "evolution.generations": 3,
            "evolution.top_k": 4,
            "net.channels": 4,
        }
    )
    path = tmp_path_factory.mktemp("cfg") / "tiny.json"
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture(scope="module")
def tiny_run(tiny_config, tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "a"
    assert main(["evolve", "--config", str(tiny_config), "--out", str(out)]) == 0
    return out


def test_evolve_outputs(tiny_run, tiny_config):
    stats = (tiny_run / "stats.jsonl").read_text().splitlines()
    assert len(stats) == 3
    for line in stats:
        doc = json.loads(line)
        assert doc["schema_version"] == 1
        assert {"generation", "best_fitness", "mean_fitness", "fitness_variance", "best_id"} <= set(doc)
    genomes = sorted((tiny_run / "top_k").glob("genome_*.json"))
    assert len(genomes) == 4
    manifest = json.loads((tiny_run / "manifest.json").read_text())
    assert manifest["command"] == "evolve"
    assert manifest["config"]["evolution.n_pop"] == 6
    assert "seed" in manifest["config"]


def test_evolve_missing_config_exits_2(tmp_path, capsys):
    rc = main(["evolve", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "error" in capsys.readouterr().err


def test_evolve_same_seed_byte_identical(tiny_config, tiny_run, tmp_path):
    out = tmp_path / "b"
    assert main(["evolve", "--config", str(tiny_config), "--out", str(out)]) == 0
    assert (out / "stats.jsonl").read_bytes() == (tiny_run / "stats.jsonl").read_bytes()


def test_evolve_workers_do_not_change_results(tiny_config, tiny_run, tmp_path):
    out = tmp_path / "w2"
    rc = main(["evolve", "--config", str(tiny_config), "--out", str(out), "--workers", "2"])
    assert rc == 0
    assert (out / "stats.jsonl").read_bytes() == (tiny_run / "stats.jsonl").read_bytes()


def test_manifest_reproduces_run(tiny_run, tmp_path):
    out = tmp_path / "from_manifest"
    rc = main(["evolve", "--config", str(tiny_run / "manifest.json"), "--out", str(out)])
    assert rc == 0
    assert (out / "stats.jsonl").read_bytes() == (tiny_run / "stats.jsonl").read_bytes()


def test_score_matches_recorded_fitness(tiny_run, tiny_config, capsys):
    top = json.loads((tiny_run / "top_k" / "genome_01.json").read_text())
    rc = main(["score", str(tiny_run / "top_k" / "genome_01.json"), "--config", str(tiny_config)])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert report["fitness"] == top["meta"]["fitness"]
    assert report["bie_score"] == -top["meta"]["fitness"]
    assert set(report) >= {"bie_score", "total_spikes", "depth", "ei_histogram"}


def test_score_degenerate_genome_exits_2(tiny_config, tmp_path, capsys):
    doc = {"config": {"l": 4, "b": 20}, "genes": [0] * 21 * 4 + [1, 1]}
    # zero motif genes but legal micro genes
    genes = []
    for _ in range(4):
        genes.append(0)
        genes.extend([1] * 20)
    doc["genes"] = genes + [1, 1]
    path = tmp_path / "degenerate.json"
    path.write_text(json.dumps(doc))
    rc = main(["score", str(path), "--config", str(tiny_config)])
    assert rc == 2
    assert "error" in capsys.readouterr().err


def test_score_metric_flag(tiny_run, tiny_config, capsys):
    genome = str(tiny_run / "top_k" / "genome_01.json")
    assert main(["score", genome, "--config", str(tiny_config), "--metric", "jaccard"]) == 0
    jaccard_report = json.loads(capsys.readouterr().out)
    assert main(["score", genome, "--config", str(tiny_config), "--metric", "manhattan"]) == 0
    manhattan_report = json.loads(capsys.readouterr().out)
    assert jaccard_report["metric"] == "jaccard"
    assert jaccard_report["bie_score"] != manhattan_report["bie_score"]


def _write_genome(path, l, b, ms, g1=1, g2=1):
    genes = []
    for m in ms:
        genes.append(m)
        genes.extend([1] * b)
    genes += [g1, g2]
    path.write_text(json.dumps({"config": {"l": l, "b": b}, "genes": genes}))


def test_decode_fe_only_has_no_inhibitory_edges(tiny_config, tmp_path, capsys):
    path = tmp_path / "fe.json"
    _write_genome(path, 4, 20, [1, 1, 0, 0], g1=1)
    assert main(["decode", str(path), "--config", str(tiny_config)]) == 0
    doc = json.loads(capsys.readouterr().out)
    polarities = [e["polarity"] for s in doc["stages"] for e in s["edges"]]
    assert set(polarities) == {"excitatory"}
    assert doc["cross_edges"] == []


def test_decode_stable_bytes(tiny_config, tmp_path, capsys):
    path = tmp_path / "g.json"
    _write_genome(path, 4, 20, [2, 4, 5, 3], g1=3, g2=2)
    assert main(["decode", str(path), "--config", str(tiny_config)]) == 0
    first = capsys.readouterr().out
    assert main(["decode", str(path), "--config", str(tiny_config)]) == 0
    assert capsys.readouterr().out == first


def test_inspect_prints_sim_result(tiny_run, tiny_config, tmp_path, capsys):
    genome = str(tiny_run / "top_k" / "genome_01.json")
    dump = tmp_path / "weights.npz"
    rc = main(
        ["inspect", genome, "--config", str(tiny_config), "--dump-weights", str(dump)]
    )
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["total_spikes"] == sum(doc["firing_pattern"])
    assert doc["n_neurons"] == len(doc["firing_pattern"])
    assert dump.exists()
    with np.load(dump) as data:
        assert "head" in data.files


def test_transfer_from_exported_topk(tiny_run, tiny_config, tmp_path):
    out = tmp_path / "transferred"
    rc = main(
        [
            "transfer",
            str(tiny_run / "top_k"),
            "--config",
            str(tiny_config),
            "--out",
            str(out),
            "--set",
            "data.generator=blobs",
            "--set",
            "net.num_classes=4",
        ]
    )
    assert rc == 0
    assert len((out / "stats.jsonl").read_text().splitlines()) == 3


def test_transfer_empty_dir_exits_2(tiny_config, tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    rc = main(["transfer", str(empty), "--config", str(tiny_config), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "error" in capsys.readouterr().err


def test_transfer_population_identity_zero_generations(tiny_run, tiny_config, tmp_path):
    """Imports equal to n_pop with zero generations come back out as the top-k."""
    out = tmp_path / "ident"
    rc = main(
        [
            "transfer",
            str(tiny_run / "top_k"),
            "--config",
            str(tiny_config),
            "--out",
            str(out),
            "--set",
            "evolution.generations=0",
            "--set",
            "evolution.n_pop=4",
            "--set",
            "evolution.top_k=4",
        ]
    )
    assert rc == 0
    imported = {
        tuple(json.loads(p.read_text())["genes"])
        for p in (tiny_run / "top_k").glob("genome_*.json")
    }
    exported = {
        tuple(json.loads(p.read_text())["genes"])
        for p in (out / "top_k").glob("genome_*.json")
    }
    assert exported <= imported


def test_transfer_config_mismatch_exits_2(tiny_run, tiny_config, tmp_path, capsys):
    bad_dir = tmp_path / "mismatch"
    bad_dir.mkdir()
    _write_genome(bad_dir / "g.json", 3, 20, [1, 1, 1])
    rc = main(["transfer", str(bad_dir), "--config", str(tiny_config), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "does not match" in capsys.readouterr().err


def test_unknown_config_key_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"evolution.population": 5}))
    rc = main(["evolve", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "unknown config key" in capsys.readouterr().err
