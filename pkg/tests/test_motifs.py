import numpy as np
import pytest

from evosnn.genome import Genome, GenomeConfig, LayerBlock, random_genome
from evosnn.motifs import (
    EXC,
    FEEDBACK,
    FEEDFORWARD,
    INH,
    DegenerateGenomeError,
    PhenotypeError,
    architecture_json_bytes,
    architecture_to_json,
    build_phenotype,
    build_stage,
    ei_profile,
    template,
)

ALL_MOTIFS = ("FE", "FI", "FbI", "LI", "MI")


def make_genome(ms, g1=1, g2=1, b=8):
    layers = tuple(LayerBlock(m=m, x=(1,) * b) for m in ms)
    return Genome(layers=layers, g1=g1, g2=g2)


def test_template_fe_structure():
    t = template("FE")
    assert [(n.name, n.polarity) for n in t.nodes] == [("B", EXC), ("C", EXC)]
    assert [(e.src, e.dst) for e in t.edges] == [("A", "B"), ("B", "C")]
    assert all(e.polarity == EXC for e in t.edges)
    assert all(e.kind == FEEDFORWARD for e in t.edges)


def test_template_fbi_has_inhibitory_feedback():
    t = template("FbI")
    fb = [e for e in t.edges if e.kind == FEEDBACK]
    assert len(fb) == 1
    assert fb[0].src == "C" and fb[0].dst == "B" and fb[0].polarity == INH


def test_template_mi_mutual_inhibition():
    t = template("MI")
    fb = {(e.src, e.dst) for e in t.edges if e.kind == FEEDBACK}
    assert fb == {("B", "C"), ("C", "B")}
    assert all(e.polarity == INH for e in t.edges if e.kind == FEEDBACK)


def test_template_by_gene_value_and_unknown():
    assert template(1).id == "FE"
    assert template(4).id == "LI"
    with pytest.raises(KeyError):
        template(9)
    with pytest.raises(KeyError):
        template("XX")


@pytest.mark.parametrize("motif", ALL_MOTIFS)
def test_edge_polarity_matches_source_node(motif):
    t = template(motif)
    polarity = {n.name: n.polarity for n in t.nodes}
    for e in t.edges:
        expected = EXC if e.src == "A" else polarity[e.src]
        assert e.polarity == expected


def test_inhibitory_node_counts():
    expected = {"FE": 0, "FI": 1, "FbI": 1, "LI": 1, "MI": 2}
    for motif, n_inh in expected.items():
        t = template(motif)
        assert sum(1 for n in t.nodes if n.polarity == INH) == n_inh


def test_feedback_only_in_fbi_and_mi():
    for motif in ALL_MOTIFS:
        t = template(motif)
        has_fb = any(e.kind == FEEDBACK for e in t.edges)
        assert has_fb == (motif in ("FbI", "MI"))


def test_build_stage_kernel_assignment_fe():
    block = LayerBlock(m=1, x=(1, 2, 1, 1))
    stage = build_stage(block, 3, 8)
    assert [e.kernel for e in stage.edges] == [3, 5]
    assert stage.edges[0].in_channels == 3
    assert stage.edges[0].out_channels == 8


def test_build_stage_kernel_assignment_fi_all_5x5():
    block = LayerBlock(m=2, x=(2, 2, 2, 2))
    stage = build_stage(block, 4, 4)
    assert [e.kernel for e in stage.edges] == [5, 5, 5]


def test_surplus_micro_genes_are_neutral():
    a = build_stage(LayerBlock(m=1, x=(1, 2, 1, 1, 1, 1)), 3, 8)
    b = build_stage(LayerBlock(m=1, x=(1, 2, 2, 2, 2, 2)), 3, 8)
    assert a == b


def test_build_stage_rejects_empty_layer():
    with pytest.raises(PhenotypeError):
        build_stage(LayerBlock(m=0, x=(1, 1)), 3, 8)


def test_li_splits_output_channels():
    stage = build_stage(LayerBlock(m=4, x=(1,) * 8), 3, 5)
    widths = {n.name: n.channels for n in stage.nodes}
    assert widths["B1"] == 3 and widths["B2"] == 2
    assert stage.output_nodes == ("B1", "B2")
    with pytest.raises(PhenotypeError):
        build_stage(LayerBlock(m=4, x=(1,) * 8), 3, 1)


def test_phenotype_g1_1_has_no_cross_edges():
    g = make_genome((1, 2, 3, 4, 5), g1=1)
    net = build_phenotype(g, (1, 8, 8), 4)
    assert net.cross_edges == ()


def test_phenotype_g1_3_depth_5_wiring():
    g = make_genome((1, 1, 1, 1, 1), g1=3)
    net = build_phenotype(g, (1, 8, 8), 4)
    pairs = {(x.from_stage, x.to_stage) for x in net.cross_edges}
    assert pairs == {(1, 3), (1, 4), (2, 4), (2, 5), (3, 5)}
    assert {(x.from_stage, x.to_stage) for x in net.cross_edges if x.to_stage == 4} == {
        (1, 4),
        (2, 4),
    }


def test_single_stage_ignores_g1():
    g = make_genome((2,) + (0,) * 9, g1=3)
    net = build_phenotype(g, (1, 8, 8), 4)
    assert len(net.stages) == 1
    assert net.cross_edges == ()


def test_empty_layers_are_skipped_and_depth_matches():
    g = make_genome((0, 3, 0, 1, 0, 5), g1=2)
    net = build_phenotype(g, (1, 8, 8), 4)
    assert [s.motif for s in net.stages] == ["FbI", "FE", "MI"]
    assert len(net.stages) == 3


def test_stage_count_equals_depth_random():
    cfg = GenomeConfig(max_layers=6, genes_per_layer=5)
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 500:
        g = random_genome(cfg, rng)
        d = sum(1 for blk in g.layers if blk.m != 0)
        if d == 0:
            with pytest.raises(DegenerateGenomeError):
                build_phenotype(g, (1, 8, 8), 4)
            continue
        net = build_phenotype(g, (1, 8, 8), 4)
        assert len(net.stages) == d
        checked += 1


def test_cross_edges_respect_span_bound():
    cfg = GenomeConfig(max_layers=6, genes_per_layer=5)
    rng = np.random.default_rng(12)
    for _ in range(300):
        g = random_genome(cfg, rng)
        if sum(1 for blk in g.layers if blk.m != 0) == 0:
            continue
        net = build_phenotype(g, (1, 8, 8), 4)
        for x in net.cross_edges:
            gap = x.to_stage - x.from_stage
            assert 2 <= gap <= g.g1
        if g.g1 == 1:
            assert net.cross_edges == ()


def test_phenotype_deterministic():
    g = make_genome((1, 4, 5), g1=2, g2=2)
    a = build_phenotype(g, (1, 8, 8), 6)
    b = build_phenotype(g, (1, 8, 8), 6)
    assert a == b


def test_degenerate_genome_raises():
    g = make_genome((0,) * 5)
    with pytest.raises(DegenerateGenomeError):
        build_phenotype(g, (1, 8, 8), 4)


def test_downsampling_and_cross_stride():
    g = make_genome((1, 1, 1, 1, 1, 1), g1=3)
    net = build_phenotype(g, (1, 8, 8), 4, downsample_interval=3)
    assert [s.in_resolution for s in net.stages] == [(8, 8)] * 3 + [(4, 4)] * 3
    assert net.stages[2].pool_after and net.stages[5].pool_after
    assert net.downsample_plan == (1, 1, 2, 1, 1, 2)
    strides = {(x.from_stage, x.to_stage): x.stride for x in net.cross_edges}
    # stage 2 output is still 8x8 while stage 5 reads 4x4 input
    assert strides[(2, 5)] == 2
    assert strides[(3, 5)] == 1


def test_channel_plan_list_extends():
    g = make_genome((1, 1, 1, 1))
    net = build_phenotype(g, (1, 8, 8), [4, 6])
    assert net.channel_plan == (4, 6, 6, 6)
    assert net.stages[1].in_channels == 4
    assert net.stages[2].in_channels == 6


def test_ei_profile_mapping():
    g = make_genome((1, 4, 5))
    net = build_phenotype(g, (1, 8, 8), 4)
    profile = ei_profile(net)
    assert profile.classes == (1, 3, 4)
    assert profile.histogram == {1: 1, 2: 0, 3: 1, 4: 1}

    fe_net = build_phenotype(make_genome((1, 1, 1, 1)), (1, 8, 8), 4)
    assert ei_profile(fe_net).histogram == {1: 4, 2: 0, 3: 0, 4: 0}

    fi = ei_profile(build_phenotype(make_genome((2,)), (1, 8, 8), 4)).classes
    fbi = ei_profile(build_phenotype(make_genome((3,)), (1, 8, 8), 4)).classes
    assert fi == fbi == (2,)


def test_architecture_json_stable_bytes():
    g = make_genome((2, 0, 4), g1=3, g2=2)
    cfg = GenomeConfig(max_layers=3, genes_per_layer=8)
    net = build_phenotype(g, (1, 8, 8), 4, genome_id="abc123")
    doc = architecture_to_json(net, g, cfg)
    assert architecture_json_bytes(doc) == architecture_json_bytes(
        architecture_to_json(build_phenotype(g, (1, 8, 8), 4, genome_id="abc123"), g, cfg)
    )
    assert doc["genome_id"] == "abc123"
    assert len(doc["stages"]) == 2
    assert doc["head"]["pooling"] == "global_avg"
    assert doc["genome"]["genes"][0] == 2
