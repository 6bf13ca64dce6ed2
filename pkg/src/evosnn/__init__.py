"""Evolutionary search over motif-based spiking neural network architectures."""

from .genome import (
    GeneDomains,
    Genome,
    GenomeConfig,
    LayerBlock,
    decode,
    depth,
    encode,
    genome_id,
    random_genome,
    validate,
)
from .motifs import (
    EiProfile,
    NetworkGraph,
    build_phenotype,
    build_stage,
    ei_profile,
    template,
)
from .simulate import (
    FiringPattern,
    LifConfig,
    LifState,
    SimResult,
    batch_forward,
    forward,
    init_weights,
    lif_step,
)
from .fitness import (
    FitnessConfig,
    bie_matrix,
    bie_score,
    cosine,
    jaccard,
    manhattan,
    sahd,
)
from .evolution import (
    EvolutionConfig,
    GenerationStats,
    bitflip_mutate,
    evolve,
    tournament_select,
    transfer_population,
    two_point_crossover,
)

__version__ = "0.1.0"
