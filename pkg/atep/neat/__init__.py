from atep.neat.config import CompatConfig, MutationRates, NeatConfig, ReproductionConfig
from atep.neat.distance import DistanceBreakdown, distance
from atep.neat.genome import (
    Activation,
    AgentGenome,
    ConnectionGene,
    GenomeSignature,
    NodeGene,
    NodeKind,
)
from atep.neat.innovation import IdCounter, InnovationRegistry, registry_copy
from atep.neat.reproduction import crossover, mutate, reproduce, reproduce_species
from atep.neat.species import Species, adjusted_fitness, speciate

__all__ = [
    "Activation",
    "AgentGenome",
    "CompatConfig",
    "ConnectionGene",
    "DistanceBreakdown",
    "GenomeSignature",
    "IdCounter",
    "InnovationRegistry",
    "MutationRates",
    "NeatConfig",
    "NodeGene",
    "NodeKind",
    "ReproductionConfig",
    "Species",
    "adjusted_fitness",
    "crossover",
    "distance",
    "mutate",
    "registry_copy",
    "reproduce",
    "reproduce_species",
    "speciate",
]
