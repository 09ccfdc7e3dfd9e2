from typing import List, Optional, Sequence

import numpy as np

from atep.neat.config import MutationRates, NeatConfig
from atep.neat.genome import (
    Activation,
    AgentGenome,
    ConnectionGene,
    GenomeSignature,
    NodeGene,
    NodeKind,
)
from atep.neat.innovation import IdCounter, InnovationRegistry


def _weight(rng: Optional[np.random.Generator], stdev: float) -> float:
    return 0.0 if rng is None else float(rng.normal(0.0, stdev))


def minimal_genome(
    signature: GenomeSignature,
    reg: InnovationRegistry,
    genome_id: int,
    rng: Optional[np.random.Generator] = None,
    weight_stdev: float = 1.0,
) -> AgentGenome:
    """Inputs and bias wired directly to every output, no hidden nodes.

    With ``rng=None`` every weight is zero.
    """
    sources = (*signature.input_ids, signature.bias_id)
    connections = [
        ConnectionGene(reg.connection_innovation(s, o), s, o, _weight(rng, weight_stdev))
        for o in signature.output_ids
        for s in sources
    ]
    return AgentGenome(genome_id, tuple(signature.interface_nodes()), tuple(connections))


def layered_genome(
    signature: GenomeSignature,
    reg: InnovationRegistry,
    genome_id: int,
    hidden_layers: Sequence[int],
    rng: Optional[np.random.Generator] = None,
    weight_stdev: float = 1.0,
    hidden_activation: Activation = Activation.TANH,
) -> AgentGenome:
    """Fully connected feedforward genome with the given hidden layer widths.

    The bias node feeds every hidden and output unit.
    """
    nodes: List[NodeGene] = signature.interface_nodes()
    previous = list(signature.input_ids)
    connections: List[ConnectionGene] = []

    def connect(sources: Sequence[int], targets: Sequence[int]) -> None:
        for t in targets:
            for s in (*sources, signature.bias_id):
                connections.append(
                    ConnectionGene(reg.connection_innovation(s, t), s, t, _weight(rng, weight_stdev))
                )

    for layer, width in enumerate(hidden_layers):
        units = [reg.layer_node(layer, u) for u in range(width)]
        nodes.extend(NodeGene(u, NodeKind.HIDDEN, hidden_activation) for u in units)
        connect(previous, units)
        previous = units
    connect(previous, signature.output_ids)
    return AgentGenome(genome_id, tuple(nodes), tuple(connections))


def mutation_rates_for(cfg: NeatConfig) -> MutationRates:
    if cfg.fixed_topology is not None:
        return cfg.mutation.without_structure()
    return cfg.mutation


def initial_population(
    signature: GenomeSignature,
    cfg: NeatConfig,
    reg: InnovationRegistry,
    rng: np.random.Generator,
    genome_ids: IdCounter,
) -> List[AgentGenome]:
    """``cfg.pop_size`` unevaluated genomes: minimal ones, or layered ones in fixed-topology mode."""
    stdev = cfg.mutation.weight_init_stdev
    population = []
    for _ in range(cfg.pop_size):
        if cfg.fixed_topology is None:
            genome = minimal_genome(signature, reg, genome_ids.take(), rng, stdev)
        else:
            genome = layered_genome(
                signature,
                reg,
                genome_ids.take(),
                cfg.fixed_topology,
                rng,
                stdev,
                cfg.mutation.hidden_activation,
            )
        population.append(genome)
    return population
