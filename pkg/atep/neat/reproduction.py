import logging
import math
from dataclasses import replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from atep.core.errors import ContractError
from atep.neat.config import MutationRates, ReproductionConfig
from atep.neat.genome import (
    AgentGenome,
    ConnectionGene,
    NodeGene,
    NodeKind,
    adjacency,
    creates_cycle,
    rank_key,
)
from atep.neat.innovation import IdCounter, InnovationRegistry
from atep.neat.species import Species, adjusted_fitness

logger = logging.getLogger(__name__)


def _enforce_acyclic(genes: Sequence[ConnectionGene]) -> List[ConnectionGene]:
    # Walk genes in innovation order; any enabled gene that would close a cycle is disabled.
    adj: Dict[int, List[int]] = {}
    result = []
    for gene in genes:
        if gene.enabled and creates_cycle(adj, gene.from_node, gene.to_node):
            gene = replace(gene, enabled=False)
        if gene.enabled:
            adj.setdefault(gene.from_node, []).append(gene.to_node)
        result.append(gene)
    return result


def crossover(
    parent_a: AgentGenome,
    parent_b: AgentGenome,
    rng: np.random.Generator,
    child_id: Optional[int] = None,
    redisable_probability: float = 0.75,
) -> AgentGenome:
    """Align parents by innovation number and build one child.

    Matching genes come from either parent at random. Disjoint and excess genes come
    from the fitter parent, or from both when fitness ties.
    """
    fit_a = parent_a.require_fitness()
    fit_b = parent_b.require_fitness()
    tie = fit_a == fit_b
    fitter, other = (parent_b, parent_a) if fit_b > fit_a else (parent_a, parent_b)

    genes_f = fitter.connection_map
    genes_o = other.connection_map
    child_genes = []
    for innovation in sorted(genes_f.keys() | genes_o.keys()):
        gf = genes_f.get(innovation)
        go = genes_o.get(innovation)
        if gf is not None and go is not None:
            gene = gf if rng.random() < 0.5 else go
            if not (gf.enabled and go.enabled):
                gene = replace(gene, enabled=not (rng.random() < redisable_probability))
        elif gf is not None:
            gene = gf
        elif tie:
            gene = go
        else:
            continue
        child_genes.append(gene)
    child_genes = _enforce_acyclic(child_genes)

    nodes_f = fitter.node_map
    nodes_o = other.node_map
    needed = {n.id for n in fitter.nodes if n.kind is not NodeKind.HIDDEN}
    for gene in child_genes:
        needed.add(gene.from_node)
        needed.add(gene.to_node)
    child_nodes = []
    for node_id in sorted(needed):
        nf = nodes_f.get(node_id)
        no = nodes_o.get(node_id)
        if nf is not None and no is not None:
            child_nodes.append(nf if rng.random() < 0.5 else no)
        else:
            child_nodes.append(nf if nf is not None else no)

    return AgentGenome(
        genome_id=fitter.genome_id if child_id is None else child_id,
        nodes=tuple(child_nodes),
        connections=tuple(child_genes),
    )


def _mutate_weights(
    genes: List[ConnectionGene], rates: MutationRates, rng: np.random.Generator
) -> bool:
    changed = False
    for i, gene in enumerate(genes):
        if rng.random() < rates.weight_mutate_rate:
            if rng.random() < rates.weight_replace_rate:
                weight = rng.normal(0.0, rates.weight_init_stdev)
            else:
                weight = gene.weight + rng.normal(0.0, rates.weight_perturb_stdev)
            weight = float(np.clip(weight, -rates.weight_max, rates.weight_max))
            genes[i] = replace(gene, weight=weight)
            changed = True
    return changed


def _mutate_nodes(nodes: List[NodeGene], rates: MutationRates, rng: np.random.Generator) -> bool:
    changed = False
    for i, node in enumerate(nodes):
        if node.kind in (NodeKind.INPUT, NodeKind.BIAS):
            continue
        updated = node
        if rng.random() < rates.bias_mutate_rate:
            bias = updated.bias + rng.normal(0.0, rates.bias_perturb_stdev)
            updated = replace(updated, bias=float(np.clip(bias, -rates.weight_max, rates.weight_max)))
        if rng.random() < rates.response_mutate_rate:
            updated = replace(
                updated, response=float(updated.response + rng.normal(0.0, rates.response_perturb_stdev))
            )
        if (
            node.kind is NodeKind.HIDDEN
            and rates.activation_options
            and rng.random() < rates.activation_mutate_rate
        ):
            choice = rates.activation_options[int(rng.integers(len(rates.activation_options)))]
            updated = replace(updated, activation=choice)
        if updated != node:
            nodes[i] = updated
            changed = True
    return changed


def _add_connection(
    nodes: List[NodeGene],
    genes: List[ConnectionGene],
    reg: InnovationRegistry,
    rates: MutationRates,
    rng: np.random.Generator,
) -> bool:
    existing = {g.key for g in genes}
    adj = adjacency(g.key for g in genes if g.enabled)
    sources = [n.id for n in nodes if n.kind is not NodeKind.OUTPUT]
    targets = [n.id for n in nodes if n.kind in (NodeKind.HIDDEN, NodeKind.OUTPUT)]
    candidates = [
        (a, b)
        for a in sources
        for b in targets
        if (a, b) not in existing and not creates_cycle(adj, a, b)
    ]
    if not candidates:
        return False
    a, b = candidates[int(rng.integers(len(candidates)))]
    genes.append(
        ConnectionGene(
            innovation=reg.connection_innovation(a, b),
            from_node=a,
            to_node=b,
            weight=float(rng.normal(0.0, rates.weight_init_stdev)),
        )
    )
    return True


def _add_node(
    nodes: List[NodeGene],
    genes: List[ConnectionGene],
    reg: InnovationRegistry,
    rates: MutationRates,
    rng: np.random.Generator,
) -> bool:
    enabled = [i for i, g in enumerate(genes) if g.enabled]
    if not enabled:
        return False
    index = enabled[int(rng.integers(len(enabled)))]
    old = genes[index]
    genes[index] = replace(old, enabled=False)
    hidden = reg.split_node(old.from_node, old.to_node, taken={n.id for n in nodes})
    nodes.append(NodeGene(hidden, NodeKind.HIDDEN, rates.hidden_activation))
    genes.append(
        ConnectionGene(reg.connection_innovation(old.from_node, hidden), old.from_node, hidden, 1.0)
    )
    genes.append(
        ConnectionGene(reg.connection_innovation(hidden, old.to_node), hidden, old.to_node, old.weight)
    )
    return True


def _toggle_enable(genes: List[ConnectionGene], rng: np.random.Generator) -> bool:
    if not genes:
        return False
    index = int(rng.integers(len(genes)))
    gene = genes[index]
    if not gene.enabled:
        adj = adjacency(g.key for g in genes if g.enabled)
        if creates_cycle(adj, gene.from_node, gene.to_node):
            return False
    genes[index] = replace(gene, enabled=not gene.enabled)
    return True


def mutate(
    g: AgentGenome,
    reg: InnovationRegistry,
    rates: MutationRates,
    rng: np.random.Generator,
) -> AgentGenome:
    """Apply weight, node and (unless disabled) structural mutations.

    Returns ``g`` itself when nothing changed; otherwise a new, unevaluated genome with
    the same id.
    """
    nodes = list(g.nodes)
    genes = list(g.connections)
    changed = _mutate_weights(genes, rates, rng)
    changed = _mutate_nodes(nodes, rates, rng) or changed
    if rates.structural:
        if rng.random() < rates.add_connection_rate:
            changed = _add_connection(nodes, genes, reg, rates, rng) or changed
        if rng.random() < rates.add_node_rate:
            changed = _add_node(nodes, genes, reg, rates, rng) or changed
        if rng.random() < rates.toggle_enable_rate:
            changed = _toggle_enable(genes, rng) or changed
    if not changed:
        return g
    return AgentGenome(g.genome_id, tuple(nodes), tuple(genes))


def allocate_quotas(totals: Sequence[float], pop_size: int) -> List[int]:
    """Split ``pop_size`` proportionally to ``totals`` with largest-remainder rounding."""
    if not totals:
        return []
    grand = sum(totals)
    if grand <= 0:
        shares = [pop_size / len(totals)] * len(totals)
    else:
        shares = [pop_size * t / grand for t in totals]
    quotas = [int(math.floor(s)) for s in shares]
    leftover = pop_size - sum(quotas)
    order = sorted(range(len(shares)), key=lambda i: (-(shares[i] - quotas[i]), i))
    for i in order[:leftover]:
        quotas[i] += 1
    return quotas


def _update_stagnation(sp: Species) -> Species:
    best = sp.champion().require_fitness()
    previous = max(sp.best_fitness_history) if sp.best_fitness_history else -math.inf
    stagnation = 0 if best > previous else sp.stagnation_count + 1
    return Species(
        species_id=sp.species_id,
        representative=sp.representative,
        members=list(sp.members),
        best_fitness_history=[*sp.best_fitness_history, best],
        stagnation_count=stagnation,
    )


def reproduce_species(
    species: Sequence[Species],
    pop_size: int,
    cfg: ReproductionConfig,
    reg: InnovationRegistry,
    rng: np.random.Generator,
    genome_ids: IdCounter,
) -> Tuple[List[AgentGenome], List[Species]]:
    """Produce exactly ``pop_size`` offspring from evaluated, speciated parents.

    Species that have not improved for more than ``stagnation_limit_gens`` generations
    are dropped unless they hold the population champion. Offspring quotas follow each
    species' total adjusted fitness; each species keeps its top ``elitism`` members, and the
    species holding the population champion always receives at least one slot.

    Also returns the surviving species with their best-fitness history and stagnation
    count advanced; they are the prior species for the next speciation.
    """
    if not species:
        raise ContractError("reproduce needs at least one species")
    if pop_size < 1:
        raise ContractError("pop_size must be positive")

    updated = [_update_stagnation(sp) for sp in sorted(species, key=lambda s: s.species_id)]
    everyone = [m for sp in updated for m in sp.members]
    champion = min(everyone, key=rank_key)

    survivors = [
        sp
        for sp in updated
        if sp.stagnation_count <= cfg.stagnation_limit_gens or sp.contains(champion)
    ]
    if not survivors:
        survivors = [min(updated, key=lambda sp: rank_key(sp.champion()))]
    dropped = len(updated) - len(survivors)
    if dropped:
        logger.debug("removed %d stagnant species", dropped)

    # Quotas need non-negative totals; shift raw scores so the worst member sits at zero.
    lowest = min(m.require_fitness() for sp in survivors for m in sp.members)
    offset = max(0.0, -lowest)
    totals = [sum(adjusted_fitness(sp)) + offset for sp in survivors]
    quotas = allocate_quotas(totals, pop_size)
    home = next(i for i, sp in enumerate(survivors) if sp.contains(champion))
    if quotas[home] == 0:
        donor = max(range(len(quotas)), key=lambda i: (quotas[i], -i))
        quotas[donor] -= 1
        quotas[home] = 1

    offspring: List[AgentGenome] = []
    rates = cfg.mutation
    for sp, quota in zip(survivors, quotas):
        if quota == 0:
            continue
        ranked = sorted(sp.members, key=rank_key)
        elites = ranked[: min(cfg.elitism, quota)]
        offspring.extend(elites)
        n_parents = max(1, int(math.ceil(cfg.survival_fraction * len(ranked))))
        parents = ranked[:n_parents]
        for _ in range(quota - len(elites)):
            if len(parents) > 1 and rng.random() < cfg.crossover_rate:
                i, j = rng.choice(len(parents), size=2, replace=False)
                child = crossover(
                    parents[int(i)],
                    parents[int(j)],
                    rng,
                    child_id=genome_ids.take(),
                    redisable_probability=cfg.redisable_probability,
                )
            else:
                parent = parents[int(rng.integers(len(parents)))]
                child = AgentGenome(genome_ids.take(), parent.nodes, parent.connections)
            offspring.append(mutate(child, reg, rates, rng))
    return offspring, survivors


def reproduce(
    species: Sequence[Species],
    pop_size: int,
    cfg: ReproductionConfig,
    reg: InnovationRegistry,
    rng: np.random.Generator,
    genome_ids: IdCounter,
) -> List[AgentGenome]:
    return reproduce_species(species, pop_size, cfg, reg, rng, genome_ids)[0]
