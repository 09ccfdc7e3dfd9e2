from dataclasses import dataclass

from atep.neat.config import CompatConfig
from atep.neat.genome import AgentGenome


@dataclass(frozen=True)
class DistanceBreakdown:
    excess: int
    disjoint: int
    mean_weight_diff: float
    larger_size: int
    delta: float


def distance(a: AgentGenome, b: AgentGenome, cfg: CompatConfig) -> DistanceBreakdown:
    """Compatibility distance: delta = c1*E/N + c2*D/N + c3*W.

    Disabled genes take part in the alignment and in W.
    """
    genes_a = a.connection_map
    genes_b = b.connection_map
    max_a = a.max_innovation
    max_b = b.max_innovation

    excess = 0
    disjoint = 0
    for innovation in genes_a.keys() - genes_b.keys():
        if innovation > max_b:
            excess += 1
        else:
            disjoint += 1
    for innovation in genes_b.keys() - genes_a.keys():
        if innovation > max_a:
            excess += 1
        else:
            disjoint += 1

    matching = sorted(genes_a.keys() & genes_b.keys())
    if matching:
        total = 0.0
        for innovation in matching:
            total += abs(genes_a[innovation].weight - genes_b[innovation].weight)
        mean_weight_diff = total / len(matching)
    else:
        mean_weight_diff = 0.0

    size_a, size_b = len(genes_a), len(genes_b)
    larger = max(size_a, size_b)
    if size_a < cfg.small_genome_floor and size_b < cfg.small_genome_floor:
        larger = 1
    larger = max(larger, 1)

    delta = cfg.c1 * excess / larger + cfg.c2 * disjoint / larger + cfg.c3 * mean_weight_diff
    return DistanceBreakdown(excess, disjoint, mean_weight_diff, larger, delta)
