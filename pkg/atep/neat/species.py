import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Sequence

from atep.core.errors import ContractError
from atep.neat.config import CompatConfig
from atep.neat.distance import distance
from atep.neat.genome import AgentGenome, best_genome
from atep.neat.innovation import IdCounter

logger = logging.getLogger(__name__)


@dataclass
class Species:
    species_id: int
    representative: AgentGenome
    members: List[AgentGenome] = field(default_factory=list)
    best_fitness_history: List[float] = field(default_factory=list)
    stagnation_count: int = 0

    def champion(self) -> AgentGenome:
        return best_genome(self.members)

    def contains(self, genome: AgentGenome) -> bool:
        return any(m is genome or m == genome for m in self.members)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "species_id": self.species_id,
            "representative": self.representative.to_dict(),
            "members": [m.genome_id for m in self.members],
            "best_fitness_history": list(self.best_fitness_history),
            "stagnation_count": self.stagnation_count,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], by_id: Mapping[int, AgentGenome]) -> "Species":
        """Rebuild a species; members are resolved against the owning population."""
        return cls(
            species_id=int(data["species_id"]),
            representative=AgentGenome.from_dict(data["representative"]),
            members=[by_id[int(i)] for i in data["members"]],
            best_fitness_history=[float(f) for f in data["best_fitness_history"]],
            stagnation_count=int(data["stagnation_count"]),
        )


def speciate(
    population: Sequence[AgentGenome],
    prior: Sequence[Species],
    cfg: CompatConfig,
    species_ids: IdCounter,
) -> List[Species]:
    """Partition ``population`` by compatibility distance.

    Each genome joins the first species (prior ones by id, then ones founded during this
    call) whose representative lies within ``delta_species``; otherwise it founds a new
    species. Empty species are dropped and every surviving species re-draws its
    representative as the member closest to the old one.
    """
    if not population:
        raise ContractError("speciate needs a non-empty population")

    working = [
        Species(
            species_id=sp.species_id,
            representative=sp.representative,
            best_fitness_history=list(sp.best_fitness_history),
            stagnation_count=sp.stagnation_count,
        )
        for sp in sorted(prior, key=lambda s: s.species_id)
    ]
    for genome in population:
        for sp in working:
            if distance(genome, sp.representative, cfg).delta < cfg.delta_species:
                sp.members.append(genome)
                break
        else:
            working.append(Species(species_ids.take(), genome, [genome]))

    result = []
    for sp in working:
        if not sp.members:
            logger.debug("species %d went extinct", sp.species_id)
            continue
        old = sp.representative
        sp.representative = min(
            sp.members,
            key=lambda m: (distance(m, old, cfg).delta, m.structural_hash(), m.genome_id),
        )
        result.append(sp)
    return result


def adjusted_fitness(sp: Species) -> List[float]:
    """Explicit fitness sharing: raw fitness divided by the species size."""
    size = len(sp.members)
    return [m.require_fitness() / size for m in sp.members]
