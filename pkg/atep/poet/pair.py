from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Set

import numpy as np

from atep.neat.genome import AgentGenome, best_genome
from atep.neat.innovation import IdCounter, InnovationRegistry
from atep.neat.species import Species
from atep.poet.config import TransferKind
from atep.terrain.env_genome import EnvGenome


def rng_state(rng: np.random.Generator) -> Dict[str, Any]:
    return rng.bit_generator.state


def rng_from_state(state: Mapping[str, Any]) -> np.random.Generator:
    bit_generator = getattr(np.random, state["bit_generator"])()
    bit_generator.state = dict(state)
    return np.random.Generator(bit_generator)


def pair_rng(seed: int, env_id: int) -> np.random.Generator:
    return np.random.default_rng([seed, 1, env_id])


@dataclass
class EAPair:
    """An active environment and the NEAT population evolving on it."""

    env: EnvGenome
    population: List[AgentGenome]
    reg: InnovationRegistry
    rng: np.random.Generator
    species: List[Species] = field(default_factory=list)
    species_ids: IdCounter = field(default_factory=IdCounter)
    best_fitness_history: List[float] = field(default_factory=list)
    solved_flag: bool = False

    @property
    def env_id(self) -> int:
        return self.env.env_id

    @property
    def champion(self) -> AgentGenome:
        return best_genome(self.population)

    @property
    def current_best(self) -> Optional[float]:
        return self.best_fitness_history[-1] if self.best_fitness_history else None

    def record_best(self, score: float, history_length: int, solved_threshold: float) -> None:
        self.best_fitness_history = [*self.best_fitness_history, score][-history_length:]
        if score >= solved_threshold:
            self.solved_flag = True

    def species_of(self, genome: AgentGenome) -> Species:
        for sp in self.species:
            if sp.contains(genome):
                return sp
        raise LookupError(f"genome {genome.genome_id} is not in any species of env {self.env_id}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "env": self.env.to_dict(),
            "population": [g.to_dict() for g in self.population],
            "species": [sp.to_dict() for sp in self.species],
            "species_ids": self.species_ids.next_id,
            "reg": self.reg.to_dict(),
            "rng": rng_state(self.rng),
            "best_fitness_history": list(self.best_fitness_history),
            "solved_flag": self.solved_flag,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EAPair":
        population = [AgentGenome.from_dict(g) for g in data["population"]]
        by_id = {g.genome_id: g for g in population}
        return cls(
            env=EnvGenome.from_dict(data["env"]),
            population=population,
            reg=InnovationRegistry.from_dict(data["reg"]),
            rng=rng_from_state(data["rng"]),
            species=[Species.from_dict(sp, by_id) for sp in data["species"]],
            species_ids=IdCounter(int(data["species_ids"])),
            best_fitness_history=[float(f) for f in data["best_fitness_history"]],
            solved_flag=bool(data["solved_flag"]),
        )


@dataclass(frozen=True)
class ArchivedPair:
    env: EnvGenome
    champion: AgentGenome
    retired_iteration: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "env": self.env.to_dict(),
            "champion": self.champion.to_dict(),
            "retired_iteration": self.retired_iteration,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ArchivedPair":
        return cls(
            env=EnvGenome.from_dict(data["env"]),
            champion=AgentGenome.from_dict(data["champion"]),
            retired_iteration=int(data["retired_iteration"]),
        )


@dataclass
class Archive:
    """Retired pairs in retirement order plus the set of environments ANNECS has counted."""

    pairs: List[ArchivedPair] = field(default_factory=list)
    annecs_counted: Set[int] = field(default_factory=set)

    def retire(self, pair: EAPair, iteration: int) -> ArchivedPair:
        archived = ArchivedPair(pair.env, pair.champion, iteration)
        self.pairs.append(archived)
        return archived

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pairs": [p.to_dict() for p in self.pairs],
            "annecs_counted": sorted(self.annecs_counted),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Archive":
        return cls(
            pairs=[ArchivedPair.from_dict(p) for p in data["pairs"]],
            annecs_counted={int(e) for e in data["annecs_counted"]},
        )


@dataclass(frozen=True)
class SolvedRecord:
    """Latest agent that scored at least the solved threshold on an environment."""

    env_id: int
    agent: AgentGenome
    iteration: int
    score: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "env_id": self.env_id,
            "agent": self.agent.to_dict(),
            "iteration": self.iteration,
            "score": self.score,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SolvedRecord":
        return cls(
            env_id=int(data["env_id"]),
            agent=AgentGenome.from_dict(data["agent"]),
            iteration=int(data["iteration"]),
            score=float(data["score"]),
        )


@dataclass(frozen=True)
class TransferEvent:
    iteration: int
    kind: TransferKind
    source_env_id: int
    target_env_id: int

    def to_row(self) -> List[Any]:
        return [self.iteration, self.kind.value, self.source_env_id, self.target_env_id]
