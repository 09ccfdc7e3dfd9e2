import logging
from dataclasses import replace
from typing import Dict, List, Sequence, Tuple

import numpy as np

from atep.core.worker_pool import SERIAL, EvaluationPool
from atep.neat.genome import AgentGenome
from atep.neat.innovation import IdCounter, InnovationRegistry, registry_copy
from atep.neat.population import mutation_rates_for
from atep.neat.reproduction import reproduce_species
from atep.neat.species import speciate
from atep.poet.config import PoetConfig
from atep.poet.pair import EAPair, SolvedRecord, pair_rng
from atep.poet.state import EngineState
from atep.sim.walker import EVALUATIONS, RolloutCounter, RolloutJob, RolloutResult, run_rollouts
from atep.terrain.env_genome import EnvGenome
from atep.terrain.synthesis import Terrain, synthesize

logger = logging.getLogger(__name__)


class EvaluationContext:
    """Shared machinery for the engine and the transfer mechanisms.

    Every rollout goes through ``run`` so the state's function-evaluation count and the
    simulator's own counter advance together.
    """

    def __init__(
        self,
        cfg: PoetConfig,
        pool: EvaluationPool = SERIAL,
        counter: RolloutCounter = EVALUATIONS,
    ):
        self.cfg = cfg
        self.pool = pool
        self.counter = counter
        self.repro = replace(cfg.neat.reproduction, mutation=mutation_rates_for(cfg.neat))
        self._terrains: Dict[int, Terrain] = {}

    def terrain(self, env: EnvGenome) -> Terrain:
        terrain = self._terrains.get(env.env_id)
        if terrain is None:
            terrain = synthesize(env, self.cfg.terrain)
            self._terrains[env.env_id] = terrain
        return terrain

    def run(self, state: EngineState, jobs: Sequence[RolloutJob]) -> List[RolloutResult]:
        results = run_rollouts(jobs, self.pool, self.counter)
        state.function_evals += len(jobs)
        return results

    def evaluate_groups(
        self, state: EngineState, groups: Sequence[Tuple[Sequence[AgentGenome], EnvGenome]]
    ) -> List[List[AgentGenome]]:
        """Evaluate several populations in one batch; results come back per group."""
        sim = self.cfg.sim
        jobs = [RolloutJob(g, self.terrain(env), sim) for genomes, env in groups for g in genomes]
        results = iter(self.run(state, jobs))
        return [[g.with_fitness(next(results).score) for g in genomes] for genomes, _ in groups]

    def evaluate(
        self, state: EngineState, genomes: Sequence[AgentGenome], env: EnvGenome
    ) -> List[AgentGenome]:
        return self.evaluate_groups(state, [(genomes, env)])[0]

    def score_matrix(
        self, state: EngineState, agents: Sequence[AgentGenome], envs: Sequence[EnvGenome]
    ) -> np.ndarray:
        """Scores with shape (len(envs), len(agents))."""
        sim = self.cfg.sim
        jobs = [RolloutJob(a, self.terrain(env), sim) for env in envs for a in agents]
        scores = np.array([r.score for r in self.run(state, jobs)], dtype=np.float64)
        return scores.reshape(len(envs), len(agents))

    def respeciate(self, pair: EAPair, population: List[AgentGenome], fresh: bool = False) -> None:
        prior = [] if fresh else pair.species
        pair.species = speciate(population, prior, self.cfg.neat.compat, pair.species_ids)
        pair.population = population

    def record(self, state: EngineState, pair: EAPair) -> None:
        champion = pair.champion
        score = champion.require_fitness()
        pair.record_best(score, self.cfg.engine.history_length, self.cfg.sim.solved_threshold)
        if score >= self.cfg.sim.solved_threshold:
            state.note_solved(SolvedRecord(pair.env_id, champion, state.iteration, score))

    def generation(self, state: EngineState, pairs: Sequence[EAPair], record: bool = True) -> None:
        """One NEAT generation per pair: reproduce (if speciated), evaluate, speciate.

        Pairs that have no species yet (fresh copies) are evaluated as they are.
        """
        pop_size = self.cfg.neat.pop_size
        offspring = []
        for pair in pairs:
            if pair.species:
                # Survivors carry the advanced stagnation bookkeeping into respeciation.
                children, pair.species = reproduce_species(
                    pair.species, pop_size, self.repro, pair.reg, pair.rng, state.genome_ids
                )
            else:
                children = list(pair.population)
            offspring.append((children, pair.env))
        evaluated = self.evaluate_groups(state, offspring)
        for pair, population in zip(pairs, evaluated):
            self.respeciate(pair, population)
            if record:
                self.record(state, pair)

    def import_genomes(
        self,
        state: EngineState,
        genomes: Sequence[AgentGenome],
        source: InnovationRegistry,
        target: InnovationRegistry,
    ) -> List[AgentGenome]:
        """Translate genomes into another registry under fresh ids, ready for re-evaluation."""
        return [
            target.translate(g, source).with_id(state.genome_ids.take()).with_fitness(None)
            for g in genomes
        ]

    def seed_pair(self, state: EngineState, env: EnvGenome, source: EAPair) -> EAPair:
        """New pair on ``env`` starting from a copy of ``source``'s whole population."""
        reg = registry_copy(source.reg)
        pair = EAPair(
            env=env,
            population=self.import_genomes(state, source.population, source.reg, reg),
            reg=reg,
            rng=pair_rng(self.cfg.seed, env.env_id),
            species_ids=IdCounter(),
        )
        self.generation(state, [pair])
        return pair
