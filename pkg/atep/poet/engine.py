import logging
from typing import Callable, List, Optional, Sequence

import numpy as np

from atep.core.errors import ContractError
from atep.core.worker_pool import SERIAL, EvaluationPool
from atep.metrics.annecs import update_annecs
from atep.metrics.ledger import LedgerRow
from atep.neat.genome import AgentGenome
from atep.neat.innovation import IdCounter, InnovationRegistry
from atep.neat.population import initial_population
from atep.poet.config import PoetConfig, TransferKind
from atep.poet.context import EvaluationContext
from atep.poet.pair import EAPair, SolvedRecord, pair_rng
from atep.poet.pata_ec import novelty, pata_ec_vector
from atep.poet.state import EngineState
from atep.poet.transfer import attempt_transfers
from atep.sim.walker import EVALUATIONS, RolloutCounter
from atep.terrain.env_genome import CPPN_SIGNATURE, EnvGenome
from atep.terrain.synthesis import reproduce_env, root_env

logger = logging.getLogger(__name__)


class PoetEngine:
    """Outer loop: per-pair NEAT, environment reproduction, transfers and bookkeeping."""

    def __init__(
        self,
        cfg: PoetConfig,
        pool: EvaluationPool = SERIAL,
        counter: RolloutCounter = EVALUATIONS,
    ):
        self.cfg = cfg
        self.ctx = EvaluationContext(cfg, pool, counter)

    def initialize(self) -> EngineState:
        """Root environment with one freshly evaluated population (iteration 0)."""
        seed = self.cfg.seed
        env_reg = InnovationRegistry.for_signature(CPPN_SIGNATURE)
        env_ids = IdCounter()
        state = EngineState(
            iteration=0,
            pairs=[],
            env_reg=env_reg,
            env_ids=env_ids,
            genome_ids=IdCounter(),
            env_rng=np.random.default_rng([seed, 0]),
            transfer_rng=np.random.default_rng([seed, 2]),
        )
        env = root_env(env_ids, env_reg, self.cfg.terrain)
        signature = self.cfg.sim.agent_signature
        reg = InnovationRegistry.for_signature(signature)
        rng = pair_rng(seed, env.env_id)
        population = initial_population(signature, self.cfg.neat, reg, rng, state.genome_ids)
        pair = EAPair(env=env, population=population, reg=reg, rng=rng)
        self.ctx.generation(state, [pair])
        state.pairs.append(pair)
        logger.info(
            "initialized run: seed %d, pop_size %d, transfer %s",
            seed,
            self.cfg.neat.pop_size,
            self.cfg.transfer.kind.value,
        )
        return state

    def step_iteration(self, state: EngineState) -> EngineState:
        if not state.pairs:
            raise ContractError("step_iteration needs at least one active pair")
        state.iteration += 1
        self.ctx.generation(state, state.pairs)

        if self.cfg.schedule.reproduce_due(state.iteration):
            self.reproduce_environments(state)

        events = []
        if self.cfg.schedule.transfer_due(state.iteration):
            events = attempt_transfers(state, self.ctx, self.cfg.transfer)

        update_annecs(state.archive.annecs_counted, state.mc_passed, state.solved)
        row = self._ledger_row(state, events)
        state.ledger.append(row)
        logger.info(
            "iter %d: annecs %d, pairs %d, evals %d, mean best %.1f",
            row.iteration,
            row.annecs,
            row.active_pair_count,
            row.cumulative_function_evals,
            row.mean_best_fitness,
        )
        return state

    def _ledger_row(self, state: EngineState, events) -> LedgerRow:
        genomes = [g for p in state.pairs for g in p.population]
        bests = [p.champion.require_fitness() for p in state.pairs]
        counts = {kind: 0 for kind in TransferKind}
        for event in events:
            counts[event.kind] += 1
        return LedgerRow(
            iteration=state.iteration,
            annecs=state.annecs,
            mean_nodes=float(np.mean([g.hidden_count for g in genomes])),
            mean_best_fitness=float(np.mean(bests)),
            cumulative_function_evals=state.function_evals,
            active_pair_count=len(state.pairs),
            transfers_fbt=counts[TransferKind.FBT],
            transfers_sbt=counts[TransferKind.SBT],
            transfers_rt=counts[TransferKind.RT],
        )

    def compute_pata_ec(
        self, state: EngineState, env: EnvGenome, agents: Sequence[AgentGenome]
    ) -> np.ndarray:
        scores = self.ctx.score_matrix(state, agents, [env])[0]
        engine = self.cfg.engine
        return pata_ec_vector(scores, engine.clip_lo, engine.clip_hi)

    def pata_ec_agents(self, state: EngineState) -> List[AgentGenome]:
        """Active champions in env_id order, then archived champions in retirement order."""
        active = [p.champion for p in sorted(state.pairs, key=lambda p: p.env_id)]
        return active + [a.champion for a in state.archive.pairs]

    def _note_solves(
        self, state: EngineState, envs: Sequence[EnvGenome], agents: Sequence[AgentGenome], scores: np.ndarray
    ) -> None:
        # Any agent reaching the threshold marks the environment solved if nothing else has.
        threshold = self.cfg.sim.solved_threshold
        for env, row in zip(envs, scores):
            best = int(np.argmax(row))
            if row[best] >= threshold:
                record = SolvedRecord(env.env_id, agents[best], state.iteration, float(row[best]))
                state.note_solved(record, overwrite=False)

    def reproduce_environments(self, state: EngineState) -> EngineState:
        engine = self.cfg.engine
        eligible = [
            p
            for p in state.pairs
            if p.current_best is not None and p.current_best >= engine.repro_threshold
        ]
        if not eligible:
            logger.debug("iter %d: no pair eligible to reproduce", state.iteration)
            return state

        rates = self.cfg.neat.mutation
        children = []
        for _ in range(engine.max_children):
            parent = eligible[int(state.env_rng.integers(len(eligible)))]
            children.append(
                reproduce_env(
                    parent.env,
                    state.env_reg,
                    state.env_rng,
                    state.env_ids,
                    rates,
                    self.cfg.terrain.drift,
                    state.iteration,
                )
            )

        champions = [p.champion for p in sorted(state.pairs, key=lambda p: p.env_id)]
        sources = sorted(state.pairs, key=lambda p: p.env_id)
        mc_scores = self.ctx.score_matrix(state, champions, children)
        passing = []
        for child, row in zip(children, mc_scores):
            best = float(np.max(row))
            if engine.mc_lo <= best <= engine.mc_hi:
                passing.append((child, row))
            else:
                logger.debug("env %d fails the minimal criterion (%.1f)", child.env_id, best)
        if not passing:
            return state

        agents = self.pata_ec_agents(state)
        if len(agents) >= 2:
            existing = [p.env for p in sorted(state.pairs, key=lambda p: p.env_id)]
            existing += [a.env for a in state.archive.pairs]
            existing_scores = self.ctx.score_matrix(state, agents, existing)
            self._note_solves(state, existing, agents, existing_scores)
            child_scores = self.ctx.score_matrix(state, agents, [c for c, _ in passing])
            others = [pata_ec_vector(r, engine.clip_lo, engine.clip_hi) for r in existing_scores]
            ranked = []
            for (child, _), raw in zip(passing, child_scores):
                v = pata_ec_vector(raw, engine.clip_lo, engine.clip_hi)
                ranked.append((novelty(v, others, engine.novelty_k), child.env_id))
            order = sorted(range(len(passing)), key=lambda i: (-ranked[i][0], ranked[i][1]))
        else:
            order = sorted(range(len(passing)), key=lambda i: passing[i][0].env_id)

        for i in order[: engine.max_admitted]:
            child, row = passing[i]
            best = int(np.argmax(row))
            pair = self.ctx.seed_pair(state, child, sources[best])
            state.pairs.append(pair)
            state.mc_passed.add(child.env_id)
            if row[best] >= self.cfg.sim.solved_threshold:
                state.note_solved(
                    SolvedRecord(child.env_id, champions[best], state.iteration, float(row[best])),
                    overwrite=False,
                )
            logger.info(
                "admitted env %d (parent %d) seeded from env %d",
                child.env_id,
                child.parent_id,
                sources[best].env_id,
            )

        while len(state.pairs) > engine.max_active:
            oldest = min(state.pairs, key=lambda p: (p.env.created_iteration, p.env_id))
            state.pairs.remove(oldest)
            state.archive.retire(oldest, state.iteration)
            logger.info("retired env %d to the archive", oldest.env_id)
        state.pairs.sort(key=lambda p: p.env_id)
        return state

    def run(
        self,
        state: EngineState,
        iterations: int,
        on_iteration: Optional[Callable[[EngineState], None]] = None,
    ) -> EngineState:
        for _ in range(iterations):
            self.step_iteration(state)
            if on_iteration is not None:
                on_iteration(state)
        return state
