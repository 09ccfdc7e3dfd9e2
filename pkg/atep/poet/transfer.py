import logging
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple

from atep.neat.config import CompatConfig
from atep.neat.distance import distance
from atep.neat.genome import AgentGenome
from atep.neat.innovation import IdCounter, registry_copy
from atep.neat.species import Species
from atep.poet.config import SbtReplace, TransferKind, TransferPolicy
from atep.poet.context import EvaluationContext
from atep.poet.pair import EAPair, SolvedRecord, TransferEvent
from atep.poet.state import EngineState

logger = logging.getLogger(__name__)


def beats_history(score: float, history: Sequence[float]) -> bool:
    """True if ``score`` is strictly above every recorded best (an empty history passes)."""
    return all(score > h for h in history)


def snapshot(pair: EAPair) -> EAPair:
    return replace(pair, population=list(pair.population), species=list(pair.species))


def _note_champion(state: EngineState, ctx: EvaluationContext, pair: EAPair) -> None:
    champion = pair.champion
    score = champion.require_fitness()
    if score >= ctx.cfg.sim.solved_threshold:
        state.note_solved(SolvedRecord(pair.env_id, champion, state.iteration, score))


def fbt_check_and_transfer(
    state: EngineState,
    ctx: EvaluationContext,
    candidate: EAPair,
    target: EAPair,
    policy: TransferPolicy,
) -> Optional[List[AgentGenome]]:
    """Two-stage fitness check; returns the fine-tuned population in the target's namespace.

    Stage 1 scores the candidate champion on the target environment. Stage 2 fine-tunes a
    copy of the whole candidate population there. Both must beat every entry of the
    target's recent best-fitness history.
    """
    history = list(target.best_fitness_history)
    stage1 = ctx.evaluate(state, [candidate.champion], target.env)[0].require_fitness()
    if not beats_history(stage1, history):
        logger.debug(
            "FBT %d -> %d rejected at stage 1 (%.2f vs %s)",
            candidate.env_id,
            target.env_id,
            stage1,
            history,
        )
        return None

    scratch_reg = registry_copy(candidate.reg)
    scratch = EAPair(
        env=target.env,
        population=ctx.import_genomes(state, candidate.population, candidate.reg, scratch_reg),
        reg=scratch_reg,
        rng=target.rng,
        species_ids=IdCounter(),
    )
    ctx.generation(state, [scratch], record=False)
    for _ in range(policy.finetune_generations):
        ctx.generation(state, [scratch], record=False)
    stage2 = scratch.champion.require_fitness()
    if not beats_history(stage2, history):
        logger.debug(
            "FBT %d -> %d rejected at stage 2 (%.2f vs %s)",
            candidate.env_id,
            target.env_id,
            stage2,
            history,
        )
        return None
    return [target.reg.translate(g, scratch_reg) for g in scratch.population]


def _replaced_species(
    target: EAPair, best_candidate: AgentGenome, cfg: CompatConfig, mode: SbtReplace
) -> Species:
    if mode is SbtReplace.NEAREST:
        return min(
            target.species,
            key=lambda sp: (distance(best_candidate, sp.representative, cfg).delta, sp.species_id),
        )
    return target.species_of(target.champion)


def sbt_check_and_transfer(
    state: EngineState,
    ctx: EvaluationContext,
    candidate: EAPair,
    target: EAPair,
    cfg: CompatConfig,
    policy: TransferPolicy,
) -> Optional[Tuple[int, Species]]:
    """Species-level transfer gated on the distance between the two best genomes.

    Returns ``(replaced_species_id, injected_species)`` with the injected members already
    translated and evaluated on the target environment.
    """
    best_candidate = candidate.champion
    # Compare in the target's numbering without touching its registry.
    translated = registry_copy(target.reg).translate(best_candidate, candidate.reg)
    delta = distance(translated, target.champion, cfg).delta
    if delta >= policy.delta_transfer:
        logger.debug("SBT %d -> %d rejected (delta %.3f)", candidate.env_id, target.env_id, delta)
        return None

    source_species = candidate.species_of(best_candidate)
    replaced = _replaced_species(target, translated, cfg, policy.sbt_replace)
    members = ctx.import_genomes(state, source_species.members, candidate.reg, target.reg)
    members = ctx.evaluate(state, members, target.env)
    ids = [m.genome_id for m in source_species.members]
    rep_id = source_species.representative.genome_id
    rep_index = ids.index(rep_id) if rep_id in ids else 0
    injected = Species(
        species_id=target.species_ids.take(),
        representative=members[rep_index],
        members=members,
    )
    return replaced.species_id, injected


def apply_species_injection(target: EAPair, replaced_id: int, injected: Species) -> None:
    removed = {m.genome_id for sp in target.species if sp.species_id == replaced_id for m in sp.members}
    target.species = sorted(
        [sp for sp in target.species if sp.species_id != replaced_id] + [injected],
        key=lambda sp: sp.species_id,
    )
    target.population = [g for g in target.population if g.genome_id not in removed] + list(
        injected.members
    )


def rt_transfer(
    state: EngineState, ctx: EvaluationContext, candidate: EAPair, target: EAPair
) -> List[AgentGenome]:
    """Unconditional copy of the candidate population, evaluated on the target environment."""
    population = ctx.import_genomes(state, candidate.population, candidate.reg, target.reg)
    return ctx.evaluate(state, population, target.env)


def attempt_transfers(
    state: EngineState, ctx: EvaluationContext, policy: TransferPolicy
) -> List[TransferEvent]:
    """Run one transfer cycle over every ordered (candidate, target) pair.

    Candidates are read from a snapshot taken at the start of the cycle. Pairs are visited
    by candidate env_id then target env_id and each target accepts at most one transfer.
    """
    if policy.kind is TransferKind.NT or len(state.pairs) < 2:
        return []

    sources = {p.env_id: snapshot(p) for p in state.pairs}
    order = sorted(sources)
    replaced = set()
    events: List[TransferEvent] = []
    for c in order:
        for t in order:
            if c == t:
                continue
            # RT draws for every ordered pair so the stream does not depend on outcomes.
            fire = policy.kind is TransferKind.RT and state.transfer_rng.random() < policy.rt_probability
            if t in replaced:
                continue
            candidate = sources[c]
            target = state.pair_by_env(t)

            if policy.kind is TransferKind.RT:
                if not fire:
                    continue
                ctx.respeciate(target, rt_transfer(state, ctx, candidate, target), fresh=True)
            elif policy.kind is TransferKind.FBT:
                population = fbt_check_and_transfer(state, ctx, candidate, target, policy)
                if population is None:
                    continue
                ctx.respeciate(target, population, fresh=True)
            elif policy.kind is TransferKind.SBT:
                result = sbt_check_and_transfer(
                    state, ctx, candidate, target, ctx.cfg.neat.compat, policy
                )
                if result is None:
                    continue
                apply_species_injection(target, *result)

            _note_champion(state, ctx, target)
            event = TransferEvent(state.iteration, policy.kind, c, t)
            events.append(event)
            replaced.add(t)
            logger.info("transfer %s: env %d -> env %d", policy.kind.value.upper(), c, t)
    state.transfers.extend(events)
    return events
