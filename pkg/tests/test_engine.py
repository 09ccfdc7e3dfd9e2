"""Tests for the outer loop: iterations, environment reproduction, admission and retirement."""

from dataclasses import replace

import numpy as np
import pytest

from atep.core.errors import ContractError
from atep.core.run_config import load_run_config
from atep.metrics.annecs import update_annecs
from atep.neat.config import MutationRates, NeatConfig, ReproductionConfig
from atep.neat.population import initial_population
from atep.poet.config import EngineConfig, ScheduleConfig, TransferKind, TransferPolicy
from atep.poet.engine import PoetEngine
from atep.sim.walker import RolloutCounter
from atep.terrain.env_genome import DriftConfig, TerrainConfig

from builders import add_pair, drive_population, empty_state, policy_genome, small_poet_config

NEVER = ScheduleConfig(n_reproduce_iters=None, n_transfer_iters=None)


def frozen_world(**engine):
    """Config whose environment children reproduce their parent exactly."""
    return small_poet_config(
        neat=NeatConfig(pop_size=8, reproduction=ReproductionConfig(mutation=MutationRates.zero())),
        terrain=TerrainConfig(cells=40, spawn_pad_cells=4, drift=DriftConfig.none()),
        engine=EngineConfig(**{"max_active": 3, "max_children": 3, "max_admitted": 2, **engine}),
    )


def solved_state(engine: PoetEngine):
    """One pair of constant-drive walkers that already solves its flat course."""
    state = empty_state(engine.cfg)
    add_pair(state, engine.ctx, drive_population(engine.cfg.sim, 8), history=[319.0])
    return state


# =============================================================================
# TestIterations
# =============================================================================


class TestIterations:
    def test_initialize_evaluates_one_population(self, poet_cfg) -> None:
        counter = RolloutCounter()
        state = PoetEngine(poet_cfg, counter=counter).initialize()
        assert state.iteration == 0
        assert [p.env_id for p in state.pairs] == [0]
        pair = state.pairs[0]
        assert len(pair.population) == poet_cfg.neat.pop_size
        assert all(g.fitness is not None for g in pair.population)
        assert len(pair.best_fitness_history) == 1
        assert state.function_evals == poet_cfg.neat.pop_size == counter.count
        assert len(state.ledger) == 0

    def test_step_appends_one_ledger_row(self, poet_cfg) -> None:
        engine = PoetEngine(poet_cfg, counter=RolloutCounter())
        state = engine.initialize()
        engine.step_iteration(state)
        assert state.iteration == 1
        assert len(state.ledger) == 1
        row = state.ledger.last
        assert row.iteration == 1
        assert row.active_pair_count == 1
        assert row.cumulative_function_evals == state.function_evals == 2 * poet_cfg.neat.pop_size
        assert row.mean_best_fitness == pytest.approx(state.pairs[0].champion.fitness)

    def test_disabled_schedules_keep_a_single_pair(self, poet_cfg) -> None:
        cfg = replace(poet_cfg, schedule=NEVER)
        engine = PoetEngine(cfg, counter=RolloutCounter())
        state = engine.run(engine.initialize(), 6)
        assert len(state.pairs) == 1
        assert state.total_envs_created == 1
        assert state.transfers == []
        assert [r.iteration for r in state.ledger] == list(range(1, 7))

    def test_rollout_count_matches_counter(self, poet_cfg) -> None:
        counter = RolloutCounter()
        engine = PoetEngine(poet_cfg, counter=counter)
        state = engine.run(engine.initialize(), 4)
        assert state.function_evals == counter.count
        evals = [r.cumulative_function_evals for r in state.ledger]
        assert evals == sorted(evals)

    def test_same_seed_same_run(self, poet_cfg) -> None:
        runs = []
        for _ in range(2):
            engine = PoetEngine(poet_cfg, counter=RolloutCounter())
            state = engine.run(engine.initialize(), 4)
            runs.append((state.to_dict(), state.ledger.to_csv()))
        assert runs[0] == runs[1]

    def test_callback_sees_every_iteration(self, poet_cfg) -> None:
        engine = PoetEngine(replace(poet_cfg, schedule=NEVER), counter=RolloutCounter())
        seen = []
        engine.run(engine.initialize(), 3, lambda s: seen.append(s.iteration))
        assert seen == [1, 2, 3]

    def test_empty_state_cannot_step(self, poet_cfg) -> None:
        with pytest.raises(ContractError):
            PoetEngine(poet_cfg).step_iteration(empty_state(poet_cfg))

    def test_fixed_topology_conserves_gene_sets(self, poet_cfg) -> None:
        cfg = replace(
            poet_cfg,
            neat=NeatConfig(pop_size=6, fixed_topology=(3,)),
            schedule=NEVER,
        )
        engine = PoetEngine(cfg, counter=RolloutCounter())
        state = engine.initialize()
        reference = state.pairs[0].population[0].gene_set()
        engine.run(state, 3)
        assert {g.gene_set() for g in state.pairs[0].population} == {reference}
        assert state.ledger.last.mean_nodes == 3.0


# =============================================================================
# TestEnvironmentReproduction
# =============================================================================


class TestEnvironmentReproduction:
    """Minimal criterion, novelty-ranked admission, seeding and retirement."""

    def test_no_eligible_parent_means_no_children(self, poet_cfg) -> None:
        engine = PoetEngine(poet_cfg, counter=RolloutCounter())
        state = empty_state(poet_cfg)
        add_pair(state, engine.ctx, drive_population(poet_cfg.sim, 4, drive=0.0), history=[0.0])
        rng_before = state.env_rng.bit_generator.state
        engine.reproduce_environments(state)
        assert state.total_envs_created == 1
        assert len(state.pairs) == 1
        assert state.env_rng.bit_generator.state == rng_before

    def test_too_easy_children_fail_the_minimal_criterion(self) -> None:
        engine = PoetEngine(frozen_world(mc_hi=300.0), counter=RolloutCounter())
        state = solved_state(engine)
        engine.reproduce_environments(state)
        assert len(state.pairs) == 1
        assert state.total_envs_created == 1 + 3
        assert state.mc_passed == set()

    def test_children_within_the_band_are_admitted(self) -> None:
        engine = PoetEngine(frozen_world(mc_hi=320.0), counter=RolloutCounter())
        state = solved_state(engine)
        engine.reproduce_environments(state)
        assert [p.env_id for p in state.pairs] == [0, 1, 2]
        assert state.mc_passed == {1, 2}
        assert {1, 2} <= set(state.solved)
        for pair in state.pairs[1:]:
            assert pair.env.parent_id == 0
            assert len(pair.population) == engine.cfg.neat.pop_size
            assert pair.best_fitness_history
        update_annecs(state.archive.annecs_counted, state.mc_passed, state.solved)
        assert state.annecs == 2

    def test_admission_is_capped(self) -> None:
        engine = PoetEngine(frozen_world(mc_hi=320.0, max_admitted=1), counter=RolloutCounter())
        state = solved_state(engine)
        engine.reproduce_environments(state)
        assert [p.env_id for p in state.pairs] == [0, 1]

    def test_oldest_pairs_retire_first(self) -> None:
        engine = PoetEngine(frozen_world(mc_hi=320.0, max_active=1), counter=RolloutCounter())
        state = solved_state(engine)
        engine.reproduce_environments(state)
        assert [p.env_id for p in state.pairs] == [2]
        assert [a.env.env_id for a in state.archive.pairs] == [0, 1]
        assert all(a.retired_iteration == state.iteration for a in state.archive.pairs)

    def test_novelty_ranking_with_several_champions(self) -> None:
        engine = PoetEngine(frozen_world(mc_hi=320.0, max_admitted=1), counter=RolloutCounter())
        state = solved_state(engine)
        add_pair(state, engine.ctx, drive_population(engine.cfg.sim, 8, drive=0.0), history=[0.0])
        evals = state.function_evals
        engine.reproduce_environments(state)
        assert len(state.pairs) == 3
        # 3 children x 2 champions, 2 existing x 2, 3 passing x 2, then one seeded generation.
        assert state.function_evals == evals + 6 + 4 + 6 + engine.cfg.neat.pop_size

    def test_pata_ec_of_an_environment(self) -> None:
        engine = PoetEngine(frozen_world(), counter=RolloutCounter())
        state = solved_state(engine)
        add_pair(state, engine.ctx, drive_population(engine.cfg.sim, 4, drive=0.0))
        agents = engine.pata_ec_agents(state)
        v = engine.compute_pata_ec(state, state.pairs[0].env, agents)
        np.testing.assert_allclose(v, [0.5, -0.5])


# =============================================================================
# TestSpeciesStagnation
# =============================================================================


def two_species(sim):
    """Four plain walkers, then four whose jump weight only moves them away in distance."""

    def build(reg, ids):
        plain = [policy_genome(sim, reg, ids.take(), drive=20.0) for _ in range(4)]
        # tanh(-200) never crosses the jump threshold, so both halves walk identically.
        far = [policy_genome(sim, reg, ids.take(), drive=20.0, jump=-200.0) for _ in range(4)]
        return plain + far

    return build


class TestSpeciesStagnation:
    def test_stagnant_species_is_removed_after_the_limit(self) -> None:
        cfg = small_poet_config(
            neat=NeatConfig(
                pop_size=8,
                reproduction=ReproductionConfig(stagnation_limit_gens=2, mutation=MutationRates.zero()),
            ),
            schedule=NEVER,
        )
        engine = PoetEngine(cfg, counter=RolloutCounter())
        state = empty_state(cfg)
        pair = add_pair(state, engine.ctx, two_species(cfg.sim))
        assert len(pair.species) == 2

        engine.run(state, 3)
        assert [s.stagnation_count for s in pair.species] == [2, 2]
        assert all(len(s.best_fitness_history) == 3 for s in pair.species)

        engine.step_iteration(state)
        # The champion's species is protected; the other one is past the limit.
        assert len(pair.species) == 1
        assert pair.champion in pair.species[0].members
        assert all(c.weight >= 0.0 for g in pair.population for c in g.connections)
        assert len(pair.population) == cfg.neat.pop_size


# =============================================================================
# TestNoTransfer
# =============================================================================


def seeded_population(cfg, env_id: int):
    def build(reg, ids):
        rng = np.random.default_rng([cfg.seed, 9, env_id])
        return initial_population(cfg.sim.agent_signature, cfg.neat, reg, rng, ids)

    return build


def pair_trajectories(cfg, env_ids, iterations: int = 5):
    """Champion fitness per iteration and final populations, keyed by env_id."""
    engine = PoetEngine(cfg, counter=RolloutCounter())
    state = empty_state(cfg)
    for env_id in range(max(env_ids) + 1):
        if env_id in env_ids:
            add_pair(state, engine.ctx, seeded_population(cfg, env_id))
        else:
            state.env_ids.take()
    series = {env_id: [] for env_id in env_ids}

    def on_iteration(s) -> None:
        for p in s.pairs:
            series[p.env_id].append(p.champion.fitness)

    engine.run(state, iterations, on_iteration)
    final = {p.env_id: [(g.nodes, g.connections, g.fitness) for g in p.population] for p in state.pairs}
    return series, final


class TestNoTransfer:
    def test_pairs_evolve_as_if_alone(self) -> None:
        cfg = small_poet_config(
            transfer=TransferPolicy(kind=TransferKind.NT),
            schedule=ScheduleConfig(n_reproduce_iters=None, n_transfer_iters=1),
        )
        series, final = pair_trajectories(cfg, (0, 1))
        assert all(len(s) == 5 for s in series.values())
        for env_id in (0, 1):
            solo_series, solo_final = pair_trajectories(cfg, (env_id,))
            assert series[env_id] == solo_series[env_id]
            assert final[env_id] == solo_final[env_id]


# =============================================================================
# Long runs
# =============================================================================


@pytest.mark.slow
@pytest.mark.parametrize("kind", list(TransferKind))
def test_desk_preset_runs(kind) -> None:
    overrides = {
        "transfer.kind": kind.value,
        "run.iterations": 12,
        "schedule.n_reproduce_iters": 4,
        "schedule.n_transfer_iters": 3,
    }
    rc, _ = load_run_config(preset="desk", overrides=overrides)
    counter = RolloutCounter()
    engine = PoetEngine(rc.poet, counter=counter)
    state = engine.run(engine.initialize(), rc.run.iterations)
    annecs = [r.annecs for r in state.ledger]
    assert annecs == sorted(annecs)
    assert state.function_evals == counter.count
    assert len(state.pairs) <= rc.poet.engine.max_active


@pytest.mark.slow
def test_desk_preset_creates_and_solves_new_environments(record_property) -> None:
    rc, _ = load_run_config(preset="desk")
    engine = PoetEngine(rc.poet, counter=RolloutCounter())
    state = engine.run(engine.initialize(), rc.run.iterations)
    annecs = [r.annecs for r in state.ledger]
    record_property("annecs", state.annecs)
    assert len(annecs) == 300
    assert annecs == sorted(annecs)
    assert state.annecs >= 1


FIXED_TOPOLOGY_BASELINE = {
    "transfer.kind": "fbt",
    "neat.fixed_topology": [20, 20],
    "neat.mutation.add_connection_rate": 0.0,
    "neat.mutation.add_node_rate": 0.0,
    "neat.mutation.toggle_enable_rate": 0.0,
    "neat.mutation.activation_mutate_rate": 0.0,
}


@pytest.mark.slow
def test_fixed_topology_baseline_at_desk_scale(record_property) -> None:
    rc, _ = load_run_config(preset="desk", overrides=FIXED_TOPOLOGY_BASELINE)
    engine = PoetEngine(rc.poet, counter=RolloutCounter())
    state = engine.run(engine.initialize(), rc.run.iterations)
    annecs = [r.annecs for r in state.ledger]
    record_property("annecs", state.annecs)
    assert annecs == sorted(annecs)
    assert all(r.mean_nodes == 40.0 for r in state.ledger)


def test_transfer_policy_default_is_species_based() -> None:
    assert TransferPolicy().kind is TransferKind.SBT
