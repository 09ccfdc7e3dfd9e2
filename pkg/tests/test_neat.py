"""Tests for the NEAT core: distance, speciation, crossover, mutation and reproduction."""

from dataclasses import replace

import numpy as np
import pytest

from atep.core.errors import ContractError, EvaluationOrderError, MalformedGenomeError
from atep.neat.config import CompatConfig, MutationRates, NeatConfig, ReproductionConfig
from atep.neat.distance import distance
from atep.neat.genome import (
    Activation,
    AgentGenome,
    GenomeSignature,
    NodeKind,
    dumps_genome,
    loads_genome,
)
from atep.neat.innovation import IdCounter, InnovationRegistry, registry_copy
from atep.neat.population import initial_population, layered_genome, minimal_genome
from atep.neat.reproduction import allocate_quotas, crossover, mutate, reproduce, reproduce_species
from atep.neat.species import Species, adjusted_fitness, speciate

from builders import SMALL_SIGNATURE, make_genome

EXACT_N = CompatConfig(c1=1.0, c2=1.0, c3=0.4, delta_species=3.0, small_genome_floor=0)

# =============================================================================
# Helpers
# =============================================================================


def random_genome(rng: np.random.Generator, genome_id: int) -> AgentGenome:
    """Random innovation subset with random weights; only the genes matter for distance."""
    innovations = sorted(rng.choice(np.arange(1, 31), size=int(rng.integers(0, 16)), replace=False))
    genes = [(int(i), int(i), int(i) + 100, float(rng.normal())) for i in innovations]
    return make_genome(genes, genome_id=genome_id)


def brute_force_distance(a: AgentGenome, b: AgentGenome, cfg: CompatConfig):
    wa = {c.innovation: c.weight for c in a.connections}
    wb = {c.innovation: c.weight for c in b.connections}
    cut_a = max(wa, default=0)
    cut_b = max(wb, default=0)
    only = wa.keys() ^ wb.keys()
    excess = sum(1 for i in only if (i in wa and i > cut_b) or (i in wb and i > cut_a))
    disjoint = len(only) - excess
    matching = sorted(wa.keys() & wb.keys())
    w = sum(abs(wa[i] - wb[i]) for i in matching) / len(matching) if matching else 0.0
    n = max(len(wa), len(wb), 1)
    if len(wa) < cfg.small_genome_floor and len(wb) < cfg.small_genome_floor:
        n = 1
    return excess, disjoint, w, cfg.c1 * excess / n + cfg.c2 * disjoint / n + cfg.c3 * w


def evolved_pool(size: int, seed: int = 3):
    """Valid genomes that share one registry, grown by repeated structural mutation."""
    rng = np.random.default_rng(seed)
    reg = InnovationRegistry.for_signature(SMALL_SIGNATURE)
    rates = MutationRates(add_connection_rate=0.6, add_node_rate=0.4, toggle_enable_rate=0.1)
    pool = []
    for gid in range(size):
        g = minimal_genome(SMALL_SIGNATURE, reg, gid, rng)
        for _ in range(int(rng.integers(0, 8))):
            g = mutate(g, reg, rates, rng)
        pool.append(g)
    return pool, reg


# =============================================================================
# TestDistance
# =============================================================================


class TestDistance:
    """Compatibility distance and its breakdown."""

    def test_identical_genomes_have_zero_distance(self) -> None:
        g = make_genome([(1, 0, 3, 0.5), (2, 1, 3, -0.2)])
        d = distance(g, g, EXACT_N)
        assert (d.excess, d.disjoint, d.mean_weight_diff, d.delta) == (0, 0, 0.0, 0.0)

    def test_hand_aligned_genomes(self) -> None:
        """a = {1,2,3}, b = {1,2,4,5}: E=2, D=1, W=0.5, N=4 gives delta 0.95."""
        a = make_genome([(1, 0, 3, 0.0), (2, 1, 3, 0.0), (3, 2, 3, 0.3)])
        b = make_genome([(1, 0, 3, 0.5), (2, 1, 3, -0.5), (4, 0, 4, 1.0), (5, 4, 3, 1.0)])
        d = distance(a, b, EXACT_N)
        assert d.excess == 2
        assert d.disjoint == 1
        assert d.mean_weight_diff == pytest.approx(0.5)
        assert d.larger_size == 4
        assert d.delta == pytest.approx(0.95)

    def test_distance_is_symmetric(self) -> None:
        a = make_genome([(1, 0, 3, 0.0), (3, 2, 3, 0.3)])
        b = make_genome([(1, 0, 3, 1.0), (2, 1, 3, 0.0), (6, 1, 4, 0.1), (7, 4, 3, 0.2)])
        assert distance(a, b, EXACT_N).delta == distance(b, a, EXACT_N).delta

    def test_small_genomes_use_unit_normalizer(self) -> None:
        a = make_genome([(1, 0, 3, 0.0)])
        b = make_genome([(1, 0, 3, 0.0), (2, 1, 3, 0.0)])
        d = distance(a, b, CompatConfig())
        assert d.larger_size == 1
        assert d.delta == pytest.approx(1.0)

    def test_matches_brute_force_oracle(self) -> None:
        """1000 random pairs agree with a set-based alignment."""
        rng = np.random.default_rng(2024)
        for cfg in (EXACT_N, CompatConfig()):
            for i in range(500):
                a = random_genome(rng, 2 * i)
                b = random_genome(rng, 2 * i + 1)
                got = distance(a, b, cfg)
                excess, disjoint, w, delta = brute_force_distance(a, b, cfg)
                assert (got.excess, got.disjoint) == (excess, disjoint)
                assert got.mean_weight_diff == pytest.approx(w, rel=1e-12, abs=1e-15)
                assert got.delta == pytest.approx(delta, rel=1e-12, abs=1e-15)


# =============================================================================
# TestSpeciation
# =============================================================================


class TestSpeciation:
    """Partitioning a population into species."""

    def test_identical_population_forms_one_species(self) -> None:
        pop = [make_genome([(1, 0, 3, 0.5)], genome_id=i) for i in range(6)]
        species = speciate(pop, [], CompatConfig(), IdCounter())
        assert len(species) == 1
        assert len(species[0].members) == 6

    def test_two_weight_clusters_form_two_species(self) -> None:
        rng = np.random.default_rng(0)
        pop = []
        for i in range(10):
            base = 0.0 if i % 2 == 0 else 10.0
            pop.append(make_genome([(1, 0, 3, base + rng.normal(0, 0.1))], genome_id=i))
        species = speciate(pop, [], CompatConfig(), IdCounter())
        assert len(species) == 2
        assert sorted(len(sp.members) for sp in species) == [5, 5]

    def test_single_genome(self) -> None:
        species = speciate([make_genome([(1, 0, 3, 0.1)])], [], CompatConfig(), IdCounter())
        assert len(species) == 1
        assert len(species[0].members) == 1

    def test_empty_population_is_rejected(self) -> None:
        with pytest.raises(ContractError):
            speciate([], [], CompatConfig(), IdCounter())

    def test_membership_is_a_partition(self) -> None:
        pool, _ = evolved_pool(60)
        cfg = CompatConfig(delta_species=1.0)
        species = speciate(pool, [], cfg, IdCounter())
        ids = [m.genome_id for sp in species for m in sp.members]
        assert sorted(ids) == sorted(g.genome_id for g in pool)
        for sp in species:
            founder = sp.members[0]
            for member in sp.members:
                assert distance(member, founder, cfg).delta < cfg.delta_species

    def test_prior_species_keep_their_ids(self) -> None:
        pop = [make_genome([(1, 0, 3, 0.5)], genome_id=i) for i in range(3)]
        ids = IdCounter()
        first = speciate(pop, [], CompatConfig(), ids)
        second = speciate(pop, first, CompatConfig(), ids)
        assert [sp.species_id for sp in second] == [sp.species_id for sp in first]
        assert ids.next_id == 1


class TestAdjustedFitness:
    """Explicit fitness sharing."""

    @pytest.mark.parametrize(
        "fitnesses, expected",
        [([10.0], [10.0]), ([8.0] * 4, [2.0] * 4), ([3.0, 5.0], [1.5, 2.5])],
    )
    def test_division_by_species_size(self, fitnesses, expected) -> None:
        members = [make_genome([(1, 0, 3, 0.0)], f, i) for i, f in enumerate(fitnesses)]
        sp = Species(0, members[0], members)
        assert adjusted_fitness(sp) == pytest.approx(expected)

    def test_unevaluated_member_raises(self) -> None:
        g = make_genome([(1, 0, 3, 0.0)])
        with pytest.raises(EvaluationOrderError):
            adjusted_fitness(Species(0, g, [g]))


# =============================================================================
# TestCrossover
# =============================================================================


class TestCrossover:
    """Gene alignment rules of crossover."""

    def test_identical_parents(self, rng) -> None:
        g = make_genome([(1, 0, 3, 0.5), (2, 1, 3, -0.5)], fitness=1.0)
        child = crossover(g, g, rng)
        assert child.gene_set() == g.gene_set()
        assert [c.weight for c in child.connections] == [0.5, -0.5]

    def test_fitter_parent_contributes_exclusive_genes(self, rng) -> None:
        fit = make_genome([(1, 0, 3, 0.1), (2, 1, 3, 0.2), (7, 2, 3, 0.3)], fitness=5.0)
        weak = make_genome([(1, 0, 3, 0.4), (2, 1, 3, 0.5), (3, 0, 4, 0.6)], fitness=1.0, genome_id=1)
        child = crossover(weak, fit, rng)
        innovations = {c.innovation for c in child.connections}
        assert 7 in innovations
        assert 3 not in innovations

    def test_tied_parents_contribute_both(self, rng) -> None:
        a = make_genome([(1, 0, 3, 0.1), (3, 2, 3, 0.3), (5, 1, 3, 0.2)], fitness=2.0)
        b = make_genome([(1, 0, 3, 0.4), (4, 0, 4, 0.3), (5, 1, 3, 0.6)], fitness=2.0, genome_id=1)
        child = crossover(a, b, rng)
        innovations = {c.innovation for c in child.connections}
        assert {3, 4} <= innovations

    def test_unevaluated_parent_raises(self, rng) -> None:
        g = make_genome([(1, 0, 3, 0.5)])
        with pytest.raises(EvaluationOrderError):
            crossover(g, g.with_fitness(1.0), rng)

    def test_random_parent_properties(self) -> None:
        """Children only inherit parental genes, stay valid and follow the fitness rule."""
        pool, _ = evolved_pool(80, seed=11)
        rng = np.random.default_rng(5)
        for trial in range(1000):
            i, j = rng.choice(len(pool), size=2, replace=False)
            fa, fb = (float(x) for x in rng.integers(0, 4, size=2))
            a = pool[int(i)].with_fitness(fa)
            b = pool[int(j)].with_fitness(fb)
            child = crossover(a, b, rng, child_id=10_000 + trial)
            child.validate()

            inn_a = set(a.connection_map)
            inn_b = set(b.connection_map)
            inn_child = set(child.connection_map)
            assert inn_child <= inn_a | inn_b
            if fa > fb:
                assert inn_child == inn_a
            elif fb > fa:
                assert inn_child == inn_b
            else:
                assert inn_child == inn_a | inn_b


# =============================================================================
# TestMutation
# =============================================================================


class TestMutation:
    """Structural and parametric mutation."""

    def test_zero_rates_return_input(self, rng, frozen_rates) -> None:
        reg = InnovationRegistry.for_signature(SMALL_SIGNATURE)
        g = minimal_genome(SMALL_SIGNATURE, reg, 0, rng)
        assert mutate(g, reg, frozen_rates, rng) is g

    def test_add_node_splits_connection(self, rng, frozen_rates) -> None:
        signature = GenomeSignature(1, 1)
        reg = InnovationRegistry.for_signature(signature)
        inn = reg.connection_innovation(0, 2)
        g = make_genome([(inn, 0, 2, 0.7)], signature=signature)
        child = mutate(g, reg, replace(frozen_rates, add_node_rate=1.0), rng)

        hidden = [n.id for n in child.nodes if n.kind is NodeKind.HIDDEN]
        assert hidden == [signature.first_hidden_id]
        h = hidden[0]
        by_key = {c.key: c for c in child.connections}
        assert by_key[(0, 2)].enabled is False
        assert by_key[(0, h)].weight == 1.0
        assert by_key[(h, 2)].weight == 0.7
        child.validate()

    def test_same_split_in_two_genomes_shares_numbers(self, rng, frozen_rates) -> None:
        signature = GenomeSignature(1, 1)
        reg = InnovationRegistry.for_signature(signature)
        inn = reg.connection_innovation(0, 2)
        rates = replace(frozen_rates, add_node_rate=1.0)
        a = mutate(make_genome([(inn, 0, 2, 0.7)], signature=signature), reg, rates, rng)
        b = mutate(make_genome([(inn, 0, 2, -0.3)], genome_id=1, signature=signature), reg, rates, rng)
        assert a.gene_set() == b.gene_set()

    def test_same_connection_gets_same_innovation(self) -> None:
        reg = InnovationRegistry.for_signature(SMALL_SIGNATURE)
        first = reg.connection_innovation(0, 3)
        reg.connection_innovation(1, 3)
        assert reg.connection_innovation(0, 3) == first

    def test_add_connection_keeps_graph_acyclic(self) -> None:
        pool, _ = evolved_pool(50, seed=21)
        for g in pool:
            g.validate()

    def test_weights_stay_clipped(self, rng, frozen_rates) -> None:
        reg = InnovationRegistry.for_signature(SMALL_SIGNATURE)
        g = minimal_genome(SMALL_SIGNATURE, reg, 0, rng)
        rates = replace(frozen_rates, weight_mutate_rate=1.0, weight_perturb_stdev=100.0, weight_max=2.0)
        for _ in range(20):
            g = mutate(g, reg, rates, rng)
        assert all(abs(c.weight) <= 2.0 for c in g.connections)

    def test_without_structure_conserves_gene_set(self, rng) -> None:
        reg = InnovationRegistry.for_signature(SMALL_SIGNATURE)
        g = layered_genome(SMALL_SIGNATURE, reg, 0, (3, 2), rng)
        rates = MutationRates(add_connection_rate=1.0, add_node_rate=1.0).without_structure()
        mutated = g
        for _ in range(30):
            mutated = mutate(mutated, reg, rates, rng)
        assert mutated.gene_set() == g.gene_set()


# =============================================================================
# TestReproduction
# =============================================================================


class TestReproduction:
    """Offspring allocation, elitism and stagnation."""

    def test_quotas_follow_adjusted_totals(self) -> None:
        assert allocate_quotas([3.0, 1.0], 8) == [6, 2]

    def test_largest_remainder_rounding(self) -> None:
        assert allocate_quotas([1.0, 1.0, 1.0], 8) == [3, 3, 2]
        assert sum(allocate_quotas([0.3, 2.9, 0.1, 5.0], 17)) == 17

    def test_single_species_fills_population_and_keeps_champion(self, rng) -> None:
        reg = InnovationRegistry.for_signature(SMALL_SIGNATURE)
        ids = IdCounter(100)
        members = [
            minimal_genome(SMALL_SIGNATURE, reg, i, rng).with_fitness(float(i)) for i in range(10)
        ]
        champion = members[-1]
        offspring = reproduce([Species(0, members[0], members)], 10, ReproductionConfig(), reg, rng, ids)
        assert len(offspring) == 10
        assert champion in offspring

    def test_stagnant_species_without_champion_is_dropped(self, rng, frozen_rates) -> None:
        reg = InnovationRegistry.for_signature(SMALL_SIGNATURE)
        cfg = ReproductionConfig(crossover_rate=0.0, stagnation_limit_gens=15, mutation=frozen_rates)
        good = [make_genome([(1, 0, 3, 0.5)], 50.0, i) for i in range(4)]
        stale = [make_genome([(1, 0, 3, 9.0)], 5.0, 10 + i) for i in range(4)]
        species = [
            Species(0, good[0], good, [40.0]),
            Species(1, stale[0], stale, [10.0], stagnation_count=15),
        ]
        offspring = reproduce(species, 8, cfg, reg, rng, IdCounter(100))
        assert len(offspring) == 8
        assert all(c.connections[0].weight == 0.5 for c in offspring)

    def test_survivors_carry_advanced_stagnation(self, rng, frozen_rates) -> None:
        reg = InnovationRegistry.for_signature(SMALL_SIGNATURE)
        cfg = ReproductionConfig(crossover_rate=0.0, mutation=frozen_rates)
        rising = [make_genome([(1, 0, 3, 0.5)], 50.0, i) for i in range(4)]
        flat = [make_genome([(1, 0, 3, 9.0)], 5.0, 10 + i) for i in range(4)]
        species = [
            Species(0, rising[0], rising, [40.0]),
            Species(1, flat[0], flat, [5.0], stagnation_count=3),
        ]
        offspring, survivors = reproduce_species(species, 8, cfg, reg, rng, IdCounter(100))
        assert len(offspring) == 8
        assert [s.species_id for s in survivors] == [0, 1]
        assert survivors[0].best_fitness_history == [40.0, 50.0]
        assert survivors[0].stagnation_count == 0
        assert survivors[1].best_fitness_history == [5.0, 5.0]
        assert survivors[1].stagnation_count == 4
        # Inputs are left untouched.
        assert species[1].stagnation_count == 3

    def test_champion_species_always_gets_a_slot(self, rng, frozen_rates) -> None:
        reg = InnovationRegistry.for_signature(SMALL_SIGNATURE)
        cfg = ReproductionConfig(crossover_rate=0.0, mutation=frozen_rates)
        champion = make_genome([(1, 0, 3, 0.5)], 10.0, 0)
        crowd = [champion] + [make_genome([(1, 0, 3, 0.5)], 0.0, i) for i in range(1, 10)]
        b = make_genome([(1, 0, 3, 4.0)], 5.0, 20)
        c = make_genome([(1, 0, 3, 8.0)], 5.0, 21)
        species = [Species(0, champion, crowd), Species(1, b, [b]), Species(2, c, [c])]
        # Shared totals are 1, 5 and 5, so plain rounding hands both slots to 1 and 2.
        assert allocate_quotas([1.0, 5.0, 5.0], 2) == [0, 1, 1]
        offspring = reproduce(species, 2, cfg, reg, rng, IdCounter(100))
        assert len(offspring) == 2
        assert champion in offspring
        assert c in offspring

    def test_empty_species_list_is_rejected(self, rng) -> None:
        reg = InnovationRegistry.for_signature(SMALL_SIGNATURE)
        with pytest.raises(ContractError):
            reproduce([], 4, ReproductionConfig(), reg, rng, IdCounter())

    def test_offspring_ids_are_fresh(self, rng) -> None:
        reg = InnovationRegistry.for_signature(SMALL_SIGNATURE)
        members = [
            minimal_genome(SMALL_SIGNATURE, reg, i, rng).with_fitness(float(i)) for i in range(6)
        ]
        offspring = reproduce([Species(0, members[0], members)], 6, ReproductionConfig(), reg, rng, IdCounter(50))
        ids = [g.genome_id for g in offspring]
        assert len(set(ids)) == len(ids)


# =============================================================================
# TestPopulationAndRegistry
# =============================================================================


class TestPopulationAndRegistry:
    """Initial populations, genome records and cross-registry translation."""

    def test_initial_population_is_minimal(self, rng) -> None:
        reg = InnovationRegistry.for_signature(SMALL_SIGNATURE)
        pop = initial_population(SMALL_SIGNATURE, NeatConfig(pop_size=5), reg, rng, IdCounter())
        assert len(pop) == 5
        assert all(g.hidden_count == 0 for g in pop)
        assert all(len(g.connections) == 3 for g in pop)
        assert len({g.genome_id for g in pop}) == 5

    def test_fixed_topology_population_is_layered(self, rng) -> None:
        reg = InnovationRegistry.for_signature(SMALL_SIGNATURE)
        cfg = NeatConfig(pop_size=2, fixed_topology=(4, 4))
        pop = initial_population(SMALL_SIGNATURE, cfg, reg, rng, IdCounter())
        assert all(g.hidden_count == 8 for g in pop)
        # (2 inputs + bias) * 4 + (4 + bias) * 4 + (4 + bias) * 1
        assert all(len(g.connections) == 12 + 20 + 5 for g in pop)

    def test_genome_text_record_is_stable(self, rng) -> None:
        reg = InnovationRegistry.for_signature(SMALL_SIGNATURE)
        g = minimal_genome(SMALL_SIGNATURE, reg, 3, rng).with_fitness(1.5)
        text = dumps_genome(g)
        assert dumps_genome(loads_genome(text)) == text

    def test_validate_rejects_cycles(self) -> None:
        g = make_genome([(1, 0, 4, 1.0), (2, 4, 5, 1.0), (3, 5, 4, 1.0), (4, 5, 3, 1.0)])
        with pytest.raises(MalformedGenomeError):
            g.validate()

    def test_translation_between_registries_preserves_structure(self, rng) -> None:
        source = InnovationRegistry.for_signature(SMALL_SIGNATURE)
        target = registry_copy(source)
        # Divergent histories: the target numbers a different split first.
        target.split_node(1, 3, taken=())
        g = minimal_genome(SMALL_SIGNATURE, source, 0, rng)
        g = mutate(g, source, replace(MutationRates.zero(), add_node_rate=1.0), rng)
        moved = target.translate(g, source)
        moved.validate()
        assert moved.hidden_count == g.hidden_count
        assert sorted(c.weight for c in moved.connections) == sorted(c.weight for c in g.connections)
        again = target.translate(g, source)
        assert again.gene_set() == moved.gene_set()

    def test_registry_record_round_trip(self, rng) -> None:
        reg = InnovationRegistry.for_signature(SMALL_SIGNATURE)
        g = minimal_genome(SMALL_SIGNATURE, reg, 0, rng)
        mutate(g, reg, replace(MutationRates.zero(), add_node_rate=1.0), rng)
        restored = InnovationRegistry.from_dict(reg.to_dict())
        assert restored.to_dict() == reg.to_dict()
        assert restored.node_origin == reg.node_origin


def test_hidden_activation_option_is_used(rng) -> None:
    signature = GenomeSignature(1, 1)
    reg = InnovationRegistry.for_signature(signature)
    inn = reg.connection_innovation(0, 2)
    rates = replace(MutationRates.zero(), add_node_rate=1.0, hidden_activation=Activation.IDENTITY)
    child = mutate(make_genome([(inn, 0, 2, 0.7)], signature=signature), reg, rates, rng)
    assert [n.activation for n in child.nodes if n.kind is NodeKind.HIDDEN] == [Activation.IDENTITY]
