from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

from atep.neat.genome import Activation


@dataclass(frozen=True)
class CompatConfig:
    """Coefficients of the compatibility distance and the speciation threshold."""

    c1: float = 1.0
    c2: float = 1.0
    c3: float = 0.4
    delta_species: float = 3.0
    # N is clamped to 1 when both genomes have fewer genes than this.
    small_genome_floor: int = 20

    def __post_init__(self) -> None:
        if min(self.c1, self.c2, self.c3) < 0:
            raise ValueError("compatibility coefficients must be >= 0")
        if self.delta_species <= 0:
            raise ValueError("delta_species must be > 0")


@dataclass(frozen=True)
class MutationRates:
    weight_mutate_rate: float = 0.8
    weight_replace_rate: float = 0.1
    weight_perturb_stdev: float = 0.5
    weight_init_stdev: float = 1.0
    weight_max: float = 8.0
    bias_mutate_rate: float = 0.7
    bias_perturb_stdev: float = 0.5
    response_mutate_rate: float = 0.0
    response_perturb_stdev: float = 0.1
    activation_mutate_rate: float = 0.05
    activation_options: Tuple[Activation, ...] = tuple(Activation)
    hidden_activation: Activation = Activation.TANH
    add_connection_rate: float = 0.1
    add_node_rate: float = 0.05
    toggle_enable_rate: float = 0.01
    # False in fixed-topology mode: no add-node, add-connection or enable toggling.
    structural: bool = True

    def without_structure(self) -> "MutationRates":
        return replace(
            self,
            add_connection_rate=0.0,
            add_node_rate=0.0,
            toggle_enable_rate=0.0,
            structural=False,
        )

    @classmethod
    def zero(cls) -> "MutationRates":
        return cls(
            weight_mutate_rate=0.0,
            weight_replace_rate=0.0,
            bias_mutate_rate=0.0,
            response_mutate_rate=0.0,
            activation_mutate_rate=0.0,
            add_connection_rate=0.0,
            add_node_rate=0.0,
            toggle_enable_rate=0.0,
        )


@dataclass(frozen=True)
class ReproductionConfig:
    survival_fraction: float = 0.2
    stagnation_limit_gens: int = 15
    crossover_rate: float = 0.75
    redisable_probability: float = 0.75
    elitism: int = 1
    mutation: MutationRates = field(default_factory=MutationRates)


@dataclass(frozen=True)
class NeatConfig:
    pop_size: int = 32
    # Hidden layer widths of the fixed-topology baseline; None means augmenting topology.
    fixed_topology: Optional[Tuple[int, ...]] = None
    compat: CompatConfig = field(default_factory=CompatConfig)
    reproduction: ReproductionConfig = field(default_factory=ReproductionConfig)

    @property
    def mutation(self) -> MutationRates:
        return self.reproduction.mutation
