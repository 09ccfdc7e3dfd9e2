from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from atep.neat.config import NeatConfig
from atep.sim.walker import SimConfig
from atep.terrain.env_genome import TerrainConfig


class TransferKind(str, Enum):
    FBT = "fbt"
    SBT = "sbt"
    RT = "rt"
    NT = "nt"


class SbtReplace(str, Enum):
    # species holding the target's best genome
    TARGET_BEST = "target_best"
    # target species whose representative is closest to the candidate's best genome
    NEAREST = "nearest"


@dataclass(frozen=True)
class TransferPolicy:
    kind: TransferKind = TransferKind.SBT
    delta_transfer: float = 3.0
    finetune_generations: int = 2
    rt_probability: float = 0.1
    sbt_replace: SbtReplace = SbtReplace.TARGET_BEST

    def __post_init__(self) -> None:
        if self.delta_transfer <= 0:
            raise ValueError("delta_transfer must be > 0")
        if self.finetune_generations < 0:
            raise ValueError("finetune_generations must be >= 0")
        if not 0.0 <= self.rt_probability <= 1.0:
            raise ValueError("rt_probability must lie in [0, 1]")


@dataclass(frozen=True)
class ScheduleConfig:
    """Iteration periods; None disables the step entirely."""

    n_reproduce_iters: Optional[int] = 25
    n_transfer_iters: Optional[int] = 10

    @staticmethod
    def due(period: Optional[int], iteration: int) -> bool:
        return period is not None and iteration > 0 and iteration % period == 0

    def reproduce_due(self, iteration: int) -> bool:
        return self.due(self.n_reproduce_iters, iteration)

    def transfer_due(self, iteration: int) -> bool:
        return self.due(self.n_transfer_iters, iteration)


@dataclass(frozen=True)
class EngineConfig:
    max_active: int = 20
    repro_threshold: float = 200.0
    mc_lo: float = 50.0
    mc_hi: float = 300.0
    max_children: int = 8
    max_admitted: int = 2
    clip_lo: float = -100.0
    clip_hi: float = 300.0
    novelty_k: int = 5
    history_length: int = 5

    def __post_init__(self) -> None:
        if self.mc_lo > self.mc_hi:
            raise ValueError("mc_lo must not exceed mc_hi")
        if self.clip_lo >= self.clip_hi:
            raise ValueError("clip_lo must be below clip_hi")
        if min(self.max_active, self.history_length, self.novelty_k) < 1:
            raise ValueError("max_active, history_length and novelty_k must be >= 1")


@dataclass(frozen=True)
class PoetConfig:
    """Everything the engine needs to evolve a run, minus where the run is stored."""

    seed: int = 0
    neat: NeatConfig = field(default_factory=NeatConfig)
    terrain: TerrainConfig = field(default_factory=TerrainConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    transfer: TransferPolicy = field(default_factory=TransferPolicy)
