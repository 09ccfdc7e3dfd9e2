import logging
from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np

from atep.neat.config import MutationRates
from atep.neat.innovation import IdCounter, InnovationRegistry
from atep.neat.population import minimal_genome
from atep.neat.reproduction import mutate
from atep.phenotype.network import activate, compile_genome
from atep.terrain.env_genome import (
    CPPN_SIGNATURE,
    GAP_OUTPUT,
    HEIGHT_OUTPUT,
    DifficultyScalars,
    DriftConfig,
    EnvGenome,
    ScalarDrift,
    TerrainConfig,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Terrain:
    """Discretized course. Cell ``i`` covers ``[i*cell_size_m, (i+1)*cell_size_m)``."""

    heights: np.ndarray
    gap_mask: np.ndarray
    cell_size_m: float
    spawn_pad_cells: int

    @property
    def cells(self) -> int:
        return int(self.heights.shape[0])

    @property
    def course_length(self) -> float:
        return self.cells * self.cell_size_m

    def cell_at(self, x: float) -> int:
        return int(min(max(int(np.floor(x / self.cell_size_m)), 0), self.cells - 1))

    def same_as(self, other: "Terrain") -> bool:
        return (
            self.heights.tobytes() == other.heights.tobytes()
            and self.gap_mask.tobytes() == other.gap_mask.tobytes()
            and self.cell_size_m == other.cell_size_m
            and self.spawn_pad_cells == other.spawn_pad_cells
        )


def synthesize(env: EnvGenome, cfg: TerrainConfig) -> Terrain:
    """Evaluate the environment's CPPN along the course.

    The spawn pad is levelled to the first course cell and never holds gaps.
    """
    net = compile_genome(env.cppn)
    scalars = env.difficulty_scalars
    xs = np.linspace(0.0, 1.0, cfg.cells)
    outputs = np.array([activate(net, [x]) for x in xs])
    heights = scalars.height_amplitude * outputs[:, HEIGHT_OUTPUT] * scalars.roughness_scale
    gaps = outputs[:, GAP_OUTPUT] < scalars.gap_threshold

    pad = cfg.spawn_pad_cells
    if pad:
        heights[:pad] = heights[pad]
        gaps[:pad] = False
    heights.flags.writeable = False
    gaps.flags.writeable = False
    return Terrain(heights, gaps, cfg.cell_size_m, pad)


def root_env(env_ids: IdCounter, reg: InnovationRegistry, cfg: TerrainConfig) -> EnvGenome:
    """Starting environment: zero-weight CPPN (flat, gap-free) with the configured scalars."""
    cppn = minimal_genome(CPPN_SIGNATURE, reg, genome_id=0)
    return EnvGenome(env_ids.take(), cppn, cfg.initial, parent_id=None, created_iteration=0)


def _step(value: float, drift: ScalarDrift, rng: np.random.Generator) -> float:
    if drift.stdev == 0:
        return value + drift.mean
    return value + float(rng.normal(drift.mean, drift.stdev))


def perturb_scalars(
    scalars: DifficultyScalars, drift: DriftConfig, rng: np.random.Generator
) -> DifficultyScalars:
    return DifficultyScalars(
        roughness_scale=max(0.0, _step(scalars.roughness_scale, drift.roughness_scale, rng)),
        gap_threshold=float(np.clip(_step(scalars.gap_threshold, drift.gap_threshold, rng), -1, 1)),
        height_amplitude=max(0.0, _step(scalars.height_amplitude, drift.height_amplitude, rng)),
    )


def reproduce_env(
    parent: EnvGenome,
    reg: InnovationRegistry,
    rng: np.random.Generator,
    env_ids: IdCounter,
    rates: MutationRates,
    drift: DriftConfig,
    iteration: int,
) -> EnvGenome:
    """Mutated child of ``parent``; the parent itself is left untouched."""
    child_id = env_ids.take()
    cppn = mutate(parent.cppn.with_id(child_id), reg, rates, rng)
    child = EnvGenome(
        env_id=child_id,
        cppn=cppn.with_fitness(None),
        difficulty_scalars=perturb_scalars(parent.difficulty_scalars, drift, rng),
        parent_id=parent.env_id,
        created_iteration=iteration,
    )
    logger.debug(
        "env %d -> child %d scalars %s", parent.env_id, child_id, child.difficulty_scalars
    )
    return child


def terrain_table(terrain: Terrain) -> Iterator[Tuple[float, float, int]]:
    """Rows of (x at cell start, height, gap flag) for plotting."""
    for i in range(terrain.cells):
        yield (i * terrain.cell_size_m, float(terrain.heights[i]), int(terrain.gap_mask[i]))
