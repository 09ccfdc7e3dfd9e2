from atep.terrain.env_genome import (
    CPPN_SIGNATURE,
    DifficultyScalars,
    DriftConfig,
    EnvGenome,
    ScalarDrift,
    TerrainConfig,
)
from atep.terrain.synthesis import Terrain, reproduce_env, root_env, synthesize, terrain_table

__all__ = [
    "CPPN_SIGNATURE",
    "DifficultyScalars",
    "DriftConfig",
    "EnvGenome",
    "ScalarDrift",
    "Terrain",
    "TerrainConfig",
    "reproduce_env",
    "root_env",
    "synthesize",
    "terrain_table",
]
