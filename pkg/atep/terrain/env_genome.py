from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional

from atep.neat.genome import AgentGenome, GenomeSignature

# x_norm in, (height, gap) out; the bias node supplies the constant input.
CPPN_SIGNATURE = GenomeSignature(num_inputs=1, num_outputs=2)
HEIGHT_OUTPUT = 0
GAP_OUTPUT = 1


@dataclass(frozen=True)
class DifficultyScalars:
    roughness_scale: float = 1.0
    gap_threshold: float = -1.0
    height_amplitude: float = 0.0

    def __post_init__(self) -> None:
        if self.height_amplitude < 0:
            raise ValueError("height_amplitude must be >= 0")
        if not -1.0 <= self.gap_threshold <= 1.0:
            raise ValueError("gap_threshold must lie in [-1, 1]")
        if self.roughness_scale < 0:
            raise ValueError("roughness_scale must be >= 0")

    def to_dict(self) -> Dict[str, float]:
        return {
            "roughness_scale": self.roughness_scale,
            "gap_threshold": self.gap_threshold,
            "height_amplitude": self.height_amplitude,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DifficultyScalars":
        return cls(
            roughness_scale=float(data["roughness_scale"]),
            gap_threshold=float(data["gap_threshold"]),
            height_amplitude=float(data["height_amplitude"]),
        )


@dataclass(frozen=True)
class ScalarDrift:
    """Gaussian step applied to one difficulty scalar when an environment reproduces."""

    mean: float = 0.0
    stdev: float = 0.0


@dataclass(frozen=True)
class DriftConfig:
    height_amplitude: ScalarDrift = field(default_factory=lambda: ScalarDrift(0.05, 0.1))
    gap_threshold: ScalarDrift = field(default_factory=lambda: ScalarDrift(0.02, 0.05))
    roughness_scale: ScalarDrift = field(default_factory=lambda: ScalarDrift(0.0, 0.05))

    @classmethod
    def none(cls) -> "DriftConfig":
        return cls(ScalarDrift(), ScalarDrift(), ScalarDrift())


@dataclass(frozen=True)
class TerrainConfig:
    cells: int = 200
    cell_size_m: float = 0.5
    spawn_pad_cells: int = 10
    initial: DifficultyScalars = field(default_factory=DifficultyScalars)
    drift: DriftConfig = field(default_factory=DriftConfig)

    def __post_init__(self) -> None:
        if self.cells < 2 or self.cell_size_m <= 0:
            raise ValueError("terrain needs at least 2 cells of positive size")
        if not 0 <= self.spawn_pad_cells < self.cells:
            raise ValueError("spawn_pad_cells must lie in [0, cells)")

    @property
    def course_length_m(self) -> float:
        return self.cells * self.cell_size_m


@dataclass(frozen=True)
class EnvGenome:
    """One environment: a terrain CPPN plus its difficulty scalars."""

    env_id: int
    cppn: AgentGenome
    difficulty_scalars: DifficultyScalars
    parent_id: Optional[int] = None
    created_iteration: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "env_id": self.env_id,
            "parent_id": self.parent_id,
            "created_iteration": self.created_iteration,
            "difficulty_scalars": self.difficulty_scalars.to_dict(),
            "cppn": self.cppn.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EnvGenome":
        parent = data.get("parent_id")
        return cls(
            env_id=int(data["env_id"]),
            cppn=AgentGenome.from_dict(data["cppn"]),
            difficulty_scalars=DifficultyScalars.from_dict(data["difficulty_scalars"]),
            parent_id=None if parent is None else int(parent),
            created_iteration=int(data["created_iteration"]),
        )
