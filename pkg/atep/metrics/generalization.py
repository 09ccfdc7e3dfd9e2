import csv
import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from atep.core.errors import ContractError, GeneralizationShortfallError
from atep.core.worker_pool import SERIAL, EvaluationPool
from atep.neat.genome import AgentGenome
from atep.sim.walker import RolloutJob, SimConfig, run_rollouts
from atep.terrain.env_genome import EnvGenome, TerrainConfig
from atep.terrain.synthesis import synthesize

logger = logging.getLogger(__name__)

HIGH_THRESHOLD = 300.0
SOLVED_THRESHOLD = 200.0


class Bucket(str, Enum):
    ABOVE_300 = "above_300"
    BETWEEN_200_300 = "between_200_300"
    BELOW_200 = "below_200"


def bucket_for(mean_score: float) -> Bucket:
    if mean_score > HIGH_THRESHOLD:
        return Bucket.ABOVE_300
    if mean_score >= SOLVED_THRESHOLD:
        return Bucket.BETWEEN_200_300
    return Bucket.BELOW_200


@dataclass(frozen=True)
class SolvedEnvironment:
    env: EnvGenome
    agent: AgentGenome
    solved_iteration: int


@dataclass
class MethodRun:
    """Solved environments of one completed run, with the terrain settings it used."""

    name: str
    solved: List[SolvedEnvironment]
    terrain: TerrainConfig = field(default_factory=TerrainConfig)

    def latest(self, n_envs: int) -> List[SolvedEnvironment]:
        """The ``n_envs`` most recently created solved environments, oldest first."""
        if len(self.solved) < n_envs:
            raise GeneralizationShortfallError(self.name, len(self.solved), n_envs)
        ordered = sorted(self.solved, key=lambda s: (s.env.created_iteration, s.env.env_id))
        return ordered[len(ordered) - n_envs :]

    def chronological_agents(self) -> List[SolvedEnvironment]:
        return sorted(self.solved, key=lambda s: (s.solved_iteration, s.env.env_id))


@dataclass(frozen=True)
class GeneralizationEntry:
    method: str
    agent_env_id: int
    agent_genome_id: int
    env_method: str
    env_id: int
    mean: float
    max: float
    bucket: Bucket

    def to_row(self) -> List[str]:
        return [
            self.method,
            str(self.agent_env_id),
            str(self.agent_genome_id),
            self.env_method,
            str(self.env_id),
            repr(self.mean),
            repr(self.max),
            self.bucket.value,
        ]


REPORT_HEADER = (
    "method",
    "agent_env_id",
    "agent_genome_id",
    "env_method",
    "env_id",
    "mean",
    "max",
    "bucket",
)


@dataclass
class GeneralizationReport:
    entries: List[GeneralizationEntry]
    n_runs: int
    self_generalization: bool = False

    def methods(self) -> List[str]:
        return sorted({e.method for e in self.entries})

    def bucket_percentages(self, method: str) -> Dict[Bucket, float]:
        """Share of (agent, environment) pairs per bucket; the three values sum to 100."""
        entries = [e for e in self.entries if e.method == method]
        if not entries:
            return {b: 0.0 for b in Bucket}
        total = len(entries)
        above = 100.0 * sum(e.bucket is Bucket.ABOVE_300 for e in entries) / total
        between = 100.0 * sum(e.bucket is Bucket.BETWEEN_200_300 for e in entries) / total
        return {
            Bucket.ABOVE_300: above,
            Bucket.BETWEEN_200_300: between,
            Bucket.BELOW_200: 100.0 - above - between,
        }

    def environments_per_method(self, method: str) -> int:
        return len({(e.env_method, e.env_id) for e in self.entries if e.method == method})

    def summary(self) -> Dict[str, object]:
        return {
            "n_runs": self.n_runs,
            "self_generalization": self.self_generalization,
            "methods": {
                m: {
                    "pairs": sum(1 for e in self.entries if e.method == m),
                    "environments": self.environments_per_method(m),
                    "buckets": {b.value: v for b, v in self.bucket_percentages(m).items()},
                }
                for m in self.methods()
            },
        }

    def write(self, out_dir: Path) -> Tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        table = out_dir / "generalization.csv"
        with table.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(REPORT_HEADER)
            for entry in self.entries:
                writer.writerow(entry.to_row())
        summary = out_dir / "generalization_summary.json"
        summary.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return table, summary


def _cross_evaluate(
    tasks: Sequence[Tuple[str, SolvedEnvironment, str, EnvGenome, TerrainConfig]],
    n_runs: int,
    sim_cfg: SimConfig,
    pool: EvaluationPool,
) -> List[GeneralizationEntry]:
    terrains = {}
    jobs = []
    for _, agent, env_method, env, terrain_cfg in tasks:
        key = (env_method, env.env_id)
        if key not in terrains:
            terrains[key] = synthesize(env, terrain_cfg)
        noisy = sim_cfg.obs_noise_stdev > 0
        for run in range(n_runs):
            seed = (run,) if noisy else None
            jobs.append(RolloutJob(agent.agent, terrains[key], sim_cfg, seed))
    scores = np.array([r.score for r in run_rollouts(jobs, pool)]).reshape(len(tasks), n_runs)

    entries = []
    for (method, agent, env_method, env, _), row in zip(tasks, scores):
        mean = float(np.mean(row))
        entries.append(
            GeneralizationEntry(
                method=method,
                agent_env_id=agent.env.env_id,
                agent_genome_id=agent.agent.genome_id,
                env_method=env_method,
                env_id=env.env_id,
                mean=mean,
                max=float(np.max(row)),
                bucket=bucket_for(mean),
            )
        )
    return entries


def run_generalization(
    methods: Sequence[MethodRun],
    n_envs: int,
    n_runs: int,
    sim_cfg: SimConfig,
    noise_stdev: float = 0.01,
    pool: EvaluationPool = SERIAL,
) -> GeneralizationReport:
    """Cross-evaluate each method's latest solvers on the other methods' environments.

    With a single method, every solver of that run is evaluated on every environment the
    run solved, in chronological order of solving.
    """
    if not methods:
        raise ContractError("run_generalization needs at least one run")
    if n_runs < 1:
        raise ContractError("n_runs must be >= 1")
    sim_cfg = replace(sim_cfg, obs_noise_stdev=noise_stdev)

    if len(methods) == 1:
        method = methods[0]
        solvers = method.chronological_agents()
        if not solvers:
            raise GeneralizationShortfallError(method.name, 0, 1)
        tasks = [
            (method.name, agent, method.name, target.env, method.terrain)
            for agent in solvers
            for target in solvers
        ]
        logger.info("self-generalization of %s: %d solvers", method.name, len(solvers))
        return GeneralizationReport(_cross_evaluate(tasks, n_runs, sim_cfg, pool), n_runs, True)

    selected = {m.name: m.latest(n_envs) for m in methods}
    terrain_of = {m.name: m.terrain for m in methods}
    tasks = []
    for m in methods:
        for agent in selected[m.name]:
            for other in methods:
                if other.name == m.name:
                    continue
                for target in selected[other.name]:
                    tasks.append((m.name, agent, other.name, target.env, terrain_of[other.name]))
    logger.info(
        "cross-evaluating %d agent/environment pairs x %d runs", len(tasks), n_runs
    )
    return GeneralizationReport(_cross_evaluate(tasks, n_runs, sim_cfg, pool), n_runs)
