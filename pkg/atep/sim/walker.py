import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from atep.core.errors import ContractError
from atep.core.worker_pool import SERIAL, EvaluationPool
from atep.neat.genome import AgentGenome, GenomeSignature
from atep.phenotype.network import CompiledNetwork, activate, compile_genome
from atep.terrain.synthesis import Terrain

logger = logging.getLogger(__name__)

ACTION_SIZE = 2


@dataclass(frozen=True)
class SimConfig:
    dt_s: float = 0.05
    gravity_m_s2: float = 9.8
    v_max_m_s: float = 5.0
    drive_accel_m_s2: float = 8.0
    v_jump_m_s: float = 6.0
    jump_signal_threshold: float = 0.5
    max_steps: int = 1000
    max_step_up_m: float = 0.4
    look_ahead_cells: int = 10
    obs_clip_m: float = 5.0
    progress_total: float = 320.0
    control_cost: float = 0.001
    fall_penalty: float = 100.0
    kill_plane_depth_m: float = 5.0
    solved_threshold: float = 200.0
    obs_noise_stdev: float = 0.0
    histogram_bins: int = 10

    @property
    def observation_size(self) -> int:
        return self.look_ahead_cells + 3

    @property
    def agent_signature(self) -> GenomeSignature:
        return GenomeSignature(num_inputs=self.observation_size, num_outputs=ACTION_SIZE)

    @property
    def score_max(self) -> float:
        return self.progress_total

    @property
    def score_min(self) -> float:
        return -self.fall_penalty - self.max_steps * self.control_cost


class Termination(str, Enum):
    REACHED_END = "reached_end"
    FELL = "fell"
    TIMEOUT = "timeout"


@dataclass
class SimState:
    x: float = 0.0
    y: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    on_ground: bool = True
    step: int = 0
    cumulative_reward: float = 0.0


@dataclass(frozen=True)
class RolloutResult:
    score: float
    solved: bool
    steps: int
    termination: Termination
    action_histogram: Tuple[Tuple[int, ...], ...]
    final_x: float
    progress: float


@dataclass
class RolloutCounter:
    """Independent tally of rollouts performed in this process."""

    count: int = 0

    def add(self, n: int = 1) -> None:
        self.count += n


EVALUATIONS = RolloutCounter()


def observe(state: SimState, terrain: Terrain, cfg: SimConfig) -> np.ndarray:
    """Height deltas of the next cells relative to the agent, then vx, vy and a ground flag.

    Deltas are clipped to +-obs_clip_m and scaled to [-1, 1]; gap cells read as -1.
    """
    start = terrain.cell_at(state.x) + 1
    idx = np.minimum(np.arange(start, start + cfg.look_ahead_cells), terrain.cells - 1)
    deltas = np.clip(terrain.heights[idx] - state.y, -cfg.obs_clip_m, cfg.obs_clip_m) / cfg.obs_clip_m
    deltas = np.where(terrain.gap_mask[idx], -1.0, deltas)
    tail = np.array(
        [state.vx / cfg.v_max_m_s, state.vy / cfg.v_max_m_s, 1.0 if state.on_ground else 0.0]
    )
    return np.concatenate([deltas, tail])


def _advance(
    state: SimState, a_x: float, jump: float, terrain: Terrain, cfg: SimConfig, kill_plane: float
) -> Optional[Termination]:
    """One semi-implicit Euler step. Mutates ``state``; returns a termination or None."""
    dt = cfg.dt_s
    if state.on_ground:
        state.vx = float(np.clip(state.vx + cfg.drive_accel_m_s2 * a_x * dt, -cfg.v_max_m_s, cfg.v_max_m_s))
        if jump > cfg.jump_signal_threshold:
            state.vy = cfg.v_jump_m_s
            state.on_ground = False
    if not state.on_ground:
        state.vy -= cfg.gravity_m_s2 * dt

    x_new = float(np.clip(state.x + state.vx * dt, 0.0, terrain.course_length))
    if x_new == 0.0 and state.vx < 0:
        state.vx = 0.0
    y_new = state.y + state.vy * dt if not state.on_ground else state.y

    cell = terrain.cell_at(x_new)
    ground = float(terrain.heights[cell])
    # A rise taller than the step limit stops horizontal motion.
    if cell != terrain.cell_at(state.x) and ground - max(state.y, y_new) > cfg.max_step_up_m:
        x_new = state.x
        state.vx = 0.0
        cell = terrain.cell_at(x_new)
        ground = float(terrain.heights[cell])
    gap = bool(terrain.gap_mask[cell]) and x_new < terrain.course_length

    progress = cfg.progress_total * (x_new - state.x) / terrain.course_length
    state.cumulative_reward += progress
    state.x = x_new

    if state.on_ground:
        if gap:
            return Termination.FELL
        if ground < state.y - cfg.max_step_up_m:
            state.on_ground = False
            state.vy = 0.0
        else:
            state.y = ground
    else:
        state.y = y_new
        if state.y <= ground:
            if gap:
                return Termination.FELL
            state.y = ground
            state.vy = 0.0
            state.on_ground = True
    if state.y < kill_plane:
        return Termination.FELL
    if state.x >= terrain.course_length:
        return Termination.REACHED_END
    return None


def simulate(
    net: CompiledNetwork,
    terrain: Terrain,
    cfg: SimConfig,
    noise_rng: Optional[np.random.Generator] = None,
) -> RolloutResult:
    """Pure episode run; see ``rollout`` for the counted public entry point."""
    if net.num_inputs != cfg.observation_size or net.num_outputs != ACTION_SIZE:
        raise ContractError(
            f"network arity ({net.num_inputs}, {net.num_outputs}) does not match "
            f"simulator ({cfg.observation_size}, {ACTION_SIZE})"
        )
    state = SimState(y=float(terrain.heights[0]))
    kill_plane = float(np.min(terrain.heights)) - cfg.kill_plane_depth_m
    actions: List[np.ndarray] = []
    control = 0.0
    termination = Termination.TIMEOUT
    while state.step < cfg.max_steps:
        obs = observe(state, terrain, cfg)
        if noise_rng is not None and cfg.obs_noise_stdev > 0:
            obs = obs + noise_rng.normal(0.0, cfg.obs_noise_stdev, size=obs.shape)
        action = activate(net, obs)
        actions.append(action)
        a_x = float(np.clip(action[0], -1.0, 1.0))
        control += cfg.control_cost * abs(a_x)
        state.cumulative_reward -= cfg.control_cost * abs(a_x)
        state.step += 1
        ended = _advance(state, a_x, float(action[1]), terrain, cfg, kill_plane)
        if ended is not None:
            termination = ended
            break

    if termination is Termination.FELL:
        state.cumulative_reward -= cfg.fall_penalty
    score = state.cumulative_reward
    progress = score + control + (cfg.fall_penalty if termination is Termination.FELL else 0.0)
    return RolloutResult(
        score=score,
        solved=score >= cfg.solved_threshold,
        steps=state.step,
        termination=termination,
        action_histogram=action_histogram(actions, cfg.histogram_bins),
        final_x=state.x,
        progress=progress,
    )


def action_histogram(actions: Sequence[np.ndarray], bins: int = 10) -> Tuple[Tuple[int, ...], ...]:
    if not actions:
        return tuple(tuple([0] * bins) for _ in range(ACTION_SIZE))
    stacked = np.clip(np.asarray(actions), -1.0, 1.0)
    return tuple(
        tuple(int(c) for c in np.histogram(stacked[:, d], bins=bins, range=(-1.0, 1.0))[0])
        for d in range(stacked.shape[1])
    )


def rollout(
    net: CompiledNetwork,
    terrain: Terrain,
    cfg: SimConfig,
    noise_rng: Optional[np.random.Generator] = None,
    counter: RolloutCounter = EVALUATIONS,
) -> RolloutResult:
    """Run one episode and count it as one function evaluation."""
    result = simulate(net, terrain, cfg, noise_rng)
    counter.add(1)
    return result


@dataclass(frozen=True)
class RolloutJob:
    genome: AgentGenome
    terrain: Terrain
    cfg: SimConfig
    noise_seed: Optional[Tuple[int, ...]] = None


def _run_job(job: RolloutJob) -> RolloutResult:
    rng = None if job.noise_seed is None else np.random.default_rng(list(job.noise_seed))
    return simulate(compile_genome(job.genome), job.terrain, job.cfg, rng)


def run_rollouts(
    jobs: Sequence[RolloutJob],
    pool: EvaluationPool = SERIAL,
    counter: RolloutCounter = EVALUATIONS,
) -> List[RolloutResult]:
    """Evaluate jobs in input order; the counter is advanced here, in the calling process."""
    results = pool.map(_run_job, jobs)
    counter.add(len(jobs))
    return results


def evaluate_population(
    pop: Sequence[AgentGenome],
    terrain: Terrain,
    cfg: SimConfig,
    pool: EvaluationPool = SERIAL,
    counter: RolloutCounter = EVALUATIONS,
) -> List[AgentGenome]:
    """Single deterministic rollout per genome; returns the genomes with fitness set."""
    results = run_rollouts([RolloutJob(g, terrain, cfg) for g in pop], pool, counter)
    return [g.with_fitness(r.score) for g, r in zip(pop, results)]


def without_noise(cfg: SimConfig) -> SimConfig:
    return replace(cfg, obs_noise_stdev=0.0)
