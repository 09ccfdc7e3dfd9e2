import csv
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, TextIO

from atep import __version__
from atep.core.errors import ConfigError, ContractError
from atep.core.run_config import RunConfig, load_run_config, parse_run_config
from atep.core.worker_pool import EvaluationPool
from atep.core.workspace import RunWorkspace
from atep.metrics.checkpoint import Checkpoint, checkpoint_load, checkpoint_save
from atep.metrics.export import (
    LEDGER_SERIES,
    PAIR_SERIES,
    Table,
    action_series,
    check_series,
    ledger_series,
    terrain_series,
)
from atep.metrics.generalization import (
    GeneralizationReport,
    MethodRun,
    SolvedEnvironment,
    run_generalization,
)
from atep.poet.config import ScheduleConfig
from atep.poet.engine import PoetEngine
from atep.poet.state import EngineState
from atep.terrain.env_genome import EnvGenome

logger = logging.getLogger(__name__)


def _environments(state: EngineState) -> Dict[int, EnvGenome]:
    envs = {p.env.env_id: p.env for p in state.archive.pairs}
    envs.update({p.env_id: p.env for p in state.pairs})
    return envs


class CommandRunner:
    """Implements the CLI subcommands on top of the engine and the run directory."""

    def __init__(self, run_root: Optional[Path] = None):
        self.run_root = run_root

    # -- run / resume ---------------------------------------------------------------

    def _drive(
        self,
        rc: RunConfig,
        ws: RunWorkspace,
        state: EngineState,
        iterations: int,
    ) -> EngineState:
        echo = rc.echo(__version__)
        every = rc.run.checkpoint_every_iters
        saved_at = {"iteration": None}

        def on_iteration(s: EngineState) -> None:
            ws.append_ledger(s.ledger.last)
            ws.append_transfers(e for e in s.transfers if e.iteration == s.iteration)
            if ScheduleConfig.due(every, s.iteration):
                checkpoint_save(s, echo, rc.config_hash, ws.checkpoints_dir)
                saved_at["iteration"] = s.iteration

        with EvaluationPool(rc.run.workers) as pool:
            engine = PoetEngine(rc.poet, pool)
            engine.run(state, iterations, on_iteration)
        if saved_at["iteration"] != state.iteration:
            checkpoint_save(state, echo, rc.config_hash, ws.checkpoints_dir)
        logger.info(
            "finished at iteration %d: annecs %d, %d function evaluations",
            state.iteration,
            state.annecs,
            state.function_evals,
        )
        return state

    def run(
        self,
        config_path: Optional[Path],
        preset: Optional[str] = None,
        iterations: Optional[int] = None,
        overrides: Optional[Mapping[str, Any]] = None,
    ) -> EngineState:
        overrides = dict(overrides or {})
        if iterations is not None:
            overrides["run.iterations"] = iterations
        rc, _ = load_run_config(config_path, preset, overrides, self.run_root)
        ws = RunWorkspace(rc.run.run_dir)
        ws.create(rc.echo(__version__))
        logger.info(
            "run %s: seed %d, %d iterations, config %s",
            rc.run.name,
            rc.run.seed,
            rc.run.iterations,
            rc.config_hash[:12],
        )
        with EvaluationPool(rc.run.workers) as pool:
            state = PoetEngine(rc.poet, pool).initialize()
        return self._drive(rc, ws, state, rc.run.iterations)

    def _resume_config(
        self, cp: Checkpoint, ws: RunWorkspace, config_path: Optional[Path]
    ) -> RunConfig:
        if config_path is not None:
            rc, _ = load_run_config(config_path, run_root=self.run_root)
            return rc
        echo = ws.read_echo() or cp.config
        return parse_run_config(echo["config"])

    def resume(
        self,
        checkpoint_path: Path,
        iterations: int,
        config_path: Optional[Path] = None,
        force: bool = False,
    ) -> EngineState:
        if iterations < 0:
            raise ContractError("extra iterations must be >= 0")
        cp = checkpoint_load(checkpoint_path)
        ws = RunWorkspace.of_checkpoint(cp.path)
        rc = self._resume_config(cp, ws, config_path)
        if rc.config_hash != cp.config_hash:
            if not force:
                raise ConfigError(
                    f"config hash {rc.config_hash[:12]} differs from checkpoint "
                    f"{cp.config_hash[:12]}; pass --force to resume anyway",
                    "config_hash",
                )
            logger.warning("resuming %s with a modified configuration", cp.path)
        if iterations == 0:
            logger.info("nothing to do: 0 extra iterations requested")
            return cp.state

        if rc.config_hash != cp.config_hash:
            ws.write_echo(rc.echo(__version__))
        ws.rewrite_from(cp.state)
        logger.info("resuming %s from iteration %d", ws.run_dir, cp.iteration)
        return self._drive(rc, ws, cp.state, iterations)

    # -- evaluation / export --------------------------------------------------------

    @staticmethod
    def _load_run(run_dir: Path):
        ws = RunWorkspace(run_dir)
        cp = checkpoint_load(ws.latest_checkpoint())
        echo = ws.read_echo() or cp.config
        return ws, cp, parse_run_config(echo["config"])

    def method_runs(self, run_dirs: Sequence[Path]) -> List[MethodRun]:
        methods: List[MethodRun] = []
        names = set()
        for run_dir in run_dirs:
            ws, cp, rc = self._load_run(run_dir)
            name = ws.run_dir.name
            suffix = 2
            while name in names:
                name = f"{ws.run_dir.name}-{suffix}"
                suffix += 1
            names.add(name)
            envs = _environments(cp.state)
            solved = [
                SolvedEnvironment(envs[rec.env_id], rec.agent, rec.iteration)
                for env_id, rec in sorted(cp.state.solved.items())
                if env_id in envs
            ]
            logger.info("%s: %d solved environments", name, len(solved))
            methods.append(MethodRun(name, solved, rc.poet.terrain))
        return methods

    def eval_generalization(
        self,
        run_dirs: Sequence[Path],
        n_envs: int,
        n_runs: int,
        noise_stdev: float = 0.01,
        out_dir: Optional[Path] = None,
        workers: int = 1,
    ) -> GeneralizationReport:
        if not run_dirs:
            raise ContractError("at least one run directory is required")
        methods = self.method_runs(run_dirs)
        # Rollout physics is taken from the first run; terrain settings stay per run.
        sim_cfg = self._load_run(run_dirs[0])[2].poet.sim
        with EvaluationPool(workers) as pool:
            report = run_generalization(methods, n_envs, n_runs, sim_cfg, noise_stdev, pool)
        table, summary = report.write(out_dir or Path.cwd())
        logger.info("generalization report written to %s and %s", table, summary)
        return report

    def export(
        self,
        run_dir: Path,
        series: str,
        env_id: Optional[int] = None,
        out: Optional[Path] = None,
    ) -> Table:
        check_series(series)
        ws = RunWorkspace(run_dir)
        if series in LEDGER_SERIES or series in PAIR_SERIES:
            table = ledger_series(ws.load_ledger(), series)
        else:
            _, cp, rc = self._load_run(run_dir)
            if series == "terrain":
                if env_id is None:
                    raise ContractError("terrain export needs --env-id")
                envs = _environments(cp.state)
                if env_id not in envs:
                    raise ContractError(f"run has no environment {env_id}")
                table = terrain_series(envs[env_id], rc.poet.terrain)
            else:
                pairs = [p for p in cp.state.pairs if env_id is None or p.env_id == env_id]
                if not pairs:
                    raise ContractError(f"run has no active pair for environment {env_id}")
                table = action_series(pairs, rc.poet.terrain, rc.poet.sim)

        if out is None:
            write_table(table, sys.stdout)
        else:
            out = Path(out)
            out.parent.mkdir(parents=True, exist_ok=True)
            with out.open("w", encoding="utf-8", newline="") as f:
                write_table(table, f)
            logger.info("%s: %d rows written to %s", series, len(table.rows), out)
        return table


def write_table(table: Table, stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(table.header)
    writer.writerows(_format_rows(table.rows))


def _format_rows(rows: Iterable[Sequence[Any]]) -> Iterable[List[str]]:
    for row in rows:
        yield [repr(v) if isinstance(v, float) else str(v) for v in row]
