import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from atep.core.config_manager import ConfigManager
from atep.core.errors import ConfigError
from atep.neat.config import CompatConfig, MutationRates, NeatConfig, ReproductionConfig
from atep.neat.genome import Activation
from atep.poet.config import (
    EngineConfig,
    PoetConfig,
    SbtReplace,
    ScheduleConfig,
    TransferKind,
    TransferPolicy,
)
from atep.sim.walker import SimConfig
from atep.terrain.env_genome import DifficultyScalars, DriftConfig, ScalarDrift, TerrainConfig

# Keys that do not influence the evolved trajectory.
HASH_EXCLUDED = (("run", "root_dir"), ("run", "workers"))

NODE_CENSUS = "hidden_nodes_population_mean"


@dataclass(frozen=True)
class RunSettings:
    name: str = "atep-run"
    seed: int = 0
    iterations: int = 300
    checkpoint_every_iters: Optional[int] = 50
    workers: int = 1
    root_dir: Path = Path("runs")

    @property
    def run_dir(self) -> Path:
        return Path(self.root_dir) / self.name


@dataclass(frozen=True)
class RunConfig:
    run: RunSettings
    poet: PoetConfig
    resolved: Mapping[str, Any]
    config_hash: str

    def echo(self, code_version: str) -> Dict[str, Any]:
        """Self-describing record written into every run directory and checkpoint."""
        return {
            "code_version": code_version,
            "config_hash": self.config_hash,
            "node_census": NODE_CENSUS,
            "config": copy.deepcopy(dict(self.resolved)),
        }


def config_hash(resolved: Mapping[str, Any]) -> str:
    data = copy.deepcopy(dict(resolved))
    for section, key in HASH_EXCLUDED:
        data.get(section, {}).pop(key, None)
    payload = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _sub(data: Mapping[str, Any], key: str) -> Mapping[str, Any]:
    return data.get(key) or {}


def _build(cls, data: Mapping[str, Any], section: str, **extra):
    """Construct a config dataclass, reporting value errors against ``section``."""
    try:
        return cls(**data, **extra)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), section) from e


def _mutation(data: Mapping[str, Any]) -> MutationRates:
    data = dict(data)
    if "activation_options" in data:
        data["activation_options"] = tuple(Activation(a) for a in data["activation_options"])
    if "hidden_activation" in data:
        data["hidden_activation"] = Activation(data["hidden_activation"])
    return _build(MutationRates, data, "neat.mutation")


def _terrain(data: Mapping[str, Any]) -> TerrainConfig:
    drift_data = _sub(data, "drift")
    drift = DriftConfig(
        **{k: _build(ScalarDrift, v, f"terrain.drift.{k}") for k, v in drift_data.items()}
    )
    initial = _build(DifficultyScalars, _sub(data, "initial"), "terrain.initial")
    rest = {k: v for k, v in data.items() if k not in ("drift", "initial")}
    return _build(TerrainConfig, rest, "terrain", initial=initial, drift=drift)


def _check_ranges(poet: PoetConfig) -> None:
    sim = poet.sim
    low, high = sim.score_min, sim.score_max
    for key, value in (
        ("engine.repro_threshold", poet.engine.repro_threshold),
        ("engine.mc_lo", poet.engine.mc_lo),
        ("engine.mc_hi", poet.engine.mc_hi),
        ("sim.solved_threshold", sim.solved_threshold),
    ):
        if not low <= value <= high:
            raise ConfigError(f"{value} lies outside the simulator score range [{low}, {high}]", key)
    if poet.engine.mc_lo > poet.engine.mc_hi:
        raise ConfigError("must not exceed engine.mc_hi", "engine.mc_lo")
    if poet.neat.fixed_topology is not None:
        rates = poet.neat.mutation
        for name in ("add_connection_rate", "add_node_rate", "toggle_enable_rate"):
            if getattr(rates, name) > 0:
                raise ConfigError(
                    "must be 0 when neat.fixed_topology is set", f"neat.mutation.{name}"
                )


def parse_run_config(resolved: Mapping[str, Any]) -> RunConfig:
    """Typed view of an already schema-validated configuration."""
    run_data = dict(_sub(resolved, "run"))
    if "root_dir" in run_data:
        run_data["root_dir"] = Path(run_data["root_dir"])
    run = _build(RunSettings, run_data, "run")

    neat_data = _sub(resolved, "neat")
    reproduction = _build(
        ReproductionConfig,
        _sub(neat_data, "reproduction"),
        "neat.reproduction",
        mutation=_mutation(_sub(neat_data, "mutation")),
    )
    topology = neat_data.get("fixed_topology")
    neat = NeatConfig(
        pop_size=int(neat_data.get("pop_size", 32)),
        fixed_topology=None if topology is None else tuple(int(w) for w in topology),
        compat=_build(CompatConfig, _sub(neat_data, "compat"), "neat.compat"),
        reproduction=reproduction,
    )

    transfer_data = dict(_sub(resolved, "transfer"))
    if "kind" in transfer_data:
        transfer_data["kind"] = TransferKind(transfer_data["kind"])
    if "sbt_replace" in transfer_data:
        transfer_data["sbt_replace"] = SbtReplace(transfer_data["sbt_replace"])

    poet = PoetConfig(
        seed=run.seed,
        neat=neat,
        terrain=_terrain(_sub(resolved, "terrain")),
        sim=_build(SimConfig, _sub(resolved, "sim"), "sim"),
        engine=_build(EngineConfig, _sub(resolved, "engine"), "engine"),
        schedule=_build(ScheduleConfig, _sub(resolved, "schedule"), "schedule"),
        transfer=_build(TransferPolicy, transfer_data, "transfer"),
    )
    _check_ranges(poet)
    return RunConfig(run=run, poet=poet, resolved=resolved, config_hash=config_hash(resolved))


def load_run_config(
    path: Optional[Path] = None,
    preset: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    run_root: Optional[Path] = None,
) -> Tuple[RunConfig, ConfigManager]:
    cm = ConfigManager(user_config_path=path, preset=preset, overrides=overrides, run_root=run_root)
    return parse_run_config(cm.validate()), cm
