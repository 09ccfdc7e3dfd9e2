import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from atep.core.errors import UnknownSeriesError
from atep.metrics.ledger import LedgerRow, RunLedger, anr, fnr
from atep.phenotype.network import compile_genome
from atep.poet.pair import EAPair
from atep.sim.walker import SimConfig, rollout
from atep.terrain.env_genome import EnvGenome, TerrainConfig
from atep.terrain.synthesis import synthesize, terrain_table

logger = logging.getLogger(__name__)

LEDGER_SERIES: Dict[str, Callable[[LedgerRow], Optional[float]]] = {
    "annecs": lambda r: r.annecs,
    "fnr": fnr,
    "anr": anr,
    "nodes": lambda r: r.mean_nodes,
    "func_evals": lambda r: r.cumulative_function_evals,
    "mean_fitness": lambda r: r.mean_best_fitness,
}
PAIR_SERIES = ("fitness_nodes",)
STATE_SERIES = ("terrain", "actions")
SERIES = tuple(LEDGER_SERIES) + PAIR_SERIES + STATE_SERIES


@dataclass
class Table:
    header: Tuple[str, ...]
    rows: List[Tuple]
    skipped: int = 0


def check_series(name: str) -> None:
    if name not in SERIES:
        raise UnknownSeriesError(name, SERIES)


def ledger_series(ledger: RunLedger, name: str) -> Table:
    """(iteration, value) pairs; rows whose value is undefined are skipped and counted."""
    check_series(name)
    if name == "fitness_nodes":
        rows = [(r.iteration, r.mean_nodes, r.mean_best_fitness) for r in ledger]
        return Table(("iteration", "mean_nodes", "mean_best_fitness"), rows)
    fn = LEDGER_SERIES[name]
    rows = []
    skipped = 0
    for row in ledger:
        value = fn(row)
        if value is None:
            skipped += 1
            continue
        rows.append((row.iteration, value))
    if skipped:
        logger.warning("%s: skipped %d rows with zero mean hidden nodes", name, skipped)
    return Table(("iteration", name), rows, skipped)


def terrain_series(env: EnvGenome, cfg: TerrainConfig) -> Table:
    return Table(("x", "height", "gap"), list(terrain_table(synthesize(env, cfg))))


def action_series(pairs: Sequence[EAPair], terrain_cfg: TerrainConfig, sim_cfg: SimConfig) -> Table:
    """Binned action counts of each pair's champion on its own environment."""
    bins = np.linspace(-1.0, 1.0, sim_cfg.histogram_bins + 1)
    rows = []
    for pair in sorted(pairs, key=lambda p: p.env_id):
        champion = pair.champion
        result = rollout(compile_genome(champion), synthesize(pair.env, terrain_cfg), sim_cfg)
        for dim, counts in enumerate(result.action_histogram):
            for b, count in enumerate(counts):
                rows.append(
                    (pair.env_id, champion.genome_id, dim, float(bins[b]), float(bins[b + 1]), count)
                )
    return Table(("env_id", "genome_id", "action", "bin_lo", "bin_hi", "count"), rows)
