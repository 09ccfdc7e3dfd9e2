from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Set

import numpy as np

from atep.metrics.ledger import RunLedger
from atep.neat.innovation import IdCounter, InnovationRegistry
from atep.poet.config import TransferKind
from atep.poet.pair import (
    Archive,
    EAPair,
    SolvedRecord,
    TransferEvent,
    rng_from_state,
    rng_state,
)

STATE_VERSION = 1


@dataclass
class EngineState:
    """Complete mutable state of a run; enough to resume it bit-exactly."""

    iteration: int
    pairs: List[EAPair]
    env_reg: InnovationRegistry
    env_ids: IdCounter
    genome_ids: IdCounter
    env_rng: np.random.Generator
    transfer_rng: np.random.Generator
    archive: Archive = field(default_factory=Archive)
    function_evals: int = 0
    solved: Dict[int, SolvedRecord] = field(default_factory=dict)
    mc_passed: Set[int] = field(default_factory=set)
    ledger: RunLedger = field(default_factory=RunLedger)
    transfers: List[TransferEvent] = field(default_factory=list)

    @property
    def annecs(self) -> int:
        return len(self.archive.annecs_counted)

    @property
    def total_envs_created(self) -> int:
        return self.env_ids.next_id

    def pair_by_env(self, env_id: int) -> EAPair:
        for pair in self.pairs:
            if pair.env_id == env_id:
                return pair
        raise KeyError(env_id)

    def note_solved(self, record: SolvedRecord, overwrite: bool = True) -> None:
        if overwrite or record.env_id not in self.solved:
            self.solved[record.env_id] = record

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready form. The ledger is stored separately as CSV."""
        return {
            "version": STATE_VERSION,
            "iteration": self.iteration,
            "pairs": [p.to_dict() for p in self.pairs],
            "archive": self.archive.to_dict(),
            "env_reg": self.env_reg.to_dict(),
            "env_ids": self.env_ids.next_id,
            "genome_ids": self.genome_ids.next_id,
            "env_rng": rng_state(self.env_rng),
            "transfer_rng": rng_state(self.transfer_rng),
            "function_evals": self.function_evals,
            "solved": [self.solved[k].to_dict() for k in sorted(self.solved)],
            "mc_passed": sorted(self.mc_passed),
            "transfers": [e.to_row() for e in self.transfers],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], ledger: RunLedger) -> "EngineState":
        if data.get("version") != STATE_VERSION:
            raise ValueError(f"unsupported state version {data.get('version')!r}")
        return cls(
            iteration=int(data["iteration"]),
            pairs=[EAPair.from_dict(p) for p in data["pairs"]],
            env_reg=InnovationRegistry.from_dict(data["env_reg"]),
            env_ids=IdCounter(int(data["env_ids"])),
            genome_ids=IdCounter(int(data["genome_ids"])),
            env_rng=rng_from_state(data["env_rng"]),
            transfer_rng=rng_from_state(data["transfer_rng"]),
            archive=Archive.from_dict(data["archive"]),
            function_evals=int(data["function_evals"]),
            solved={int(r["env_id"]): SolvedRecord.from_dict(r) for r in data["solved"]},
            mc_passed={int(e) for e in data["mc_passed"]},
            ledger=ledger,
            transfers=[
                TransferEvent(int(i), TransferKind(k), int(s), int(t))
                for i, k, s, t in data["transfers"]
            ],
        )
