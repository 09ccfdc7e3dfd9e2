from atep.poet.config import (
    EngineConfig,
    PoetConfig,
    SbtReplace,
    ScheduleConfig,
    TransferKind,
    TransferPolicy,
)
from atep.poet.engine import PoetEngine
from atep.poet.pair import Archive, ArchivedPair, EAPair, SolvedRecord, TransferEvent
from atep.poet.pata_ec import novelty, pata_ec_vector
from atep.poet.state import EngineState

__all__ = [
    "Archive",
    "ArchivedPair",
    "EAPair",
    "EngineConfig",
    "EngineState",
    "PoetConfig",
    "PoetEngine",
    "SbtReplace",
    "ScheduleConfig",
    "SolvedRecord",
    "TransferEvent",
    "TransferKind",
    "TransferPolicy",
    "novelty",
    "pata_ec_vector",
]
