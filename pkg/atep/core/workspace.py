import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

from atep.core.errors import RunDirectoryError
from atep.metrics.checkpoint import canonical_json
from atep.metrics.ledger import LEDGER_HEADER, TRANSFER_HEADER, LedgerRow, RunLedger
from atep.poet.pair import TransferEvent
from atep.poet.state import EngineState

logger = logging.getLogger(__name__)

CONFIG_ECHO = "config.json"
LEDGER = "ledger.csv"
TRANSFERS = "transfers.csv"
CHECKPOINTS = "checkpoints"


class RunWorkspace:
    """Files of one run: config echo, ledger, transfer log and checkpoints."""

    def __init__(self, run_dir: Path):
        self.run_dir: Path = Path(run_dir).resolve()

    @property
    def config_path(self) -> Path:
        return self.run_dir / CONFIG_ECHO

    @property
    def ledger_path(self) -> Path:
        return self.run_dir / LEDGER

    @property
    def transfers_path(self) -> Path:
        return self.run_dir / TRANSFERS

    @property
    def checkpoints_dir(self) -> Path:
        return self.run_dir / CHECKPOINTS

    @classmethod
    def of_checkpoint(cls, checkpoint_path: Path) -> "RunWorkspace":
        """Workspace owning ``<run_dir>/checkpoints/iter_NNNNNN``."""
        checkpoint_path = Path(checkpoint_path).resolve()
        return cls(checkpoint_path.parent.parent)

    def create(self, echo: Dict[str, Any]) -> None:
        """Start a fresh run directory; refuses to reuse one that already has content."""
        if self.run_dir.exists() and any(self.run_dir.iterdir()):
            raise RunDirectoryError(f"run directory {self.run_dir} is not empty")
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.write_echo(echo)
        self._write_csv(self.ledger_path, LEDGER_HEADER, [])
        self._write_csv(self.transfers_path, TRANSFER_HEADER, [])
        logger.info("run directory: %s", self.run_dir)

    def write_echo(self, echo: Dict[str, Any]) -> None:
        self.config_path.write_text(canonical_json(echo), encoding="utf-8")

    def read_echo(self) -> Optional[Dict[str, Any]]:
        if not self.config_path.is_file():
            return None
        try:
            return json.loads(self.config_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise RunDirectoryError(f"corrupt config echo {self.config_path}: {e}") from e

    @staticmethod
    def _write_csv(path: Path, header, rows: Iterable[List[Any]]) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)

    @staticmethod
    def _append_csv(path: Path, rows: Iterable[List[Any]]) -> None:
        with open(path, "a", encoding="utf-8", newline="") as f:
            csv.writer(f, lineterminator="\n").writerows(rows)

    def append_ledger(self, row: LedgerRow) -> None:
        self._append_csv(self.ledger_path, [row.to_row()])

    def append_transfers(self, events: Iterable[TransferEvent]) -> None:
        self._append_csv(self.transfers_path, [e.to_row() for e in events])

    def rewrite_from(self, state: EngineState) -> None:
        """Make ledger and transfer log match a (restored) engine state exactly."""
        self.ledger_path.write_text(state.ledger.to_csv(), encoding="utf-8")
        self._write_csv(self.transfers_path, TRANSFER_HEADER, [e.to_row() for e in state.transfers])

    def load_ledger(self) -> RunLedger:
        if not self.ledger_path.is_file():
            raise RunDirectoryError(f"no ledger in {self.run_dir}")
        return RunLedger.load(self.ledger_path)

    def checkpoints(self) -> List[Path]:
        if not self.checkpoints_dir.is_dir():
            return []
        return sorted(
            p for p in self.checkpoints_dir.iterdir() if p.is_dir() and p.name.startswith("iter_")
        )

    def latest_checkpoint(self) -> Path:
        found = self.checkpoints()
        if not found:
            raise RunDirectoryError(f"no checkpoints in {self.run_dir}")
        return found[-1]
