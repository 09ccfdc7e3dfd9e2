import csv
import io
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable, List, Optional, TextIO

from atep.core.errors import CheckpointError

LEDGER_HEADER = (
    "iteration",
    "annecs",
    "mean_nodes",
    "mean_best_fitness",
    "cumulative_function_evals",
    "active_pair_count",
    "transfers_fbt",
    "transfers_sbt",
    "transfers_rt",
)

TRANSFER_HEADER = ("iteration", "kind", "source_env_id", "target_env_id")


@dataclass(frozen=True)
class LedgerRow:
    iteration: int
    annecs: int
    mean_nodes: float
    mean_best_fitness: float
    cumulative_function_evals: int
    active_pair_count: int
    # transfers applied during this iteration
    transfers_fbt: int = 0
    transfers_sbt: int = 0
    transfers_rt: int = 0

    def to_row(self) -> List[str]:
        return [repr(v) if isinstance(v, float) else str(v) for v in astuple(self)]

    @classmethod
    def from_row(cls, row: List[str]) -> "LedgerRow":
        if len(row) != len(LEDGER_HEADER):
            raise ValueError(f"ledger row has {len(row)} columns, expected {len(LEDGER_HEADER)}")
        values = []
        for f, raw in zip(fields(cls), row):
            values.append(float(raw) if f.type in (float, "float") else int(raw))
        return cls(*values)


def fnr(row: LedgerRow) -> Optional[float]:
    """Fitness to nodes ratio; None when the hidden-node census is zero."""
    if row.mean_nodes == 0:
        return None
    return row.mean_best_fitness / row.mean_nodes


def anr(row: LedgerRow) -> Optional[float]:
    """ANNECS to nodes ratio; None when the hidden-node census is zero."""
    if row.mean_nodes == 0:
        return None
    return row.annecs / row.mean_nodes


class RunLedger:
    """Append-only per-iteration record of a run."""

    def __init__(self, rows: Iterable[LedgerRow] = ()):
        self.rows: List[LedgerRow] = []
        for row in rows:
            self.append(row)

    def append(self, row: LedgerRow) -> None:
        if self.rows:
            last = self.rows[-1]
            if row.iteration <= last.iteration:
                raise ValueError(f"ledger iteration {row.iteration} follows {last.iteration}")
            if row.annecs < last.annecs or row.cumulative_function_evals < last.cumulative_function_evals:
                raise ValueError(f"ledger row {row.iteration} decreases a cumulative column")
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    @property
    def last(self) -> Optional[LedgerRow]:
        return self.rows[-1] if self.rows else None

    def write(self, out: TextIO) -> None:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(LEDGER_HEADER)
        for row in self.rows:
            writer.writerow(row.to_row())

    def to_csv(self) -> str:
        buffer = io.StringIO()
        self.write(buffer)
        return buffer.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RunLedger":
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise CheckpointError("ledger file is empty") from None
        if tuple(header) != LEDGER_HEADER:
            raise CheckpointError(f"unexpected ledger header {header}")
        try:
            return cls(LedgerRow.from_row(row) for row in reader)
        except ValueError as e:
            raise CheckpointError(f"corrupt ledger: {e}") from e

    @classmethod
    def load(cls, path: Path) -> "RunLedger":
        return cls.from_csv(Path(path).read_text(encoding="utf-8"))
