import hashlib
import json
import logging
import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping

from atep.core.errors import CheckpointError
from atep.metrics.ledger import RunLedger
from atep.poet.state import EngineState

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
STATE_FILE = "state.json"
CONFIG_FILE = "config.json"
LEDGER_FILE = "ledger.csv"


@dataclass
class Checkpoint:
    path: Path
    iteration: int
    config_hash: str
    config: Dict[str, Any]
    state: EngineState


def checkpoint_dir_name(iteration: int) -> str:
    return f"iter_{iteration:06d}"


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=1) + "\n"


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def checkpoint_save(
    state: EngineState,
    config: Mapping[str, Any],
    config_hash: str,
    checkpoints_root: Path,
) -> Path:
    """Write ``checkpoints_root/iter_NNNNNN`` atomically and return its path.

    Files are written into a temporary sibling directory which is renamed into place, so
    a crash never leaves a half-written checkpoint under the final name.
    """
    checkpoints_root = Path(checkpoints_root)
    checkpoints_root.mkdir(parents=True, exist_ok=True)
    final = checkpoints_root / checkpoint_dir_name(state.iteration)

    payloads = {
        STATE_FILE: canonical_json(state.to_dict()).encode("utf-8"),
        CONFIG_FILE: canonical_json(dict(config)).encode("utf-8"),
        LEDGER_FILE: state.ledger.to_csv().encode("utf-8"),
    }
    manifest = {
        "format_version": FORMAT_VERSION,
        "iteration": state.iteration,
        "config_hash": config_hash,
        "files": {name: _sha256(data) for name, data in sorted(payloads.items())},
    }

    tmp = Path(tempfile.mkdtemp(prefix=f".{final.name}.", dir=checkpoints_root))
    try:
        for name, data in payloads.items():
            (tmp / name).write_bytes(data)
        (tmp / MANIFEST).write_text(canonical_json(manifest), encoding="utf-8")
        if final.exists():
            shutil.rmtree(final)
        tmp.rename(final)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    logger.info("checkpoint written: %s", final)
    return final


def _read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CheckpointError(f"missing checkpoint file {path}") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise CheckpointError(f"corrupt checkpoint file {path}: {e}") from e


def checkpoint_load(path: Path) -> Checkpoint:
    """Validate every file against the manifest before building any state."""
    path = Path(path)
    if not path.is_dir():
        raise CheckpointError(f"checkpoint directory not found: {path}")
    manifest = _read_json(path / MANIFEST)
    if not isinstance(manifest, dict) or manifest.get("format_version") != FORMAT_VERSION:
        version = manifest.get("format_version") if isinstance(manifest, dict) else None
        raise CheckpointError(
            f"checkpoint format version {version!r} is not supported (expected {FORMAT_VERSION})"
        )

    files = manifest.get("files", {})
    for name in (STATE_FILE, CONFIG_FILE, LEDGER_FILE):
        file_path = path / name
        if not file_path.is_file():
            raise CheckpointError(f"missing checkpoint file {file_path}")
        if files.get(name) != _sha256(file_path.read_bytes()):
            raise CheckpointError(f"checksum mismatch for {file_path} (truncated or modified)")

    ledger = RunLedger.load(path / LEDGER_FILE)
    config = _read_json(path / CONFIG_FILE)
    try:
        state = EngineState.from_dict(_read_json(path / STATE_FILE), ledger)
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"invalid engine state in {path}: {e}") from e
    if state.iteration != manifest.get("iteration"):
        raise CheckpointError(f"manifest iteration does not match state in {path}")
    return Checkpoint(
        path=path,
        iteration=state.iteration,
        config_hash=str(manifest.get("config_hash")),
        config=config,
        state=state,
    )
