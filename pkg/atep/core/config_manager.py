import copy
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

from jsonschema import Draft7Validator

from atep.core.errors import ConfigError

logger = logging.getLogger(__name__)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"
DEFAULT_CONFIG = CONFIG_DIR / "default.json"
SCHEMA_PATH = CONFIG_DIR / "schema.json"
PRESET_DIR = CONFIG_DIR / "presets"

RUN_ROOT_ENV = "ATEP_RUN_ROOT"


def available_presets() -> List[str]:
    return sorted(p.stem for p in PRESET_DIR.glob("*.json"))


def default_run_root() -> Path:
    return Path(os.environ.get(RUN_ROOT_ENV) or Path.cwd() / "runs")


def _expand_dotted(data: Mapping[str, Any]) -> Dict[str, Any]:
    """Turn ``{"schedule.n_transfer_iters": 5}`` into ``{"schedule": {"n_transfer_iters": 5}}``."""
    result: Dict[str, Any] = {}
    for key, value in data.items():
        if isinstance(value, Mapping):
            value = _expand_dotted(value)
        parts = key.split(".")
        target = result
        for part in parts[:-1]:
            target = target.setdefault(part, {})
            if not isinstance(target, dict):
                raise ConfigError("conflicts with a dotted key", key)
        leaf = parts[-1]
        if isinstance(value, dict) and isinstance(target.get(leaf), dict):
            ConfigManager._deep_update(target[leaf], value)
        else:
            target[leaf] = value
    return result


class ConfigManager:
    """Layered JSON configuration: packaged defaults < preset < user file < overrides.

    Values are read with dotted paths (``cm.get("schedule.n_transfer_iters")``). String
    values may reference ``%run_root%`` and ``%config:dotted.key%``.
    """

    def __init__(
        self,
        user_config_path: Optional[Path] = None,
        preset: Optional[str] = None,
        overrides: Optional[Mapping[str, Any]] = None,
        default_config_path: Path = DEFAULT_CONFIG,
        run_root: Optional[Path] = None,
    ):
        self.user_config_path = user_config_path
        self.default_config_path = default_config_path
        self.overrides = dict(overrides or {})
        self.run_root = run_root or default_run_root()
        self._preset_arg = preset
        self.preset: Optional[str] = None

        self.config: Dict[str, Any] = {}
        self.load_config()

    @staticmethod
    def _load_single_config(path: Path, required: bool = True) -> Dict[str, Any]:
        path = Path(path)
        if not path.is_file():
            if required:
                raise ConfigError(f"config file not found: {path}")
            return {}
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"could not decode JSON from {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"{path} must contain a JSON object")
        return _expand_dotted(data)

    def load_config(self) -> None:
        self.config = self._load_single_config(self.default_config_path)

        user_cfg: Dict[str, Any] = {}
        if self.user_config_path:
            user_cfg = self._load_single_config(self.user_config_path)
        overrides = _expand_dotted(self.overrides)

        # The --preset flag wins over a "preset" key in the user file.
        self.preset = self._preset_arg or overrides.get("preset") or user_cfg.get("preset")
        if self.preset:
            path = PRESET_DIR / f"{self.preset}.json"
            if not path.is_file():
                raise ConfigError(
                    f"unknown preset '{self.preset}'; available: {', '.join(available_presets())}",
                    "preset",
                )
            self._deep_update(self.config, self._load_single_config(path))
            logger.debug("applied preset %s", self.preset)

        self._deep_update(self.config, user_cfg)
        self._deep_update(self.config, overrides)
        self.config["preset"] = self.preset

    @staticmethod
    def _deep_update(target: Dict, source: Mapping) -> None:
        for key, value in source.items():
            if isinstance(value, Mapping) and key in target and isinstance(target[key], dict):
                ConfigManager._deep_update(target[key], value)
            else:
                target[key] = copy.deepcopy(value)

    def _resolve_value(self, value: Any, processing_key: Optional[str] = None) -> Any:
        if isinstance(value, str):
            parts = value.split("%config:")
            if len(parts) > 1:
                resolved_parts = [parts[0]]
                for part in parts[1:]:
                    end_index = part.find("%")
                    if end_index == -1:
                        resolved_parts.append(part)
                        continue
                    config_key = part[:end_index]
                    rest = part[end_index + 1 :]
                    if config_key == processing_key:
                        raise ConfigError("refers to itself", config_key)
                    resolved = self.get(config_key, default_value=f"%config:{config_key}%")
                    resolved_parts.append(str(resolved) + rest)
                value = "".join(resolved_parts)
            return value.replace("%run_root%", str(self.run_root))
        if isinstance(value, dict):
            return {k: self._resolve_value(v, processing_key) for k, v in value.items()}
        if isinstance(value, list):
            return [self._resolve_value(item, processing_key) for item in value]
        return value

    def get(self, key_path: Union[str, List[str]], default_value: Any = None) -> Any:
        keys = key_path.split(".") if isinstance(key_path, str) else list(key_path)
        current_level: Any = self.config
        for key in keys:
            if isinstance(current_level, dict) and key in current_level:
                current_level = current_level[key]
            else:
                return default_value
        return self._resolve_value(current_level, processing_key=".".join(keys))

    def resolved(self) -> Dict[str, Any]:
        """Deep copy of the whole configuration with placeholders substituted."""
        return self._resolve_value(copy.deepcopy(self.config))

    def validate(self) -> Dict[str, Any]:
        """Check the resolved configuration against the schema; return it on success."""
        data = self.resolved()
        schema = json.loads(SCHEMA_PATH.read_text(encoding="utf-8"))
        errors = sorted(
            Draft7Validator(schema).iter_errors(data),
            key=lambda e: [str(p) for p in e.absolute_path],
        )
        if errors:
            raise _to_config_error(errors[0])
        return data


def _to_config_error(error) -> ConfigError:
    path = [str(p) for p in error.absolute_path]
    if error.validator == "additionalProperties" and isinstance(error.instance, dict):
        known = set(error.schema.get("properties", {}))
        extras = sorted(k for k in error.instance if k not in known)
        if extras:
            return ConfigError("unknown config key", ".".join(path + [extras[0]]))
    key = ".".join(path) or "<root>"
    return ConfigError(error.message, key)
