from typing import Iterable, Optional


class AtepError(Exception):
    """Base class for every operation-level error raised by the package."""


class ConfigError(AtepError):
    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        if key:
            message = f"{key}: {message}"
        super().__init__(message)


class ContractError(AtepError, ValueError):
    """A caller broke a precondition (arity mismatch, empty population, ...)."""


class MalformedGenomeError(AtepError):
    pass


class EvaluationOrderError(AtepError):
    """Fitness was read before the genome was evaluated."""


class CheckpointError(AtepError):
    pass


class GeneralizationShortfallError(AtepError):
    def __init__(self, method: str, available: int, required: int):
        self.method = method
        self.available = available
        self.required = required
        super().__init__(
            f"method '{method}' has {available} solved environments, {required} required"
        )


class UnknownSeriesError(AtepError):
    def __init__(self, name: str, valid: Iterable[str]):
        self.name = name
        self.valid = sorted(valid)
        super().__init__(f"unknown series '{name}'; valid names: {', '.join(self.valid)}")


class RunDirectoryError(AtepError):
    """Run directory is missing, incomplete, or would be overwritten."""
