"""
Exception hierarchy shared by the library and the CLI
"""
from typing import Optional


class SkyfairError(Exception):
    """Base class for all simulator errors"""


class ConfigurationError(SkyfairError):
    """Invalid or inconsistent configuration value"""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field and field not in message:
            message = f"{field}: {message}"
        super().__init__(message)


class DomainError(SkyfairError, ValueError):
    """Argument outside the mathematical domain of an operation"""


class StateError(SkyfairError):
    """Simulation state does not satisfy an operation's precondition"""


class QTableIncompatibleError(SkyfairError):
    """Persisted Q-table does not match the active lattice or schema version"""


class QTableParseError(SkyfairError):
    """Malformed Q-table file"""

    def __init__(self, message: str, line_no: int):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")
