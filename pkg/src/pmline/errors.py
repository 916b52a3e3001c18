"""Exception hierarchy.

``DataError`` subclasses signal bad input (CLI exit code 2);
``InvariantError`` signals a broken internal guarantee (exit code 3).
"""


class PmlineError(Exception):
    pass


class DataError(PmlineError):
    pass


class LogFormatError(DataError):
    """A log file cannot be interpreted at all (e.g. a mapped column is missing)."""


class LogParseError(DataError):
    """A single row of a log file is malformed."""

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class MissingCaseError(DataError):
    def __init__(self, event_ids):
        shown = ", ".join(event_ids[:10])
        more = "" if len(event_ids) <= 10 else f" (+{len(event_ids) - 10} more)"
        super().__init__(f"events without case attribute: {shown}{more}")
        self.event_ids = list(event_ids)


class UnknownAttributeError(DataError):
    pass


class ConfigError(DataError):
    pass


class ModelError(DataError):
    pass


class InvariantError(PmlineError):
    pass
