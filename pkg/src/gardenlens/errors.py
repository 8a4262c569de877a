"""Exception types shared across the pipeline.

Class names follow the operation contracts so callers can catch the
exact failure they care about. The CLI maps these onto exit codes:
config errors exit 2, data errors exit 3, backend errors exit 4.
"""


class GardenlensError(Exception):
    """Base class for everything this package raises on purpose."""


# --- configuration / schema -------------------------------------------------

class ConfigError(GardenlensError):
    """Invalid configuration or reference data."""


class SchemaError(ConfigError):
    pass


class DanglingParent(ConfigError):
    pass


class DuplicateNodeId(ConfigError):
    pass


class UnknownClassInRule(ConfigError):
    pass


class KbLoadError(ConfigError):
    pass


class InvalidRoleSet(ConfigError):
    pass


# --- data -------------------------------------------------------------------

class DataError(GardenlensError):
    """Bad input data or a violated data invariant."""


class UnknownSource(DataError):
    pass


class ParseError(DataError):
    """Raised per line inside adapters; collected by parse_source, never fatal."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


class DuplicateId(DataError):
    pass


class NotFound(DataError):
    pass


class EmptyMask(DataError):
    pass


class ClassOutOfRange(DataError):
    def __init__(self, class_id: int, n_classes: int):
        super().__init__(f"class id {class_id} outside [0, {n_classes})")
        self.class_id = class_id
        self.n_classes = n_classes


class EmptyLabelList(DataError):
    pass


class EmptyText(DataError):
    pass


class OutOfRangeScore(DataError):
    pass


class InsufficientData(DataError):
    pass


class InsufficientSpread(DataError):
    pass


class OverlappingSets(DataError):
    pass


class SnapshotMismatch(DataError):
    pass


class MalformedPath(DataError):
    pass


class MalformedQuery(DataError):
    pass


class GroundingError(DataError):
    """A transcript cites a tool-result digest that is not in the tool log."""


class SessionTerminated(DataError):
    pass


# --- backends ---------------------------------------------------------------

class BackendError(GardenlensError):
    pass


class BackendUnavailable(BackendError):
    """Transport-level failure; safe to retry."""


class BackendProtocolError(BackendError):
    """The backend answered, but not in the documented wire format."""
