"""Exception types shared across the package."""


class TransitKitError(Exception):
    """Base class for all package errors."""

    code = "error"

    def __init__(self, message, entity=None):
        super().__init__(message)
        self.entity = entity


# --- feed parsing / validation ---

class MissingFile(TransitKitError):
    code = "missing-file"


class MalformedRow(TransitKitError):
    code = "malformed-row"


class NoServiceData(TransitKitError):
    code = "no-service-data"


class DegenerateTrip(TransitKitError):
    code = "degenerate-trip"


class DegeneratePattern(TransitKitError):
    code = "degenerate-pattern"


class ValidationFailed(TransitKitError):
    code = "validation-failed"


# --- store persistence ---

class ForeignKeyViolation(TransitKitError):
    code = "foreign-key-violation"


class CountMismatch(TransitKitError):
    code = "count-mismatch"


class NotAStore(TransitKitError):
    code = "not-a-store"


# --- graph building ---

class NoCandidateLink(TransitKitError):
    code = "no-candidate-link"


class DisconnectedTransitNode(TransitKitError):
    code = "disconnected-transit-node"


class UnmappableStop(TransitKitError):
    code = "unmappable-stop"


class NoDrivingPath(TransitKitError):
    code = "no-driving-path"


class UnanchoredLocation(TransitKitError):
    code = "unanchored-location"


# --- routing ---

class NoPath(TransitKitError):
    code = "no-path"


class ModeUnreachable(TransitKitError):
    code = "mode-unreachable"


class NoParkingRecord(TransitKitError):
    code = "no-parking-record"


# --- assignment ---

class NonPositiveRouted(TransitKitError):
    code = "non-positive-routed"


class BinMismatch(TransitKitError):
    code = "bin-mismatch"


# --- simulation ---

class MappingExhausted(TransitKitError):
    code = "mapping-exhausted"


# --- scenario / editing ---

class UnknownKey(TransitKitError):
    code = "unknown-key"


class InvalidValue(TransitKitError):
    code = "invalid-value"


class IoFailure(TransitKitError):
    code = "io-failure"


class UnknownStop(TransitKitError):
    code = "unknown-stop"


class EmptyWindow(TransitKitError):
    code = "empty-window"


class InvalidTimetable(TransitKitError):
    code = "invalid-timetable"


class DoubleClose(TransitKitError):
    code = "double-close"
