"""Error vocabulary shared by all service layers.

Every error carries a stable machine-readable ``code`` (snake_case) and the
HTTP status the portal maps it to, so callers match on codes rather than
messages.
"""

from __future__ import annotations


class AnnexError(Exception):
    code = "internal"
    http_status = 500

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)

    @property
    def message(self) -> str:
        return str(self)


class ValidationFailed(AnnexError):
    code = "validation_failed"
    http_status = 400


class InvalidEnum(ValidationFailed):
    code = "invalid_enum"


class TemporalViolation(ValidationFailed):
    code = "temporal_violation"


class AnchorOutOfRange(ValidationFailed):
    code = "anchor_out_of_range"


class QuoteMismatch(ValidationFailed):
    code = "quote_mismatch"


class MissingParent(ValidationFailed):
    code = "missing_parent"


class NonMonotonicTime(ValidationFailed):
    code = "non_monotonic_time"


class TimeBeforeOpen(ValidationFailed):
    code = "time_before_open"


class EmptyQuery(AnnexError):
    code = "empty_query"
    http_status = 400


class UnknownRef(AnnexError):
    code = "unknown_ref"
    http_status = 404


class UnknownUser(UnknownRef):
    code = "unknown_user"


class UnknownDocument(UnknownRef):
    code = "unknown_document"


class DuplicateRef(AnnexError):
    code = "duplicate_ref"
    http_status = 409


class DuplicateIdentity(AnnexError):
    code = "duplicate_identity"
    http_status = 409


class DuplicatePeer(AnnexError):
    code = "duplicate_peer"
    http_status = 409


class SessionAlreadyOpen(AnnexError):
    code = "session_already_open"
    http_status = 409


class SessionClosed(AnnexError):
    code = "session_closed"
    http_status = 409


class Unauthorized(AnnexError):
    code = "unauthorized"
    http_status = 401


class TransportFailure(AnnexError):
    code = "transport_failure"
    http_status = 502


class CorruptEntry(AnnexError):
    code = "corrupt_entry"


class SequenceGap(AnnexError):
    code = "sequence_gap"
