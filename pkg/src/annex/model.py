"""Domain records: annotators, documents, anchored annotations, sessions.

All records are immutable values (frozen dataclasses) that are safe to share
between threads. Each type round-trips through a canonical JSON object whose
field names match the record fields; enum values encode as lowercase
snake_case strings, and enum values that carry a payload encode as an object
with a "kind" key plus the payload field (for example
``{"kind": "typographic", "subtype": "italics"}``).

Timestamps are integer UTC seconds. Generated identifiers are 128-bit random
values rendered as 32 lowercase hex characters, so independently running
systems can mint ids without coordination.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Mapping

from .errors import (
    AnchorOutOfRange,
    InvalidEnum,
    MissingParent,
    QuoteMismatch,
    TemporalViolation,
    UnknownDocument,
    ValidationFailed,
)


def new_ref() -> str:
    """Mint a collision-free opaque identifier (32 lowercase hex chars)."""
    return secrets.token_hex(16)


def new_token() -> str:
    """Mint a federation shared secret (64 lowercase hex chars)."""
    return secrets.token_hex(32)


# ---------------------------------------------------------------------------
# Enums
# ---------------------------------------------------------------------------


class Role(str, Enum):
    WATCHER = "watcher"
    DECISION_MAKER = "decision_maker"


class DocumentFormat(str, Enum):
    PDF = "pdf"
    WORD = "word"
    HTML = "html"
    TEXT = "text"
    OTHER = "other"


class Placement(str, Enum):
    IN_MARGIN = "in_margin"
    FOOTNOTE = "footnote"
    ENDNOTE = "endnote"
    GUTTER = "gutter"
    INLINE = "inline"
    WHOLE_DOCUMENT = "whole_document"


class TypeKind(str, Enum):
    MARKING = "marking"
    TYPOGRAPHIC = "typographic"
    REFORMATTING = "reformatting"
    PASSAGE_NUMBERING = "passage_numbering"
    TEXT = "text"
    ICON = "icon"
    SYMBOL_RELATION = "symbol_relation"


class TypographicStyle(str, Enum):
    ITALICS = "italics"
    UNDERLINING = "underlining"
    OTHER = "other"


class IconSymbol(str, Enum):
    STAR = "star"
    QUESTION_MARK = "question_mark"
    EXCLAMATION_MARK = "exclamation_mark"
    OTHER = "other"


class Objective(str, Enum):
    RECAPITULATION = "recapitulation"
    EVALUATION = "evaluation"
    SUMMARY = "summary"
    RAISE_A_POINT = "raise_a_point"
    CLASSIFICATION = "classification"
    STRUCTURING = "structuring"
    DIFFERENTIATING = "differentiating"
    FOR_INFORMATION = "for_information"
    ANSWER_TO_QUESTION = "answer_to_question"
    ILLUSTRATION = "illustration"
    EXTENSION_OF_DOCUMENT = "extension_of_document"
    CLARIFY_AMBIGUITY = "clarify_ambiguity"


class Approach(str, Enum):
    NEW = "new"
    FOLLOW_UP = "follow_up"


class Visibility(str, Enum):
    SERVER_SHARED = "server_shared"
    LOCAL_PRIVATE = "local_private"
    PROXY_GROUP = "proxy_group"


class EventKind(str, Enum):
    QUERY_ISSUED = "query_issued"
    DOCUMENT_CONSULTED = "document_consulted"
    ANNOTATION_CREATED = "annotation_created"


def _parse_enum(enum_cls: type, raw: Any, what: str) -> Any:
    try:
        return enum_cls(raw)
    except (ValueError, TypeError):
        raise InvalidEnum(f"{what}: {raw!r} is not one of "
                          f"{[e.value for e in enum_cls]}")


def _req(data: Mapping[str, Any], key: str, what: str) -> Any:
    if key not in data:
        raise ValidationFailed(f"{what}: missing field {key!r}")
    return data[key]


def _req_int(data: Mapping[str, Any], key: str, what: str) -> int:
    value = _req(data, key, what)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationFailed(f"{what}: field {key!r} must be an integer")
    return value


def _req_str(data: Mapping[str, Any], key: str, what: str) -> str:
    value = _req(data, key, what)
    if not isinstance(value, str):
        raise ValidationFailed(f"{what}: field {key!r} must be a string")
    return value


# ---------------------------------------------------------------------------
# Annotator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnnotatorProfile:
    """A registered user; every user is a potential annotator."""

    annotator_ref: str
    role: Role
    first_name: str
    last_name: str
    email: str
    postal_address: str
    region: str
    country: str
    activity_area: str
    created_at: int

    def __post_init__(self):
        if not self.annotator_ref:
            raise ValidationFailed("annotator_ref must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        return {
            "annotator_ref": self.annotator_ref,
            "role": self.role.value,
            "first_name": self.first_name,
            "last_name": self.last_name,
            "email": self.email,
            "postal_address": self.postal_address,
            "region": self.region,
            "country": self.country,
            "activity_area": self.activity_area,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "AnnotatorProfile":
        what = "AnnotatorProfile"
        return cls(
            annotator_ref=_req_str(data, "annotator_ref", what),
            role=_parse_enum(Role, _req(data, "role", what), "role"),
            first_name=_req_str(data, "first_name", what),
            last_name=_req_str(data, "last_name", what),
            email=_req_str(data, "email", what),
            postal_address=_req_str(data, "postal_address", what),
            region=_req_str(data, "region", what),
            country=_req_str(data, "country", what),
            activity_area=_req_str(data, "activity_area", what),
            created_at=_req_int(data, "created_at", what),
        )


# ---------------------------------------------------------------------------
# Document
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Author:
    first_name: str
    last_name: str

    def to_dict(self) -> dict[str, str]:
        return {"first_name": self.first_name, "last_name": self.last_name}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Author":
        return cls(
            first_name=_req_str(data, "first_name", "Author"),
            last_name=_req_str(data, "last_name", "Author"),
        )


@dataclass(frozen=True)
class DocumentRecord:
    """A host document, normalized to extracted plain text at ingestion.

    ``body`` is the text used for both indexing and anchoring; ``available_at``
    is when the record entered this system (it may be earlier or later than
    ``published_at``).
    """

    document_ref: str
    title: str
    descriptors: tuple[str, ...]
    authors: tuple[Author, ...]
    published_at: int
    format: DocumentFormat
    abstract: str
    body: str
    available_at: int
    format_label: str | None = None

    def __post_init__(self):
        if not self.document_ref:
            raise ValidationFailed("document_ref must be non-empty")
        if self.available_at <= 0:
            raise ValidationFailed("available_at must be positive")
        if self.format is DocumentFormat.OTHER:
            if not self.format_label:
                raise InvalidEnum("format 'other' requires a label")
        elif self.format_label is not None:
            raise InvalidEnum(f"format {self.format.value!r} takes no label")

    def to_dict(self) -> dict[str, Any]:
        if self.format is DocumentFormat.OTHER:
            fmt: Any = {"kind": "other", "label": self.format_label}
        else:
            fmt = self.format.value
        return {
            "document_ref": self.document_ref,
            "title": self.title,
            "descriptors": list(self.descriptors),
            "authors": [a.to_dict() for a in self.authors],
            "published_at": self.published_at,
            "format": fmt,
            "abstract": self.abstract,
            "body": self.body,
            "available_at": self.available_at,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any],
                  default_available_at: int | None = None) -> "DocumentRecord":
        """Decode a canonical document object.

        ``default_available_at`` backs the ingestion rule that a document
        without an availability timestamp becomes available when ingested.
        """
        what = "DocumentRecord"
        raw_fmt = _req(data, "format", what)
        if isinstance(raw_fmt, str):
            fmt = _parse_enum(DocumentFormat, raw_fmt, "format")
            if fmt is DocumentFormat.OTHER:
                raise InvalidEnum("format 'other' requires a label")
            label = None
        elif isinstance(raw_fmt, Mapping):
            fmt = _parse_enum(DocumentFormat, raw_fmt.get("kind"), "format")
            label = raw_fmt.get("label")
        else:
            raise InvalidEnum(f"format: {raw_fmt!r}")
        if "available_at" in data:
            available_at = _req_int(data, "available_at", what)
        elif default_available_at is not None:
            available_at = default_available_at
        else:
            raise ValidationFailed(f"{what}: missing field 'available_at'")
        descriptors = _req(data, "descriptors", what)
        authors = _req(data, "authors", what)
        if not isinstance(descriptors, list) or not isinstance(authors, list):
            raise ValidationFailed(f"{what}: descriptors and authors must be lists")
        return cls(
            document_ref=_req_str(data, "document_ref", what),
            title=_req_str(data, "title", what),
            descriptors=tuple(str(d) for d in descriptors),
            authors=tuple(Author.from_dict(a) for a in authors),
            published_at=_req_int(data, "published_at", what),
            format=fmt,
            abstract=_req_str(data, "abstract", what),
            body=_req_str(data, "body", what),
            available_at=available_at,
            format_label=label,
        )


# ---------------------------------------------------------------------------
# Annotation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnnotationAnchor:
    """Where an annotation attaches: a character span of the document body.

    Offsets index the extracted plain text (start inclusive, end exclusive).
    ``whole_document`` placements carry offsets (0, 0) and an empty quote.
    """

    document_ref: str
    start_offset: int
    end_offset: int
    quoted_text: str
    placement: Placement

    def to_dict(self) -> dict[str, Any]:
        return {
            "document_ref": self.document_ref,
            "start_offset": self.start_offset,
            "end_offset": self.end_offset,
            "quoted_text": self.quoted_text,
            "placement": self.placement.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "AnnotationAnchor":
        what = "AnnotationAnchor"
        return cls(
            document_ref=_req_str(data, "document_ref", what),
            start_offset=_req_int(data, "start_offset", what),
            end_offset=_req_int(data, "end_offset", what),
            quoted_text=_req_str(data, "quoted_text", what),
            placement=_parse_enum(Placement, _req(data, "placement", what),
                                  "placement"),
        )


_SUBTYPED_KINDS = {TypeKind.TYPOGRAPHIC: TypographicStyle,
                   TypeKind.ICON: IconSymbol}


@dataclass(frozen=True)
class AnnotationType:
    """Closed taxonomy of annotation forms; subtype present iff the kind
    is typographic (style) or icon (symbol)."""

    kind: TypeKind
    subtype: TypographicStyle | IconSymbol | None = None

    def __post_init__(self):
        sub_cls = _SUBTYPED_KINDS.get(self.kind)
        if sub_cls is None:
            if self.subtype is not None:
                raise InvalidEnum(f"kind {self.kind.value!r} takes no subtype")
        elif not isinstance(self.subtype, sub_cls):
            raise InvalidEnum(
                f"kind {self.kind.value!r} requires a {sub_cls.__name__} subtype")

    def to_dict(self) -> Any:
        if self.subtype is None:
            return self.kind.value
        return {"kind": self.kind.value, "subtype": self.subtype.value}

    @classmethod
    def from_dict(cls, raw: Any) -> "AnnotationType":
        if isinstance(raw, str):
            kind = _parse_enum(TypeKind, raw, "ann_type")
            return cls(kind=kind)
        if isinstance(raw, Mapping):
            kind = _parse_enum(TypeKind, raw.get("kind"), "ann_type")
            sub_cls = _SUBTYPED_KINDS.get(kind)
            if sub_cls is None:
                raise InvalidEnum(f"ann_type {kind.value!r} takes no subtype")
            subtype = _parse_enum(sub_cls, raw.get("subtype"),
                                  f"ann_type {kind.value} subtype")
            return cls(kind=kind, subtype=subtype)
        raise InvalidEnum(f"ann_type: {raw!r}")


@dataclass(frozen=True)
class AnnotationRecord:
    """One annotation act. Identity is the pair (origin_system, context_ref),
    globally unique across federated systems.

    The triple (annotator_ref, anchor.document_ref, created_at) is always
    populated: an annotation is inseparable from who made it, on what, and
    when.
    """

    context_ref: str
    origin_system: str
    annotator_ref: str
    anchor: AnnotationAnchor
    ann_type: AnnotationType
    objective: Objective
    body_text: str
    approach: Approach
    session_ref: str
    created_at: int
    visibility: Visibility
    parent_context_ref: str | None = None
    group_id: str | None = None

    def __post_init__(self):
        if not self.context_ref:
            raise ValidationFailed("context_ref must be non-empty")
        if not self.origin_system:
            raise ValidationFailed("origin_system must be non-empty")
        if not self.annotator_ref:
            raise ValidationFailed("annotator_ref must be non-empty")
        if self.approach is Approach.FOLLOW_UP:
            if not self.parent_context_ref:
                raise ValidationFailed("follow_up requires parent_context_ref")
        elif self.parent_context_ref is not None:
            raise ValidationFailed("approach 'new' takes no parent_context_ref")
        if self.visibility is Visibility.PROXY_GROUP:
            if not self.group_id:
                raise ValidationFailed("proxy_group visibility requires group_id")
        elif self.group_id is not None:
            raise ValidationFailed(
                f"visibility {self.visibility.value!r} takes no group_id")

    @property
    def identity(self) -> tuple[str, str]:
        return (self.origin_system, self.context_ref)

    def to_dict(self) -> dict[str, Any]:
        if self.approach is Approach.FOLLOW_UP:
            approach: Any = {"kind": "follow_up",
                             "parent_context_ref": self.parent_context_ref}
        else:
            approach = self.approach.value
        if self.visibility is Visibility.PROXY_GROUP:
            visibility: Any = {"kind": "proxy_group", "group_id": self.group_id}
        else:
            visibility = self.visibility.value
        return {
            "context_ref": self.context_ref,
            "origin_system": self.origin_system,
            "annotator_ref": self.annotator_ref,
            "anchor": self.anchor.to_dict(),
            "ann_type": self.ann_type.to_dict(),
            "objective": self.objective.value,
            "body_text": self.body_text,
            "approach": approach,
            "session_ref": self.session_ref,
            "created_at": self.created_at,
            "visibility": visibility,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "AnnotationRecord":
        what = "AnnotationRecord"
        raw_approach = _req(data, "approach", what)
        parent = None
        if isinstance(raw_approach, str):
            approach = _parse_enum(Approach, raw_approach, "approach")
            if approach is Approach.FOLLOW_UP:
                raise ValidationFailed("follow_up requires parent_context_ref")
        elif isinstance(raw_approach, Mapping):
            approach = _parse_enum(Approach, raw_approach.get("kind"), "approach")
            parent = raw_approach.get("parent_context_ref")
        else:
            raise InvalidEnum(f"approach: {raw_approach!r}")
        raw_vis = _req(data, "visibility", what)
        group_id = None
        if isinstance(raw_vis, str):
            visibility = _parse_enum(Visibility, raw_vis, "visibility")
            if visibility is Visibility.PROXY_GROUP:
                raise ValidationFailed("proxy_group visibility requires group_id")
        elif isinstance(raw_vis, Mapping):
            visibility = _parse_enum(Visibility, raw_vis.get("kind"), "visibility")
            group_id = raw_vis.get("group_id")
        else:
            raise InvalidEnum(f"visibility: {raw_vis!r}")
        return cls(
            context_ref=_req_str(data, "context_ref", what),
            origin_system=_req_str(data, "origin_system", what),
            annotator_ref=_req_str(data, "annotator_ref", what),
            anchor=AnnotationAnchor.from_dict(_req(data, "anchor", what)),
            ann_type=AnnotationType.from_dict(_req(data, "ann_type", what)),
            objective=_parse_enum(Objective, _req(data, "objective", what),
                                  "objective"),
            body_text=_req_str(data, "body_text", what),
            approach=approach,
            session_ref=_req_str(data, "session_ref", what),
            created_at=_req_int(data, "created_at", what),
            visibility=visibility,
            parent_context_ref=parent,
            group_id=group_id,
        )


# ---------------------------------------------------------------------------
# Sessions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SessionEvent:
    """One observed action inside a session. Exactly one payload field is
    set, matching the kind."""

    at: int
    kind: EventKind
    terms: tuple[str, ...] | None = None
    document_ref: str | None = None
    context_ref: str | None = None

    def __post_init__(self):
        payloads = {
            EventKind.QUERY_ISSUED: self.terms,
            EventKind.DOCUMENT_CONSULTED: self.document_ref,
            EventKind.ANNOTATION_CREATED: self.context_ref,
        }
        if payloads[self.kind] is None:
            raise ValidationFailed(f"event {self.kind.value!r} missing payload")
        for other, value in payloads.items():
            if other is not self.kind and value is not None:
                raise ValidationFailed(
                    f"event {self.kind.value!r} has stray {other.value!r} payload")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"at": self.at, "kind": self.kind.value}
        if self.kind is EventKind.QUERY_ISSUED:
            out["terms"] = list(self.terms or ())
        elif self.kind is EventKind.DOCUMENT_CONSULTED:
            out["document_ref"] = self.document_ref
        else:
            out["context_ref"] = self.context_ref
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SessionEvent":
        what = "SessionEvent"
        kind = _parse_enum(EventKind, _req(data, "kind", what), "event kind")
        at = _req_int(data, "at", what)
        if kind is EventKind.QUERY_ISSUED:
            terms = _req(data, "terms", what)
            if not isinstance(terms, list):
                raise ValidationFailed(f"{what}: terms must be a list")
            return cls(at=at, kind=kind, terms=tuple(str(t) for t in terms))
        if kind is EventKind.DOCUMENT_CONSULTED:
            return cls(at=at, kind=kind,
                       document_ref=_req_str(data, "document_ref", what))
        return cls(at=at, kind=kind,
                   context_ref=_req_str(data, "context_ref", what))


@dataclass(frozen=True)
class SessionContext:
    """One user session: a closed interval of activity with ordered events."""

    session_ref: str
    annotator_ref: str
    opened_at: int
    closed_at: int | None = None
    events: tuple[SessionEvent, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.closed_at is not None and self.closed_at < self.opened_at:
            raise ValidationFailed("closed_at before opened_at")
        last = None
        for event in self.events:
            if last is not None and event.at < last:
                raise ValidationFailed("session events not time-ordered")
            last = event.at

    @property
    def is_open(self) -> bool:
        return self.closed_at is None

    @property
    def last_activity_at(self) -> int:
        if self.events:
            return self.events[-1].at
        return self.opened_at

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "session_ref": self.session_ref,
            "annotator_ref": self.annotator_ref,
            "opened_at": self.opened_at,
            "events": [e.to_dict() for e in self.events],
        }
        if self.closed_at is not None:
            out["closed_at"] = self.closed_at
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SessionContext":
        what = "SessionContext"
        events = _req(data, "events", what)
        if not isinstance(events, list):
            raise ValidationFailed(f"{what}: events must be a list")
        closed_at = data.get("closed_at")
        if closed_at is not None and (isinstance(closed_at, bool)
                                      or not isinstance(closed_at, int)):
            raise ValidationFailed(f"{what}: closed_at must be an integer")
        return cls(
            session_ref=_req_str(data, "session_ref", what),
            annotator_ref=_req_str(data, "annotator_ref", what),
            opened_at=_req_int(data, "opened_at", what),
            closed_at=closed_at,
            events=tuple(SessionEvent.from_dict(e) for e in events),
        )


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

ParentLookup = Callable[[str], "AnnotationRecord | None"]


def validate_annotation(candidate: AnnotationRecord, doc: DocumentRecord,
                        parent_lookup: ParentLookup | None = None,
                        ) -> AnnotationRecord:
    """Check every annotation invariant against its host document.

    Returns the candidate unchanged when valid (idempotent: validating an
    already validated record re-runs the same pure checks). ``parent_lookup``
    resolves follow-up parents by context_ref; when omitted, any follow-up
    fails with MissingParent.
    """
    if candidate.anchor.document_ref != doc.document_ref:
        raise UnknownDocument(
            f"anchor names {candidate.anchor.document_ref!r}, "
            f"got document {doc.document_ref!r}")
    if candidate.created_at < doc.available_at:
        raise TemporalViolation(
            f"annotation at {candidate.created_at} precedes document "
            f"availability at {doc.available_at}")
    anchor = candidate.anchor
    if anchor.placement is Placement.WHOLE_DOCUMENT:
        if (anchor.start_offset, anchor.end_offset) != (0, 0):
            raise AnchorOutOfRange("whole_document anchors use offsets (0, 0)")
    else:
        if not (0 <= anchor.start_offset <= anchor.end_offset <= len(doc.body)):
            raise AnchorOutOfRange(
                f"offsets ({anchor.start_offset}, {anchor.end_offset}) outside "
                f"body of length {len(doc.body)}")
    expected = doc.body[anchor.start_offset:anchor.end_offset]
    if anchor.quoted_text != expected:
        raise QuoteMismatch(
            f"quoted_text {anchor.quoted_text!r} is not the anchored slice "
            f"{expected!r}")
    if candidate.approach is Approach.FOLLOW_UP:
        parent = parent_lookup(candidate.parent_context_ref) if parent_lookup else None
        if parent is None:
            raise MissingParent(
                f"no annotation {candidate.parent_context_ref!r} to follow up")
        if parent.anchor.document_ref != candidate.anchor.document_ref:
            raise MissingParent(
                f"parent {candidate.parent_context_ref!r} is on another document")
    return candidate


def resolve_anchor(anchor: AnnotationAnchor, doc: DocumentRecord) -> str:
    """Return the current body slice the anchor points at.

    ``whole_document`` resolves to the full body. Raises AnchorOutOfRange if
    the document body has shrunk below the anchored span since creation.
    """
    if anchor.placement is Placement.WHOLE_DOCUMENT:
        return doc.body
    if anchor.end_offset > len(doc.body):
        raise AnchorOutOfRange(
            f"end offset {anchor.end_offset} beyond body of length "
            f"{len(doc.body)}")
    return doc.body[anchor.start_offset:anchor.end_offset]
