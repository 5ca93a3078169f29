"""Builders shared across test modules.

Timestamps are fixed around BASE_AT so every expected value in the suite is
reproducible; tests that need a moving clock use ManualClock.
"""

from annex.model import (
    AnnotationAnchor,
    AnnotationRecord,
    AnnotationType,
    AnnotatorProfile,
    Approach,
    Author,
    DocumentFormat,
    DocumentRecord,
    Objective,
    Placement,
    Role,
    TypeKind,
    Visibility,
)

BASE_AT = 1_700_000_000


class ManualClock:
    """A callable clock the test advances by hand."""

    def __init__(self, now: int = BASE_AT):
        self.now = now

    def __call__(self) -> int:
        return self.now

    def advance(self, seconds: int) -> int:
        self.now += seconds
        return self.now


def make_profile(ref: str, *, role: Role = Role.WATCHER,
                 first_name: str = "Ada", last_name: str = "Weber",
                 email: str | None = None, country: str = "UK",
                 region: str = "Lothian", activity_area: str = "audit",
                 created_at: int = BASE_AT) -> AnnotatorProfile:
    return AnnotatorProfile(
        annotator_ref=ref,
        role=role,
        first_name=first_name,
        last_name=last_name,
        email=email if email is not None else f"{ref}@example.org",
        postal_address="1 Elm Row",
        region=region,
        country=country,
        activity_area=activity_area,
        created_at=created_at,
    )


def make_document(ref: str, *, body: str = "accounting principles",
                  title: str = "Ledger basics",
                  descriptors: tuple[str, ...] = ("finance",),
                  authors: tuple[Author, ...] = (Author("Ada", "Weber"),),
                  abstract: str = "A short primer.",
                  available_at: int = BASE_AT,
                  published_at: int | None = None) -> DocumentRecord:
    return DocumentRecord(
        document_ref=ref,
        title=title,
        descriptors=descriptors,
        authors=authors,
        published_at=published_at if published_at is not None
        else available_at - 86_400,
        format=DocumentFormat.TEXT,
        abstract=abstract,
        body=body,
        available_at=available_at,
    )


def make_annotation(ref: str, doc: DocumentRecord, user: str = "u1", *,
                    start: int = 0, end: int | None = None,
                    quoted: str | None = None,
                    placement: Placement = Placement.IN_MARGIN,
                    origin: str = "local", session_ref: str = "s1",
                    body_text: str = "note",
                    objective: Objective = Objective.EVALUATION,
                    ann_type: AnnotationType = AnnotationType(TypeKind.TEXT),
                    approach: Approach = Approach.NEW,
                    parent: str | None = None,
                    visibility: Visibility = Visibility.SERVER_SHARED,
                    group_id: str | None = None,
                    created_at: int | None = None) -> AnnotationRecord:
    if end is None:
        end = min(4, len(doc.body))
    if quoted is None:
        quoted = doc.body[start:end]
    return AnnotationRecord(
        context_ref=ref,
        origin_system=origin,
        annotator_ref=user,
        anchor=AnnotationAnchor(doc.document_ref, start, end, quoted, placement),
        ann_type=ann_type,
        objective=objective,
        body_text=body_text,
        approach=approach,
        parent_context_ref=parent,
        session_ref=session_ref,
        created_at=created_at if created_at is not None
        else doc.available_at + 10,
        visibility=visibility,
        group_id=group_id,
    )
