"""Document search, extended over the annotation corpus.

Two inverted indexes are kept: one over document fields (title,
descriptors, abstract, authors, body) and one over annotation fields
(body_text, quoted_text). A query scores a document by plain term
frequency in its own fields, plus a configurable multiple of the term
frequency inside annotations attached to it, counting only annotations the
searching user may see. This lets an annotation's words surface a document
the base index would miss.

Scores are exact rationals so equal scores are exactly equal and ordering
is reproducible; there is no stemming, stop-wording, or IDF.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Hashable, Iterable

from .errors import EmptyQuery, UnknownRef, UnknownUser
from .model import AnnotationRecord, DocumentRecord
from .store import LogEntry, LogOp, Store

_TOKEN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase maximal runs of letters and digits.

    Punctuation and underscores split tokens, so "e-mail 2024" yields
    ["e", "mail", "2024"].
    """
    return _TOKEN.findall(text.lower())


class SearchSource(str, Enum):
    DOCUMENT_MATCH = "document_match"
    ANNOTATION_EXTENDED = "annotation_extended"
    BOTH = "both"


@dataclass(frozen=True)
class SearchHit:
    document_ref: str
    score: Fraction
    source: SearchSource
    contributing_annotations: tuple[tuple[str, str], ...] = ()

    def to_dict(self) -> dict:
        return {
            "document_ref": self.document_ref,
            "score": float(self.score),
            "source": self.source.value,
            "contributing_annotations": [
                {"origin_system": origin, "context_ref": ref}
                for origin, ref in self.contributing_annotations],
        }


class _FieldIndex:
    """term -> target -> field -> term frequency, with reverse bookkeeping
    so re-indexing a target replaces its postings atomically."""

    def __init__(self):
        self._by_term: dict[str, dict[Hashable, dict[str, int]]] = {}
        self._terms_by_target: dict[Hashable, set[str]] = {}

    def replace(self, target: Hashable,
                fields: dict[str, list[str]]) -> None:
        for term in self._terms_by_target.pop(target, ()):
            postings = self._by_term[term]
            del postings[target]
            if not postings:
                del self._by_term[term]
        seen: set[str] = set()
        for fieldname, terms in fields.items():
            for term in terms:
                per_field = self._by_term.setdefault(term, {}) \
                    .setdefault(target, {})
                per_field[fieldname] = per_field.get(fieldname, 0) + 1
                seen.add(term)
        if seen:
            self._terms_by_target[target] = seen

    def targets(self, term: str) -> Iterable[Hashable]:
        return self._by_term.get(term, {}).keys()

    def tf(self, term: str, target: Hashable) -> int:
        return sum(self._by_term.get(term, {}).get(target, {}).values())

    def snapshot(self) -> dict:
        return {term: {repr(target): dict(sorted(fields.items()))
                       for target, fields in sorted(postings.items(),
                                                    key=lambda kv: repr(kv[0]))}
                for term, postings in sorted(self._by_term.items())}


def _document_fields(doc: DocumentRecord) -> dict[str, list[str]]:
    return {
        "title": tokenize(doc.title),
        "descriptors": [t for d in doc.descriptors for t in tokenize(d)],
        "abstract": tokenize(doc.abstract),
        "authors": [t for a in doc.authors
                    for t in tokenize(f"{a.first_name} {a.last_name}")],
        "body": tokenize(doc.body),
    }


def _annotation_fields(ann: AnnotationRecord) -> dict[str, list[str]]:
    return {
        "body_text": tokenize(ann.body_text),
        "quoted_text": tokenize(ann.anchor.quoted_text),
    }


class SearchService:
    """Query evaluation over indexes maintained from the store's log."""

    def __init__(self, store: Store,
                 annotation_weight: Fraction = Fraction(1)):
        if annotation_weight < 0:
            raise ValueError("annotation_weight must be non-negative")
        self._store = store
        self._weight = annotation_weight
        self._docs = _FieldIndex()
        self._anns = _FieldIndex()
        store.attach_listener(self._on_entry)

    @property
    def annotation_weight(self) -> Fraction:
        return self._weight

    def _on_entry(self, entry: LogEntry) -> None:
        if entry.op is LogOp.PUT_DOCUMENT:
            ref = entry.payload["document"]["document_ref"]
            self._docs.replace(ref, _document_fields(
                self._store.documents[ref]))
        elif entry.op is LogOp.PUT_ANNOTATION:
            raw = entry.payload["annotation"]
            identity = (raw["origin_system"], raw["context_ref"])
            self._anns.replace(identity, _annotation_fields(
                self._store.annotations[identity]))

    def index_upsert(self, target: DocumentRecord | AnnotationRecord) -> None:
        """Replace the postings for one record already present in the store."""
        with self._store.lock:
            if isinstance(target, DocumentRecord):
                if target.document_ref not in self._store.documents:
                    raise UnknownRef(
                        f"document {target.document_ref!r} not stored")
                self._docs.replace(target.document_ref,
                                   _document_fields(target))
            else:
                if target.identity not in self._store.annotations:
                    raise UnknownRef(
                        f"annotation {target.identity!r} not stored")
                self._anns.replace(target.identity,
                                   _annotation_fields(target))

    def index_snapshot(self) -> dict:
        with self._store.lock:
            return {"documents": self._docs.snapshot(),
                    "annotations": self._anns.snapshot()}

    # -- queries ---------------------------------------------------------------

    def _query_terms(self, query: str | Iterable[str]) -> list[str]:
        parts = [query] if isinstance(query, str) else list(query)
        terms = [t for part in parts for t in tokenize(part)]
        if not terms:
            raise EmptyQuery("no searchable terms in query")
        return terms

    def search_base(self, query: str | Iterable[str], as_user: str,
                    limit: int | None = None) -> list[SearchHit]:
        with self._store.lock:
            terms = self._query_terms(query)
            if as_user not in self._store.users:
                raise UnknownUser(f"no user {as_user!r}")
            scores = self._base_scores(terms)
            hits = [SearchHit(ref, score, SearchSource.DOCUMENT_MATCH)
                    for ref, score in scores.items()]
            return self._ranked(hits, limit)

    def search_extended(self, query: str | Iterable[str], as_user: str,
                        limit: int | None = None) -> list[SearchHit]:
        with self._store.lock:
            terms = self._query_terms(query)
            if as_user not in self._store.users:
                raise UnknownUser(f"no user {as_user!r}")
            base = self._base_scores(terms)
            ann_scores: dict[str, Fraction] = {}
            contributors: dict[str, set[tuple[str, str]]] = {}
            for term in terms:
                for identity in self._anns.targets(term):
                    ann = self._store.annotations[identity]
                    if not self._store.visible_to(ann, as_user):
                        continue
                    doc_ref = ann.anchor.document_ref
                    tf = self._anns.tf(term, identity)
                    ann_scores[doc_ref] = ann_scores.get(
                        doc_ref, Fraction(0)) + tf
                    contributors.setdefault(doc_ref, set()).add(identity)
            hits = []
            for ref in base.keys() | ann_scores.keys():
                base_score = base.get(ref, Fraction(0))
                extension = ann_scores.get(ref, Fraction(0))
                if ref in base and ref in ann_scores:
                    source = SearchSource.BOTH
                elif ref in base:
                    source = SearchSource.DOCUMENT_MATCH
                else:
                    source = SearchSource.ANNOTATION_EXTENDED
                hits.append(SearchHit(
                    document_ref=ref,
                    score=base_score + self._weight * extension,
                    source=source,
                    contributing_annotations=tuple(
                        sorted(contributors.get(ref, ()))),
                ))
            return self._ranked(hits, limit)

    def _base_scores(self, terms: list[str]) -> dict[str, Fraction]:
        scores: dict[str, Fraction] = {}
        for term in terms:
            for ref in self._docs.targets(term):
                scores[ref] = scores.get(ref, Fraction(0)) \
                    + self._docs.tf(term, ref)
        return scores

    @staticmethod
    def _ranked(hits: list[SearchHit],
                limit: int | None) -> list[SearchHit]:
        hits.sort(key=lambda h: (-h.score, h.document_ref))
        return hits if limit is None else hits[:limit]
