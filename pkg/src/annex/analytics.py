"""Decision-support summaries over the annotation corpus.

Two views: counts of annotations classed by a user group (role, activity
area, or country) against a calendar bucket, and relationship graphs
(user to document, document to document via shared annotators, user to
user via co-annotated documents). Both are computed on demand over exactly
the annotations the asking user is allowed to see.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import Any

from .errors import UnknownUser
from .store import Store

SECONDS_PER_DAY = 86_400
# The epoch fell on a Thursday; shifting by 3 makes Monday the zero point.
_EPOCH_WEEKDAY_SHIFT = 3


class Grouping(str, Enum):
    BY_ROLE = "by_role"
    BY_ACTIVITY_AREA = "by_activity_area"
    BY_COUNTRY = "by_country"


class Bucket(str, Enum):
    DAY = "day"
    WEEK = "week"
    MONTH = "month"


class EdgeKind(str, Enum):
    DOC_DOC = "doc_doc"
    USER_USER = "user_user"
    USER_DOC = "user_doc"


def bucket_start(at: int, bucket: Bucket) -> int:
    """Floor a UTC timestamp to its bucket boundary: midnight, ISO week
    start (Monday), or the first of the month."""
    if bucket is Bucket.DAY:
        return at - at % SECONDS_PER_DAY
    if bucket is Bucket.WEEK:
        days = at // SECONDS_PER_DAY
        monday = days - (days + _EPOCH_WEEKDAY_SHIFT) % 7
        return monday * SECONDS_PER_DAY
    moment = datetime.fromtimestamp(at, tz=timezone.utc)
    first = datetime(moment.year, moment.month, 1, tzinfo=timezone.utc)
    return int(first.timestamp())


@dataclass(frozen=True)
class GroupTimeMatrix:
    grouping: Grouping
    bucket: Bucket
    cells: dict[tuple[str, int], int]

    @property
    def total(self) -> int:
        return sum(self.cells.values())

    def to_dict(self) -> dict[str, Any]:
        ordered = sorted(self.cells.items())
        return {
            "grouping": self.grouping.value,
            "bucket": self.bucket.value,
            "cells": [{"group": group, "bucket_start": start, "count": count}
                      for (group, start), count in ordered],
            "total": self.total,
        }


@dataclass(frozen=True)
class RelationEdge:
    kind: EdgeKind
    a_ref: str
    b_ref: str
    weight: int

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "a_ref": self.a_ref,
                "b_ref": self.b_ref, "weight": self.weight}


class AnalyticsService:
    def __init__(self, store: Store):
        self._store = store

    def group_time_counts(self, grouping: Grouping, bucket: Bucket,
                          as_user: str, **scope: Any) -> GroupTimeMatrix:
        """Count visible annotations per (group label, bucket start).

        Annotators without a stored profile (records that arrived through
        federation) land in the "unknown" group.
        """
        grouping = Grouping(grouping)
        bucket = Bucket(bucket)
        with self._store.lock:
            if as_user not in self._store.users:
                raise UnknownUser(f"no user {as_user!r}")
            cells: dict[tuple[str, int], int] = {}
            for ann in self._store.query_annotations(viewer=as_user, **scope):
                profile = self._store.users.get(ann.annotator_ref)
                if profile is None:
                    label = "unknown"
                elif grouping is Grouping.BY_ROLE:
                    label = profile.role.value
                elif grouping is Grouping.BY_ACTIVITY_AREA:
                    label = profile.activity_area
                else:
                    label = profile.country
                key = (label, bucket_start(ann.created_at, bucket))
                cells[key] = cells.get(key, 0) + 1
            return GroupTimeMatrix(grouping=grouping, bucket=bucket,
                                   cells=cells)

    def relationship_graph(self, kind: EdgeKind,
                           as_user: str) -> list[RelationEdge]:
        """Edges with weight >= 1, ordered heaviest first and then by the
        (a_ref, b_ref) pair; symmetric kinds are canonicalized a < b."""
        kind = EdgeKind(kind)
        with self._store.lock:
            visible = self._store.query_annotations(viewer=as_user)
            if kind is EdgeKind.USER_DOC:
                weights: dict[tuple[str, str], int] = {}
                for ann in visible:
                    key = (ann.annotator_ref, ann.anchor.document_ref)
                    weights[key] = weights.get(key, 0) + 1
                edges = [RelationEdge(kind, a, b, w)
                         for (a, b), w in weights.items()]
            elif kind is EdgeKind.DOC_DOC:
                users_by_doc: dict[str, set[str]] = {}
                for ann in visible:
                    users_by_doc.setdefault(ann.anchor.document_ref,
                                            set()).add(ann.annotator_ref)
                edges = self._pairwise(kind, users_by_doc)
            else:
                docs_by_user: dict[str, set[str]] = {}
                for ann in visible:
                    docs_by_user.setdefault(ann.annotator_ref,
                                            set()).add(
                                                ann.anchor.document_ref)
                edges = self._pairwise(kind, docs_by_user)
            edges.sort(key=lambda e: (-e.weight, e.a_ref, e.b_ref))
            return edges

    @staticmethod
    def _pairwise(kind: EdgeKind,
                  sets_by_ref: dict[str, set[str]]) -> list[RelationEdge]:
        refs = sorted(sets_by_ref)
        edges = []
        for i, a in enumerate(refs):
            for b in refs[i + 1:]:
                weight = len(sets_by_ref[a] & sets_by_ref[b])
                if weight:
                    edges.append(RelationEdge(kind, a, b, weight))
        return edges
