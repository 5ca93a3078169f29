"""Append-only transaction log and the state folded from it.

Every durable fact enters through exactly one code path: an entry appended
to ``log.ndjson`` (one JSON object per line, fsynced before the call
returns). In-memory state is a pure fold over the entries, so reopening the
same directory reconstructs users, documents, annotations, sessions, peers
and cursors exactly. Derived structures (search indexes, profiles, peer
tables) subscribe as listeners and are rebuilt by the same fold.

Group membership is deliberately not logged: the entry vocabulary is closed,
so groups live in a ``groups.json`` sidecar next to the log.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable

from .errors import (
    CorruptEntry,
    DuplicateIdentity,
    DuplicatePeer,
    DuplicateRef,
    NonMonotonicTime,
    SequenceGap,
    SessionAlreadyOpen,
    SessionClosed,
    TemporalViolation,
    TimeBeforeOpen,
    Unauthorized,
    UnknownDocument,
    UnknownRef,
    UnknownUser,
)
from .model import (
    AnnotationRecord,
    AnnotatorProfile,
    DocumentFormat,
    DocumentRecord,
    EventKind,
    SessionContext,
    SessionEvent,
    validate_annotation,
)

LOG_FILENAME = "log.ndjson"
GROUPS_FILENAME = "groups.json"


class LogOp(str, Enum):
    PUT_USER = "put_user"
    PUT_DOCUMENT = "put_document"
    PUT_ANNOTATION = "put_annotation"
    OPEN_SESSION = "open_session"
    APPEND_EVENT = "append_event"
    CLOSE_SESSION = "close_session"
    REGISTER_PEER = "register_peer"
    SET_CURSOR = "set_cursor"


@dataclass(frozen=True)
class LogEntry:
    """One line of the log. ``seq`` is dense starting at 1; ``at`` is the
    wall-clock append time; ``payload`` is canonical JSON for the op."""

    seq: int
    at: int
    op: LogOp
    payload: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {"seq": self.seq, "at": self.at, "op": self.op.value,
                "payload": self.payload}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "LogEntry":
        try:
            op = LogOp(data["op"])
            return cls(seq=int(data["seq"]), at=int(data["at"]), op=op,
                       payload=dict(data["payload"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptEntry(f"undecodable log entry: {exc}") from exc


Listener = Callable[[LogEntry], None]
Clock = Callable[[], int]


class Store:
    """The single writer for one system's state.

    ``data_dir=None`` keeps everything in memory (handy for tests and for
    scratch peers). All public methods are safe to call from multiple
    threads; pass a shared ``lock`` to serialize a store with the services
    built on top of it.
    """

    def __init__(self, data_dir: str | os.PathLike | None = None, *,
                 clock: Clock | None = None,
                 lock: threading.RLock | None = None,
                 fsync: bool = True):
        self._dir = Path(data_dir) if data_dir is not None else None
        self._clock = clock or (lambda: int(time.time()))
        self._lock = lock or threading.RLock()
        self._fsync = fsync
        self._listeners: list[Listener] = []

        self.entries: list[LogEntry] = []
        self.users: dict[str, AnnotatorProfile] = {}
        self.credentials: dict[str, dict[str, Any]] = {}
        self.documents: dict[str, DocumentRecord] = {}
        self.annotations: dict[tuple[str, str], AnnotationRecord] = {}
        self._by_context_ref: dict[str, list[tuple[str, str]]] = {}
        self.sessions: dict[str, SessionContext] = {}
        self.open_session_by_user: dict[str, str] = {}
        self.peers_raw: dict[str, dict[str, Any]] = {}
        self.cursors: dict[tuple[str, str], int] = {}
        self.groups: dict[str, tuple[str, ...]] = {}

        if self._dir is not None:
            self._dir.mkdir(parents=True, exist_ok=True)
            self._load_groups()

    # -- lifecycle ----------------------------------------------------------

    @property
    def lock(self) -> threading.RLock:
        return self._lock

    @property
    def log_path(self) -> Path | None:
        return self._dir / LOG_FILENAME if self._dir is not None else None

    def attach_listener(self, listener: Listener) -> None:
        """Register a fold function. Attach every listener before ``load``
        so replayed entries and live appends flow through the same code."""
        self._listeners.append(listener)

    def load(self) -> int:
        """Fold the on-disk log into memory. Returns the entry count."""
        with self._lock:
            if self._dir is None or not self.log_path.exists():
                return 0
            count = 0
            with open(self.log_path, "r", encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        raw = json.loads(line)
                    except json.JSONDecodeError as exc:
                        raise CorruptEntry(
                            f"line {lineno} is not valid JSON: {exc}") from exc
                    entry = LogEntry.from_dict(raw)
                    expected = self.entries[-1].seq + 1 if self.entries else 1
                    if entry.seq != expected:
                        raise SequenceGap(
                            f"line {lineno}: seq {entry.seq}, expected {expected}")
                    self._apply(entry)
                    count += 1
            return count

    # -- group sidecar ------------------------------------------------------

    def _groups_path(self) -> Path | None:
        return self._dir / GROUPS_FILENAME if self._dir is not None else None

    def _load_groups(self) -> None:
        path = self._groups_path()
        if path is None or not path.exists():
            return
        raw = json.loads(path.read_text(encoding="utf-8"))
        self.groups = {gid: tuple(members) for gid, members in raw.items()}

    def set_group(self, group_id: str, members: Iterable[str]) -> None:
        with self._lock:
            self.groups[group_id] = tuple(dict.fromkeys(members))
            path = self._groups_path()
            if path is not None:
                encoded = {gid: list(m) for gid, m in sorted(self.groups.items())}
                path.write_text(json.dumps(encoded, indent=2) + "\n",
                                encoding="utf-8")

    def add_group_member(self, group_id: str, annotator_ref: str) -> None:
        with self._lock:
            if annotator_ref not in self.users:
                raise UnknownUser(f"no user {annotator_ref!r}")
            current = self.groups.get(group_id, ())
            if annotator_ref not in current:
                self.set_group(group_id, current + (annotator_ref,))

    # -- append machinery ---------------------------------------------------

    def _append(self, op: LogOp, payload: dict[str, Any],
                at: int | None = None) -> LogEntry:
        entry = LogEntry(
            seq=self.entries[-1].seq + 1 if self.entries else 1,
            at=self._clock() if at is None else at,
            op=op,
            payload=payload,
        )
        if self._dir is not None:
            line = json.dumps(entry.to_dict(), separators=(",", ":"),
                              ensure_ascii=False)
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                if self._fsync:
                    os.fsync(fh.fileno())
        self._apply(entry)
        return entry

    def _apply(self, entry: LogEntry) -> None:
        """Fold one entry into state, then notify listeners. The log is
        authoritative here: no business checks, those ran before append."""
        payload = entry.payload
        op = entry.op
        if op is LogOp.PUT_USER:
            profile = AnnotatorProfile.from_dict(payload["profile"])
            self.users[profile.annotator_ref] = profile
            credential = payload.get("credential")
            if credential is not None:
                self.credentials[profile.annotator_ref] = credential
        elif op is LogOp.PUT_DOCUMENT:
            doc = DocumentRecord.from_dict(payload["document"])
            self.documents[doc.document_ref] = doc
        elif op is LogOp.PUT_ANNOTATION:
            ann = AnnotationRecord.from_dict(payload["annotation"])
            self.annotations[ann.identity] = ann
            self._by_context_ref.setdefault(ann.context_ref, []).append(
                ann.identity)
        elif op is LogOp.OPEN_SESSION:
            session = SessionContext(
                session_ref=payload["session_ref"],
                annotator_ref=payload["annotator_ref"],
                opened_at=payload["opened_at"])
            self.sessions[session.session_ref] = session
            self.open_session_by_user[session.annotator_ref] = session.session_ref
        elif op is LogOp.APPEND_EVENT:
            session = self.sessions[payload["session_ref"]]
            event = SessionEvent.from_dict(payload["event"])
            self.sessions[session.session_ref] = SessionContext(
                session_ref=session.session_ref,
                annotator_ref=session.annotator_ref,
                opened_at=session.opened_at,
                closed_at=session.closed_at,
                events=session.events + (event,))
        elif op is LogOp.CLOSE_SESSION:
            session = self.sessions[payload["session_ref"]]
            self.sessions[session.session_ref] = SessionContext(
                session_ref=session.session_ref,
                annotator_ref=session.annotator_ref,
                opened_at=session.opened_at,
                closed_at=payload["closed_at"],
                events=session.events)
            self.open_session_by_user.pop(session.annotator_ref, None)
        elif op is LogOp.REGISTER_PEER:
            peer = dict(payload["peer"])
            self.peers_raw[peer["peer_id"]] = peer
        elif op is LogOp.SET_CURSOR:
            key = (payload["peer_id"], payload["cursor_kind"])
            self.cursors[key] = payload["value"]
        self.entries.append(entry)
        for listener in self._listeners:
            listener(entry)

    # -- users --------------------------------------------------------------

    def put_user(self, profile: AnnotatorProfile,
                 credential: dict[str, Any] | None = None) -> LogEntry:
        with self._lock:
            if profile.annotator_ref in self.users:
                raise DuplicateRef(f"user {profile.annotator_ref!r} exists")
            return self._append(LogOp.PUT_USER, {
                "profile": profile.to_dict(),
                "credential": credential,
            })

    def get_user(self, annotator_ref: str) -> AnnotatorProfile:
        with self._lock:
            profile = self.users.get(annotator_ref)
            if profile is None:
                raise UnknownUser(f"no user {annotator_ref!r}")
            return profile

    def list_users(self) -> list[AnnotatorProfile]:
        with self._lock:
            return sorted(self.users.values(),
                          key=lambda p: (p.created_at, p.annotator_ref))

    # -- documents ----------------------------------------------------------

    def ingest_document(self, doc: DocumentRecord) -> LogEntry:
        with self._lock:
            if doc.document_ref in self.documents:
                raise DuplicateRef(f"document {doc.document_ref!r} exists")
            return self._append(LogOp.PUT_DOCUMENT, {"document": doc.to_dict()})

    def get_document(self, document_ref: str) -> DocumentRecord:
        with self._lock:
            doc = self.documents.get(document_ref)
            if doc is None:
                raise UnknownDocument(f"no document {document_ref!r}")
            return doc

    # -- annotations --------------------------------------------------------

    def find_annotation(self, context_ref: str,
                        document_ref: str | None = None,
                        ) -> AnnotationRecord | None:
        """Resolve a context_ref to a record; local origin wins ties."""
        candidates = [self.annotations[i]
                      for i in self._by_context_ref.get(context_ref, ())]
        if document_ref is not None:
            candidates = [a for a in candidates
                          if a.anchor.document_ref == document_ref]
        if not candidates:
            return None
        candidates.sort(key=lambda a: a.origin_system)
        return candidates[0]

    def append_annotation(self, ann: AnnotationRecord) -> LogEntry:
        """Record a locally created annotation plus its session event.

        Every check runs before the first write so a rejected annotation
        leaves no partial trace in the log.
        """
        with self._lock:
            if ann.annotator_ref not in self.users:
                raise UnknownUser(f"no user {ann.annotator_ref!r}")
            doc = self.documents.get(ann.anchor.document_ref)
            if doc is None:
                raise UnknownDocument(f"no document {ann.anchor.document_ref!r}")
            session = self.sessions.get(ann.session_ref)
            if session is None:
                raise UnknownRef(f"no session {ann.session_ref!r}")
            if not session.is_open:
                raise SessionClosed(f"session {ann.session_ref!r} is closed")
            if session.annotator_ref != ann.annotator_ref:
                raise Unauthorized(
                    f"session {ann.session_ref!r} belongs to another user")
            if ann.identity in self.annotations:
                raise DuplicateIdentity(
                    f"annotation {ann.identity!r} already recorded")
            if ann.created_at < session.last_activity_at:
                raise NonMonotonicTime(
                    f"created_at {ann.created_at} precedes session activity "
                    f"at {session.last_activity_at}")
            validate_annotation(
                ann, doc,
                parent_lookup=lambda ref: self.find_annotation(
                    ref, ann.anchor.document_ref))
            entry = self._append(LogOp.PUT_ANNOTATION,
                                 {"annotation": ann.to_dict()},
                                 at=ann.created_at)
            event = SessionEvent(at=ann.created_at,
                                 kind=EventKind.ANNOTATION_CREATED,
                                 context_ref=ann.context_ref)
            self._append(LogOp.APPEND_EVENT, {
                "session_ref": ann.session_ref,
                "event": event.to_dict(),
            }, at=ann.created_at)
            return entry

    def put_federated_annotation(self, ann: AnnotationRecord,
                                 stub: Any | None = None) -> LogEntry:
        """Record an annotation received from a peer.

        Remote records are not re-anchored (this system has no authority
        over a peer's document text), so only identity and temporal order
        are enforced. When the host document is unknown, a placeholder
        built from the peer's stub is logged first; an existing local
        document is never overwritten.
        """
        with self._lock:
            if ann.identity in self.annotations:
                raise DuplicateIdentity(
                    f"annotation {ann.identity!r} already recorded")
            doc = self.documents.get(ann.anchor.document_ref)
            if doc is None:
                if stub is None:
                    raise UnknownDocument(
                        f"no document {ann.anchor.document_ref!r} and no stub")
                placeholder = DocumentRecord(
                    document_ref=stub.document_ref,
                    title=stub.title,
                    descriptors=tuple(stub.descriptors),
                    authors=(),
                    published_at=stub.available_at,
                    format=DocumentFormat.OTHER,
                    abstract="",
                    body="",
                    available_at=stub.available_at,
                    format_label="placeholder",
                )
                self._append(LogOp.PUT_DOCUMENT,
                             {"document": placeholder.to_dict()})
                doc = placeholder
            floor = stub.available_at if stub is not None else doc.available_at
            if ann.created_at < floor:
                raise TemporalViolation(
                    f"annotation at {ann.created_at} precedes document "
                    f"availability at {floor}")
            return self._append(LogOp.PUT_ANNOTATION,
                                {"annotation": ann.to_dict()},
                                at=ann.created_at)

    # -- visibility and queries ---------------------------------------------

    def visible_to(self, ann: AnnotationRecord,
                   viewer: str | None) -> bool:
        """Visibility is literal: shared records are open, private records
        are owner-only, and group records follow recorded membership (the
        creator gets no implicit seat)."""
        if ann.visibility.value == "server_shared":
            return True
        if viewer is None:
            return False
        if ann.visibility.value == "local_private":
            return viewer == ann.annotator_ref
        return viewer in self.groups.get(ann.group_id or "", ())

    def query_annotations(self, *, viewer: str | None,
                          document_ref: str | None = None,
                          annotator_ref: str | None = None,
                          created_from: int | None = None,
                          created_to: int | None = None,
                          objective: str | None = None,
                          kind: str | None = None,
                          approach: str | None = None,
                          ) -> list[AnnotationRecord]:
        """Filtered, visibility-checked listing. An all-absent filter
        matches everything the viewer may see. The time range is half-open:
        ``created_from <= created_at < created_to``."""
        with self._lock:
            out = []
            for ann in self.annotations.values():
                if not self.visible_to(ann, viewer):
                    continue
                if document_ref is not None and \
                        ann.anchor.document_ref != document_ref:
                    continue
                if annotator_ref is not None and \
                        ann.annotator_ref != annotator_ref:
                    continue
                if created_from is not None and ann.created_at < created_from:
                    continue
                if created_to is not None and ann.created_at >= created_to:
                    continue
                if objective is not None and ann.objective.value != objective:
                    continue
                if kind is not None and ann.ann_type.kind.value != kind:
                    continue
                if approach is not None and ann.approach.value != approach:
                    continue
                out.append(ann)
            out.sort(key=lambda a: (a.created_at, a.context_ref,
                                    a.origin_system))
            return out

    # -- sessions (low-level writers; policy lives in the synthesizer) ------

    def open_session(self, session_ref: str, annotator_ref: str,
                     opened_at: int) -> LogEntry:
        with self._lock:
            if annotator_ref not in self.users:
                raise UnknownUser(f"no user {annotator_ref!r}")
            if session_ref in self.sessions:
                raise DuplicateRef(f"session {session_ref!r} exists")
            if annotator_ref in self.open_session_by_user:
                raise SessionAlreadyOpen(
                    f"user {annotator_ref!r} already has an open session")
            return self._append(LogOp.OPEN_SESSION, {
                "session_ref": session_ref,
                "annotator_ref": annotator_ref,
                "opened_at": opened_at,
            }, at=opened_at)

    def append_session_event(self, session_ref: str,
                             event: SessionEvent) -> LogEntry:
        with self._lock:
            session = self.sessions.get(session_ref)
            if session is None:
                raise UnknownRef(f"no session {session_ref!r}")
            if not session.is_open:
                raise SessionClosed(f"session {session_ref!r} is closed")
            if event.at < session.opened_at:
                raise TimeBeforeOpen(
                    f"event at {event.at} precedes session open "
                    f"at {session.opened_at}")
            if event.at < session.last_activity_at:
                raise NonMonotonicTime(
                    f"event at {event.at} precedes last activity "
                    f"at {session.last_activity_at}")
            if event.kind is EventKind.DOCUMENT_CONSULTED and \
                    event.document_ref not in self.documents:
                raise UnknownDocument(f"no document {event.document_ref!r}")
            if event.kind is EventKind.ANNOTATION_CREATED and \
                    self.find_annotation(event.context_ref or "") is None:
                raise UnknownRef(f"no annotation {event.context_ref!r}")
            return self._append(LogOp.APPEND_EVENT, {
                "session_ref": session_ref,
                "event": event.to_dict(),
            }, at=event.at)

    def close_session(self, session_ref: str, closed_at: int) -> LogEntry:
        with self._lock:
            session = self.sessions.get(session_ref)
            if session is None:
                raise UnknownRef(f"no session {session_ref!r}")
            if not session.is_open:
                raise SessionClosed(f"session {session_ref!r} is closed")
            if closed_at < session.opened_at:
                raise TimeBeforeOpen(
                    f"close at {closed_at} precedes open at {session.opened_at}")
            if closed_at < session.last_activity_at:
                raise NonMonotonicTime(
                    f"close at {closed_at} precedes last activity "
                    f"at {session.last_activity_at}")
            return self._append(LogOp.CLOSE_SESSION, {
                "session_ref": session_ref,
                "closed_at": closed_at,
            }, at=closed_at)

    # -- federation bookkeeping ----------------------------------------------

    def register_peer(self, peer: dict[str, Any]) -> LogEntry:
        with self._lock:
            if peer["peer_id"] in self.peers_raw:
                raise DuplicatePeer(f"peer {peer['peer_id']!r} registered")
            return self._append(LogOp.REGISTER_PEER, {"peer": peer})

    def set_peer_cursor(self, peer_id: str, cursor_kind: str,
                        value: int) -> LogEntry:
        with self._lock:
            if peer_id not in self.peers_raw:
                raise UnknownRef(f"no peer {peer_id!r}")
            return self._append(LogOp.SET_CURSOR, {
                "peer_id": peer_id,
                "cursor_kind": cursor_kind,
                "value": value,
            })

    # -- inspection -----------------------------------------------------------

    def iter_entries(self, after_seq: int = 0,
                     up_to_seq: int | None = None) -> Iterable[LogEntry]:
        with self._lock:
            top = up_to_seq if up_to_seq is not None else len(self.entries)
            return [e for e in self.entries if after_seq < e.seq <= top]

    def head_seq(self) -> int:
        with self._lock:
            return self.entries[-1].seq if self.entries else 0

    def snapshot(self) -> dict[str, Any]:
        """A comparable value capturing all folded state. Two stores with
        equal snapshots answer every query identically."""
        with self._lock:
            return {
                "users": {r: p.to_dict() for r, p in sorted(self.users.items())},
                "credentials": dict(sorted(self.credentials.items())),
                "documents": {r: d.to_dict()
                              for r, d in sorted(self.documents.items())},
                "annotations": [self.annotations[i].to_dict()
                                for i in sorted(self.annotations)],
                "sessions": {r: s.to_dict()
                             for r, s in sorted(self.sessions.items())},
                "open_sessions": dict(sorted(self.open_session_by_user.items())),
                "peers": dict(sorted(self.peers_raw.items())),
                "cursors": {f"{p}:{k}": v
                            for (p, k), v in sorted(self.cursors.items())},
            }
