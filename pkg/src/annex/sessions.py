"""Session lifecycle, password checks, and behavior-derived profiles.

A user has two profile halves. The explicit half is whatever they declared
at registration (name, role, activity area). The implicit half is
synthesized from what they actually did: time spent, documents consulted,
queries issued. The synthesizer maintains the implicit half incrementally
as log entries arrive, and the maintained value must always equal a
from-scratch fold over the session log; tests hold it to that.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
from dataclasses import dataclass, field
from typing import Any

from .errors import SessionClosed, Unauthorized, UnknownRef, UnknownUser
from .model import (
    AnnotatorProfile,
    EventKind,
    SessionContext,
    SessionEvent,
    new_ref,
)
from .store import LogEntry, LogOp, Store

PBKDF2_ITERATIONS = 60_000


def hash_password(password: str) -> dict[str, Any]:
    salt = secrets.token_bytes(16)
    digest = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt,
                                 PBKDF2_ITERATIONS)
    return {
        "algo": "pbkdf2_sha256",
        "salt": salt.hex(),
        "iterations": PBKDF2_ITERATIONS,
        "hash": digest.hex(),
    }


def verify_password(credential: dict[str, Any] | None, password: str) -> bool:
    if not credential or credential.get("algo") != "pbkdf2_sha256":
        return False
    digest = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"),
                                 bytes.fromhex(credential["salt"]),
                                 int(credential["iterations"]))
    return hmac.compare_digest(digest.hex(), credential["hash"])


@dataclass(frozen=True)
class ImplicitProfile:
    """What the system learned by watching.

    ``total_time_on_system`` sums closed sessions only (an open session has
    no length yet); ``sessions_count`` counts every session ever opened;
    consult counts and queries accumulate as the events arrive, open session
    or not.
    """

    annotator_ref: str
    total_time_on_system: int = 0
    documents_consulted: dict[str, int] = field(default_factory=dict)
    queries_issued: tuple[tuple[tuple[str, ...], int], ...] = ()
    sessions_count: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "annotator_ref": self.annotator_ref,
            "total_time_on_system": self.total_time_on_system,
            "documents_consulted": dict(sorted(
                self.documents_consulted.items())),
            "queries_issued": [{"terms": list(terms), "at": at}
                               for terms, at in self.queries_issued],
            "sessions_count": self.sessions_count,
        }


class _Tally:
    __slots__ = ("time", "docs", "queries", "sessions")

    def __init__(self):
        self.time = 0
        self.docs: dict[str, int] = {}
        self.queries: list[tuple[tuple[str, ...], int]] = []
        self.sessions = 0


class ProfileSynthesizer:
    """Session policy on top of the store's raw writers.

    Attach-then-load ordering matters: construct the synthesizer before
    calling ``store.load()`` so replayed entries rebuild the tallies.
    """

    def __init__(self, store: Store, idle_timeout: int = 3600):
        if idle_timeout <= 0:
            raise ValueError("idle_timeout must be positive")
        self._store = store
        self._idle_timeout = idle_timeout
        self._tallies: dict[str, _Tally] = {}
        store.attach_listener(self._on_entry)

    # -- incremental fold -----------------------------------------------------

    def _tally(self, annotator_ref: str) -> _Tally:
        return self._tallies.setdefault(annotator_ref, _Tally())

    def _on_entry(self, entry: LogEntry) -> None:
        if entry.op is LogOp.OPEN_SESSION:
            self._tally(entry.payload["annotator_ref"]).sessions += 1
        elif entry.op is LogOp.APPEND_EVENT:
            session = self._store.sessions[entry.payload["session_ref"]]
            event = SessionEvent.from_dict(entry.payload["event"])
            tally = self._tally(session.annotator_ref)
            if event.kind is EventKind.DOCUMENT_CONSULTED:
                ref = event.document_ref or ""
                tally.docs[ref] = tally.docs.get(ref, 0) + 1
            elif event.kind is EventKind.QUERY_ISSUED:
                tally.queries.append((event.terms or (), event.at))
        elif entry.op is LogOp.CLOSE_SESSION:
            session = self._store.sessions[entry.payload["session_ref"]]
            tally = self._tally(session.annotator_ref)
            tally.time += session.closed_at - session.opened_at

    # -- lifecycle -------------------------------------------------------------

    def open_session(self, annotator_ref: str, at: int) -> SessionContext:
        with self._store.lock:
            if annotator_ref not in self._store.users:
                raise UnknownUser(f"no user {annotator_ref!r}")
            open_ref = self._store.open_session_by_user.get(annotator_ref)
            if open_ref is not None and self._is_idle(open_ref, at):
                self._auto_close(open_ref)
            entry_ref = new_ref()
            self._store.open_session(entry_ref, annotator_ref, at)
            return self._store.sessions[entry_ref]

    def login(self, annotator_ref: str, password: str,
              at: int) -> SessionContext:
        with self._store.lock:
            if annotator_ref not in self._store.users:
                raise UnknownUser(f"no user {annotator_ref!r}")
            credential = self._store.credentials.get(annotator_ref)
            if not verify_password(credential, password):
                raise Unauthorized("wrong name or password")
            return self.open_session(annotator_ref, at)

    def record_event(self, session_ref: str,
                     event: SessionEvent) -> SessionContext:
        with self._store.lock:
            session = self._require(session_ref)
            if session.is_open and self._gap(session, event.at) >= \
                    self._idle_timeout:
                self._auto_close(session_ref)
                raise SessionClosed(
                    f"session {session_ref!r} idled out at "
                    f"{session.last_activity_at}")
            self._store.append_session_event(session_ref, event)
            return self._store.sessions[session_ref]

    def close_session(self, session_ref: str, at: int) -> SessionContext:
        with self._store.lock:
            session = self._require(session_ref)
            if session.is_open and self._gap(session, at) >= \
                    self._idle_timeout:
                self._auto_close(session_ref)
                raise SessionClosed(
                    f"session {session_ref!r} idled out at "
                    f"{session.last_activity_at}")
            self._store.close_session(session_ref, at)
            return self._store.sessions[session_ref]

    def sweep_idle(self, now: int) -> list[str]:
        """Close every open session whose last activity is at least the
        idle timeout in the past. Each closes at its last activity time,
        so the recorded length never includes the silent tail."""
        with self._store.lock:
            victims = [ref for ref in self._store.open_session_by_user.values()
                       if self._is_idle(ref, now)]
            for ref in sorted(victims):
                self._auto_close(ref)
            return sorted(victims)

    def _require(self, session_ref: str) -> SessionContext:
        session = self._store.sessions.get(session_ref)
        if session is None:
            raise UnknownRef(f"no session {session_ref!r}")
        return session

    @staticmethod
    def _gap(session: SessionContext, now: int) -> int:
        return now - session.last_activity_at

    def _is_idle(self, session_ref: str, now: int) -> bool:
        session = self._store.sessions[session_ref]
        return self._gap(session, now) >= self._idle_timeout

    def _auto_close(self, session_ref: str) -> None:
        session = self._store.sessions[session_ref]
        self._store.close_session(session_ref, session.last_activity_at)

    # -- profiles ----------------------------------------------------------------

    def explicit_profile(self, annotator_ref: str) -> AnnotatorProfile:
        return self._store.get_user(annotator_ref)

    def compute_implicit_profile(self, annotator_ref: str) -> ImplicitProfile:
        with self._store.lock:
            if annotator_ref not in self._store.users:
                raise UnknownUser(f"no user {annotator_ref!r}")
            tally = self._tallies.get(annotator_ref)
            if tally is None:
                return ImplicitProfile(annotator_ref=annotator_ref)
            return ImplicitProfile(
                annotator_ref=annotator_ref,
                total_time_on_system=tally.time,
                documents_consulted=dict(tally.docs),
                queries_issued=tuple(tally.queries),
                sessions_count=tally.sessions,
            )
