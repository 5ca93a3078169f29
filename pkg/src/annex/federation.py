"""Exchange of annotation records with peer systems.

Four interaction modes, all riding the same wire protocol (JSON bodies,
bearer token from registration):

- receptive: outsiders query our shared annotations read-only.
- admissive: a registered peer deposits annotations into our store.
- interpretative: we push matching shared annotations to a peer that never
  answers back beyond a transport acknowledgment.
- collaborative: repeated duplex cycles converge two stores on the same
  annotation identity set.

Records are immutable and identified by (origin_system, context_ref), so
merging is a set union: no conflict resolution, idempotent by construction.
Only server_shared annotations ever enter a federation payload.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import urllib.error
import urllib.request
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Iterable, Protocol

from .errors import (
    DuplicateIdentity,
    EmptyQuery,
    TransportFailure,
    Unauthorized,
    UnknownRef,
    ValidationFailed,
)
from .model import (
    AnnotationRecord,
    DocumentRecord,
    Visibility,
    new_token,
)
from .search import tokenize
from .store import LogEntry, LogOp, Store

log = logging.getLogger(__name__)

MAX_DELTA_ENTRIES = 500

CURSOR_REMOTE_MERGED = "remote_merged"
CURSOR_SENT_ACKNOWLEDGED = "sent_acknowledged"


class FederationMode(str, Enum):
    RECEPTIVE = "receptive"
    ADMISSIVE = "admissive"
    INTERPRETATIVE = "interpretative"
    COLLABORATIVE = "collaborative"


@dataclass(frozen=True)
class FederationPeer:
    """A registered remote system and our cursors into the exchange.

    ``sync_cursor`` is the highest remote sequence number we have merged;
    ``ack_cursor`` is the highest local sequence number the peer has
    confirmed merging. Both only ever grow.
    """

    peer_id: str
    base_url: str
    modes: frozenset[FederationMode]
    token: str
    registered_at: int
    sync_cursor: int = 0
    ack_cursor: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "peer_id": self.peer_id,
            "base_url": self.base_url,
            "modes": sorted(m.value for m in self.modes),
            "token": self.token,
            "registered_at": self.registered_at,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "FederationPeer":
        return cls(
            peer_id=data["peer_id"],
            base_url=data["base_url"],
            modes=frozenset(FederationMode(m) for m in data["modes"]),
            token=data["token"],
            registered_at=data["registered_at"],
        )


@dataclass(frozen=True)
class DocumentStub:
    """Just enough of a document for a peer to hold its annotations."""

    document_ref: str
    title: str
    descriptors: tuple[str, ...]
    available_at: int

    @classmethod
    def of(cls, doc: DocumentRecord) -> "DocumentStub":
        return cls(document_ref=doc.document_ref, title=doc.title,
                   descriptors=doc.descriptors,
                   available_at=doc.available_at)

    def to_dict(self) -> dict[str, Any]:
        return {
            "document_ref": self.document_ref,
            "title": self.title,
            "descriptors": list(self.descriptors),
            "available_at": self.available_at,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DocumentStub":
        return cls(
            document_ref=str(data["document_ref"]),
            title=str(data["title"]),
            descriptors=tuple(str(d) for d in data["descriptors"]),
            available_at=int(data["available_at"]),
        )


@dataclass(frozen=True)
class SyncDelta:
    """Shared annotations whose log sequence lies in (from_seq, to_seq]."""

    origin_system: str
    entries: tuple[tuple[AnnotationRecord, DocumentStub], ...]
    from_seq: int
    to_seq: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "origin_system": self.origin_system,
            "from_seq": self.from_seq,
            "to_seq": self.to_seq,
            "entries": [{"annotation": ann.to_dict(), "stub": stub.to_dict()}
                        for ann, stub in self.entries],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SyncDelta":
        entries = tuple(
            (AnnotationRecord.from_dict(item["annotation"]),
             DocumentStub.from_dict(item["stub"]))
            for item in data["entries"])
        return cls(
            origin_system=str(data["origin_system"]),
            entries=entries,
            from_seq=int(data["from_seq"]),
            to_seq=int(data["to_seq"]),
        )


@dataclass(frozen=True)
class SyncReport:
    peer_id: str
    sent: int
    received: int
    merged: int
    new_cursor: int

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class ExportReceipt:
    peer_id: str
    items_sent: int
    at: int
    ok: bool

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


class Transport(Protocol):
    def post(self, base_url: str, path: str, token: str | None,
             payload: dict[str, Any]) -> dict[str, Any]:
        """Deliver one request; raises TransportFailure when the peer is
        unreachable or answers outside the protocol."""


class HttpTransport:
    def __init__(self, timeout: float = 10.0):
        self._timeout = timeout

    def post(self, base_url: str, path: str, token: str | None,
             payload: dict[str, Any]) -> dict[str, Any]:
        url = base_url.rstrip("/") + path
        headers = {"Content-Type": "application/json"}
        if token:
            headers["Authorization"] = f"Bearer {token}"
        request = urllib.request.Request(
            url, data=json.dumps(payload).encode("utf-8"),
            headers=headers, method="POST")
        try:
            with urllib.request.urlopen(request,
                                        timeout=self._timeout) as response:
                return json.loads(response.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            body = exc.read().decode("utf-8", errors="replace")
            try:
                code = json.loads(body).get("code")
            except (json.JSONDecodeError, AttributeError):
                code = None
            if code == "unauthorized":
                raise Unauthorized(f"peer refused the token: {body}") from exc
            raise TransportFailure(
                f"peer answered HTTP {exc.code}: {body[:200]}") from exc
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise TransportFailure(f"cannot reach {url}: {exc}") from exc


class InProcessTransport:
    """Routes requests straight into other FederationService instances;
    used by tests and by single-process multi-node setups."""

    def __init__(self):
        self._registry: dict[str, "FederationService"] = {}

    def register(self, base_url: str, service: "FederationService") -> None:
        self._registry[base_url] = service

    def post(self, base_url: str, path: str, token: str | None,
             payload: dict[str, Any]) -> dict[str, Any]:
        service = self._registry.get(base_url)
        if service is None:
            raise TransportFailure(f"no route to {base_url}")
        if path == "/fed/sync":
            return service.handle_sync(token, payload)
        if path == "/fed/deposit":
            return service.handle_deposit(token, payload)
        if path == "/fed/export-sink":
            return service.handle_export_sink(token, payload)
        raise TransportFailure(f"no handler for {path}")


class FederationService:
    """One system's communicator: owns the peer table and all four modes."""

    def __init__(self, store: Store, system_id: str,
                 transport: Transport | None = None,
                 clock: Callable[[], int] | None = None,
                 max_delta_entries: int = MAX_DELTA_ENTRIES):
        self._store = store
        self._system_id = system_id
        self._transport = transport or HttpTransport()
        self._clock = clock or store._clock
        self._max_delta = max_delta_entries
        self.peers: dict[str, FederationPeer] = {}
        self.export_history: list[ExportReceipt] = []
        store.attach_listener(self._on_entry)

    @property
    def system_id(self) -> str:
        return self._system_id

    def _on_entry(self, entry: LogEntry) -> None:
        if entry.op is LogOp.REGISTER_PEER:
            peer = FederationPeer.from_dict(entry.payload["peer"])
            self.peers[peer.peer_id] = peer
        elif entry.op is LogOp.SET_CURSOR:
            peer = self.peers[entry.payload["peer_id"]]
            kind = entry.payload["cursor_kind"]
            value = entry.payload["value"]
            if kind == CURSOR_REMOTE_MERGED:
                peer = dataclasses.replace(peer, sync_cursor=value)
            elif kind == CURSOR_SENT_ACKNOWLEDGED:
                peer = dataclasses.replace(peer, ack_cursor=value)
            self.peers[peer.peer_id] = peer

    # -- registration ----------------------------------------------------------

    def register_peer(self, peer_id: str, base_url: str,
                      modes: Iterable[str | FederationMode],
                      token: str | None = None) -> FederationPeer:
        parsed = frozenset(FederationMode(m) for m in modes)
        if not parsed:
            raise ValidationFailed("a peer needs at least one mode")
        if not peer_id:
            raise ValidationFailed("peer_id must be non-empty")
        peer = FederationPeer(
            peer_id=peer_id,
            base_url=base_url,
            modes=parsed,
            token=token or new_token(),
            registered_at=self._clock(),
        )
        with self._store.lock:
            self._store.register_peer(peer.to_dict())
        return self.peers[peer_id]

    def _peer_by_token(self, token: str | None) -> FederationPeer:
        if token:
            for peer in self.peers.values():
                if peer.token == token:
                    return peer
        raise Unauthorized("unknown federation token")

    def _require_mode(self, peer: FederationPeer,
                      mode: FederationMode) -> FederationPeer:
        if mode not in peer.modes:
            raise Unauthorized(
                f"peer {peer.peer_id!r} is not registered for {mode.value}")
        return peer

    def _peer(self, peer_id: str) -> FederationPeer:
        peer = self.peers.get(peer_id)
        if peer is None:
            raise Unauthorized(f"no peer {peer_id!r} registered")
        return peer

    # -- receptive (mode A) ------------------------------------------------------

    def receptive_query(self, query: str | Iterable[str],
                        requester_token: str | None = None,
                        ) -> list[tuple[AnnotationRecord, DocumentStub]]:
        """Read-only search over shared annotations for outside callers.

        Anonymous queries are allowed; when a token is presented it must
        belong to a peer registered for receptive mode.
        """
        if requester_token is not None:
            self._require_mode(self._peer_by_token(requester_token),
                               FederationMode.RECEPTIVE)
        parts = [query] if isinstance(query, str) else list(query)
        terms = {t for part in parts for t in tokenize(part)}
        if not terms:
            raise EmptyQuery("no searchable terms in query")
        with self._store.lock:
            out = []
            for ann in self._store.query_annotations(viewer=None):
                held = set(tokenize(ann.body_text)) \
                    | set(tokenize(ann.anchor.quoted_text))
                if terms & held:
                    doc = self._store.documents[ann.anchor.document_ref]
                    out.append((ann, DocumentStub.of(doc)))
            return out

    # -- admissive (mode B) -------------------------------------------------------

    def handle_deposit(self, token: str | None,
                       payload: dict[str, Any]) -> dict[str, Any]:
        """Accept a batch of annotations from a registered peer.

        Partial acceptance: each item answers for itself. Whatever origin
        the item claims, the stored record carries the depositing peer's id.
        """
        peer = self._require_mode(self._peer_by_token(token),
                                  FederationMode.ADMISSIVE)
        items = payload.get("items")
        if not isinstance(items, list):
            raise ValidationFailed("deposit body needs an 'items' list")
        results = []
        accepted = []
        with self._store.lock:
            for item in items:
                context_ref = None
                try:
                    if not isinstance(item, dict):
                        raise ValidationFailed("each item must be an object")
                    ann = AnnotationRecord.from_dict(item["annotation"])
                    context_ref = ann.context_ref
                    ann = dataclasses.replace(ann,
                                              origin_system=peer.peer_id)
                    stub = DocumentStub.from_dict(item["stub"]) \
                        if item.get("stub") else None
                    self._store.put_federated_annotation(ann, stub)
                except DuplicateIdentity:
                    results.append({"context_ref": context_ref,
                                    "status": "duplicate_identity"})
                except (ValidationFailed, UnknownRef, KeyError,
                        TypeError) as exc:
                    results.append({"context_ref": context_ref,
                                    "status": "validation_failed",
                                    "message": str(exc)})
                else:
                    results.append({"context_ref": ann.context_ref,
                                    "status": "accepted"})
                    accepted.append({"origin_system": ann.origin_system,
                                     "context_ref": ann.context_ref})
        return {"results": results, "accepted": accepted}

    # -- interpretative (mode C) -----------------------------------------------------

    def interpretative_export(self, peer_id: str,
                              **filters: Any) -> ExportReceipt:
        """Push matching shared annotations to the peer, one-way.

        An empty match sends nothing at all. A transport failure is
        recorded as a failed receipt and re-raised; the operation is safe
        to retry because the receiving side merges by identity.
        """
        peer = self._require_mode(self._peer(peer_id),
                                  FederationMode.INTERPRETATIVE)
        with self._store.lock:
            matches = self._store.query_annotations(viewer=None, **filters)
            items = [{"annotation": ann.to_dict(),
                      "stub": DocumentStub.of(
                          self._store.documents[ann.anchor.document_ref])
                      .to_dict()}
                     for ann in matches]
        if not items:
            receipt = ExportReceipt(peer_id=peer_id, items_sent=0,
                                    at=self._clock(), ok=True)
            self.export_history.append(receipt)
            return receipt
        try:
            self._transport.post(peer.base_url, "/fed/export-sink",
                                 peer.token,
                                 {"origin_system": self._system_id,
                                  "items": items})
        except TransportFailure:
            receipt = ExportReceipt(peer_id=peer_id, items_sent=0,
                                    at=self._clock(), ok=False)
            self.export_history.append(receipt)
            raise
        receipt = ExportReceipt(peer_id=peer_id, items_sent=len(items),
                                at=self._clock(), ok=True)
        self.export_history.append(receipt)
        return receipt

    def handle_export_sink(self, token: str | None,
                           payload: dict[str, Any]) -> dict[str, Any]:
        """Receive another system's one-way export. Items merge exactly
        like a sync delta: by identity, duplicates and invalid records
        skipped."""
        self._require_mode(self._peer_by_token(token),
                           FederationMode.INTERPRETATIVE)
        items = payload.get("items")
        if not isinstance(items, list):
            raise ValidationFailed("export body needs an 'items' list")
        merged = self._merge_items(items)
        return {"ok": True, "received": len(items), "merged": merged}

    # -- collaborative (mode D) -----------------------------------------------------

    def build_delta(self, after_seq: int) -> SyncDelta:
        """Shared annotations from log positions (after_seq, to_seq],
        bounded by the batch cap; to_seq tells the receiver how far this
        delta advances even when few entries qualified."""
        with self._store.lock:
            entries: list[tuple[AnnotationRecord, DocumentStub]] = []
            to_seq = after_seq
            for entry in self._store.iter_entries(after_seq=after_seq):
                to_seq = entry.seq
                if entry.op is not LogOp.PUT_ANNOTATION:
                    continue
                raw = entry.payload["annotation"]
                identity = (raw["origin_system"], raw["context_ref"])
                ann = self._store.annotations[identity]
                if ann.visibility is not Visibility.SERVER_SHARED:
                    continue
                doc = self._store.documents[ann.anchor.document_ref]
                entries.append((ann, DocumentStub.of(doc)))
                if len(entries) >= self._max_delta:
                    break
            return SyncDelta(origin_system=self._system_id,
                             entries=tuple(entries),
                             from_seq=after_seq, to_seq=to_seq)

    def merge_delta(self, delta: SyncDelta) -> int:
        """Set-union merge: store unseen identities, skip the rest.

        Original origin_system values are preserved, so records gathered
        from third systems keep their provenance while propagating."""
        merged = 0
        with self._store.lock:
            for ann, stub in delta.entries:
                if ann.visibility is not Visibility.SERVER_SHARED:
                    log.warning("dropping non-shared record %r from %r",
                                ann.identity, delta.origin_system)
                    continue
                if ann.identity in self._store.annotations:
                    continue
                try:
                    self._store.put_federated_annotation(ann, stub)
                except (ValidationFailed, UnknownRef,
                        DuplicateIdentity) as exc:
                    log.warning("skipping %r from %r: %s", ann.identity,
                                delta.origin_system, exc)
                    continue
                merged += 1
        return merged

    def _merge_items(self, items: list[Any]) -> int:
        entries = []
        for item in items:
            try:
                ann = AnnotationRecord.from_dict(item["annotation"])
                stub = DocumentStub.from_dict(item["stub"]) \
                    if item.get("stub") else None
            except (ValidationFailed, KeyError, TypeError) as exc:
                log.warning("skipping undecodable export item: %s", exc)
                continue
            entries.append((ann, stub))
        delta = SyncDelta(origin_system="export", entries=tuple(entries),
                          from_seq=0, to_seq=0)
        return self.merge_delta(delta)

    def collaborative_sync(self, peer_id: str) -> SyncReport:
        """One duplex cycle: push our news, pull theirs, merge, advance
        cursors. Failures leave both cursors untouched so the next attempt
        repeats the same window; merging is idempotent, so at-least-once
        delivery is safe."""
        peer = self._require_mode(self._peer(peer_id),
                                  FederationMode.COLLABORATIVE)
        outbound = self.build_delta(after_seq=peer.ack_cursor)
        body: dict[str, Any] = {"cursor": peer.sync_cursor}
        if outbound.to_seq > outbound.from_seq:
            body["delta"] = outbound.to_dict()
        response = self._transport.post(peer.base_url, "/fed/sync",
                                        peer.token, body)
        received = 0
        merged = 0
        with self._store.lock:
            peer = self._peer(peer_id)
            if response.get("delta") is not None:
                delta = SyncDelta.from_dict(response["delta"])
                received = len(delta.entries)
                merged = self.merge_delta(delta)
                if delta.to_seq > peer.sync_cursor:
                    self._store.set_peer_cursor(peer_id, CURSOR_REMOTE_MERGED,
                                                delta.to_seq)
            acknowledged = int(response.get("acknowledged_to", 0))
            peer = self._peer(peer_id)
            if acknowledged > peer.ack_cursor:
                self._store.set_peer_cursor(peer_id,
                                            CURSOR_SENT_ACKNOWLEDGED,
                                            acknowledged)
            return SyncReport(peer_id=peer_id, sent=len(outbound.entries),
                              received=received, merged=merged,
                              new_cursor=self._peer(peer_id).sync_cursor)

    def handle_sync(self, token: str | None,
                    payload: dict[str, Any]) -> dict[str, Any]:
        """Answer a peer's cycle. The response delta is computed before the
        inbound delta is merged, so records pushed in this very cycle are
        not echoed straight back."""
        peer = self._require_mode(self._peer_by_token(token),
                                  FederationMode.COLLABORATIVE)
        cursor = payload.get("cursor")
        if not isinstance(cursor, int) or isinstance(cursor, bool) \
                or cursor < 0:
            raise ValidationFailed("sync body needs a non-negative cursor")
        with self._store.lock:
            response_delta = self.build_delta(after_seq=cursor)
            acknowledged_to = 0
            if payload.get("delta") is not None:
                inbound = SyncDelta.from_dict(payload["delta"])
                self.merge_delta(inbound)
                acknowledged_to = inbound.to_seq
                if inbound.to_seq > peer.sync_cursor:
                    self._store.set_peer_cursor(peer.peer_id,
                                                CURSOR_REMOTE_MERGED,
                                                inbound.to_seq)
            peer = self._peer(peer.peer_id)
            if cursor > peer.ack_cursor:
                self._store.set_peer_cursor(peer.peer_id,
                                            CURSOR_SENT_ACKNOWLEDGED, cursor)
            out: dict[str, Any] = {"acknowledged_to": acknowledged_to}
            if response_delta.to_seq > response_delta.from_seq:
                out["delta"] = response_delta.to_dict()
            return out
