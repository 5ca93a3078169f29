"""The HTTP face of a node.

Every route is a thin adapter: parse the request, call one service
operation, encode its result. Errors cross the wire as
``{"code": ..., "message": ...}`` with the status each error class
declares. Session credentials travel as ``Authorization: Bearer
<session_ref>``; the federation routes take peer tokens the same way.

The only GET that writes is ``GET /documents/{ref}``: consulting a
document is itself observed behavior, so it appends one
document_consulted event to the caller's session. Every other GET leaves
the store byte-identical.
"""

from typing import Any

from fastapi import Body, Depends, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from .analytics import Bucket, EdgeKind, Grouping
from .errors import AnnexError, Unauthorized, ValidationFailed
from .model import EventKind, SessionContext, SessionEvent, new_ref
from .model import AnnotationRecord
from .node import Node

_ROUTE_CODES = {404: "unknown_route", 405: "method_not_allowed"}


def _bearer(request: Request) -> str | None:
    raw = request.headers.get("authorization")
    if raw is None:
        return None
    scheme, _, value = raw.partition(" ")
    value = value.strip()
    if scheme.lower() != "bearer" or not value:
        return None
    return value


def _enum(cls: type, raw: str, what: str) -> Any:
    try:
        return cls(raw)
    except ValueError as exc:
        raise ValidationFailed(f"{what}: unknown value {raw!r}") from exc


def _annotation_filters(document_ref: str | None,
                        annotator_ref: str | None,
                        created_from: int | None,
                        created_to: int | None,
                        objective: str | None,
                        kind: str | None,
                        approach: str | None) -> dict[str, Any]:
    return {
        "document_ref": document_ref,
        "annotator_ref": annotator_ref,
        "created_from": created_from,
        "created_to": created_to,
        "objective": objective,
        "kind": kind,
        "approach": approach,
    }


def create_app(node: Node) -> FastAPI:
    app = FastAPI(title="annex portal", docs_url=None, redoc_url=None,
                  openapi_url=None)
    if node.config.ui_origin:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=[node.config.ui_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(AnnexError)
    def on_annex_error(request: Request, exc: AnnexError) -> JSONResponse:
        return JSONResponse(status_code=exc.http_status,
                            content={"code": exc.code, "message": str(exc)})

    @app.exception_handler(RequestValidationError)
    def on_bad_request(request: Request,
                       exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(status_code=400,
                            content={"code": "validation_failed",
                                     "message": str(exc.errors()[:1])})

    @app.exception_handler(StarletteHTTPException)
    def on_http_error(request: Request,
                      exc: StarletteHTTPException) -> JSONResponse:
        code = _ROUTE_CODES.get(exc.status_code, "internal")
        return JSONResponse(status_code=exc.status_code,
                            content={"code": code, "message": str(exc.detail)})

    def require_session(request: Request) -> SessionContext:
        """Resolve the bearer credential to a live session.

        An idled-out session is rejected but not closed here: rejecting a
        read must not write. The next login or mutation sweeps it.
        """
        ref = _bearer(request)
        if ref is None:
            raise Unauthorized("missing bearer session credential")
        with node.store.lock:
            session = node.store.sessions.get(ref)
            if session is None:
                raise Unauthorized("unknown session credential")
            if not session.is_open:
                raise Unauthorized("session is closed")
            gap = node.now() - session.last_activity_at
            if gap >= node.config.session_timeout:
                raise Unauthorized("session idled out")
            return session

    # -- sessions ------------------------------------------------------------

    @app.post("/login")
    def login(payload: dict = Body(...)) -> dict:
        annotator_ref = payload.get("annotator_ref")
        password = payload.get("password")
        if not isinstance(annotator_ref, str) or \
                not isinstance(password, str):
            raise ValidationFailed(
                "login needs string fields annotator_ref and password")
        session = node.synthesizer.login(annotator_ref, password, node.now())
        return {"session_ref": session.session_ref,
                "annotator_ref": session.annotator_ref,
                "opened_at": session.opened_at}

    @app.post("/logout")
    def logout(session: SessionContext = Depends(require_session)) -> dict:
        closed = node.synthesizer.close_session(session.session_ref,
                                                node.now())
        return {"session_ref": closed.session_ref,
                "closed_at": closed.closed_at}

    # -- documents -----------------------------------------------------------

    @app.get("/documents/{document_ref}")
    def consult_document(document_ref: str,
                         session: SessionContext = Depends(require_session),
                         ) -> dict:
        with node.store.lock:
            doc = node.store.get_document(document_ref)
            event = SessionEvent(at=node.now(),
                                 kind=EventKind.DOCUMENT_CONSULTED,
                                 document_ref=document_ref)
            node.synthesizer.record_event(session.session_ref, event)
            return doc.to_dict()

    # -- search --------------------------------------------------------------

    @app.get("/search")
    def search_base(q: str = "", limit: int | None = None,
                    session: SessionContext = Depends(require_session),
                    ) -> dict:
        hits = node.search.search_base(q, as_user=session.annotator_ref,
                                       limit=limit)
        return {"query": q, "hits": [h.to_dict() for h in hits]}

    @app.get("/search-extended")
    def search_extended(q: str = "", limit: int | None = None,
                        session: SessionContext = Depends(require_session),
                        ) -> dict:
        hits = node.search.search_extended(q, as_user=session.annotator_ref,
                                           limit=limit)
        return {"query": q, "hits": [h.to_dict() for h in hits]}

    # -- annotations ---------------------------------------------------------

    @app.post("/annotations", status_code=201)
    def create_annotation(payload: dict = Body(...),
                          session: SessionContext = Depends(require_session),
                          ) -> dict:
        data = dict(payload)
        data["context_ref"] = new_ref()
        data["origin_system"] = node.config.system_id
        data["annotator_ref"] = session.annotator_ref
        data["session_ref"] = session.session_ref
        data["created_at"] = node.now()
        ann = AnnotationRecord.from_dict(data)
        with node.store.lock:
            node.store.append_annotation(ann)
        return ann.to_dict()

    @app.get("/annotations")
    def list_annotations(document_ref: str | None = None,
                         annotator_ref: str | None = None,
                         created_from: int | None = None,
                         created_to: int | None = None,
                         objective: str | None = None,
                         kind: str | None = None,
                         approach: str | None = None,
                         session: SessionContext = Depends(require_session),
                         ) -> dict:
        rows = node.store.query_annotations(
            viewer=session.annotator_ref,
            **_annotation_filters(document_ref, annotator_ref, created_from,
                                  created_to, objective, kind, approach))
        return {"annotations": [a.to_dict() for a in rows]}

    # -- profiles ------------------------------------------------------------

    @app.get("/profile/{annotator_ref}")
    def profile(annotator_ref: str,
                session: SessionContext = Depends(require_session)) -> dict:
        with node.store.lock:
            explicit = node.synthesizer.explicit_profile(annotator_ref)
            implicit = node.synthesizer.compute_implicit_profile(
                annotator_ref)
            return {"explicit": explicit.to_dict(),
                    "implicit": implicit.to_dict()}

    # -- analytics -----------------------------------------------------------

    @app.get("/analytics/group-time")
    def group_time(grouping: str = "", bucket: str = "",
                   document_ref: str | None = None,
                   annotator_ref: str | None = None,
                   created_from: int | None = None,
                   created_to: int | None = None,
                   objective: str | None = None,
                   kind: str | None = None,
                   approach: str | None = None,
                   session: SessionContext = Depends(require_session),
                   ) -> dict:
        matrix = node.analytics.group_time_counts(
            _enum(Grouping, grouping, "grouping"),
            _enum(Bucket, bucket, "bucket"),
            session.annotator_ref,
            **_annotation_filters(document_ref, annotator_ref, created_from,
                                  created_to, objective, kind, approach))
        return matrix.to_dict()

    @app.get("/analytics/graph")
    def relationship_graph(kind: str = "",
                           session: SessionContext = Depends(require_session),
                           ) -> dict:
        edges = node.analytics.relationship_graph(
            _enum(EdgeKind, kind, "kind"), session.annotator_ref)
        return {"kind": kind, "edges": [e.to_dict() for e in edges]}

    # -- federation ----------------------------------------------------------

    @app.post("/fed/register")
    def fed_register(payload: dict = Body(...)) -> dict:
        peer_id = payload.get("peer_id")
        base_url = payload.get("base_url")
        modes = payload.get("modes")
        if not isinstance(peer_id, str) or not isinstance(base_url, str) \
                or not isinstance(modes, list):
            raise ValidationFailed(
                "registration needs peer_id, base_url, and a modes list")
        try:
            peer = node.federation.register_peer(peer_id, base_url, modes)
        except ValueError as exc:
            raise ValidationFailed(str(exc)) from exc
        return peer.to_dict()

    @app.get("/fed/annotations")
    def fed_annotations(request: Request, q: str = "") -> dict:
        results = node.federation.receptive_query(
            q, requester_token=_bearer(request))
        return {"items": [{"annotation": ann.to_dict(),
                           "stub": stub.to_dict()}
                          for ann, stub in results]}

    @app.post("/fed/deposit")
    def fed_deposit(request: Request, payload: dict = Body(...)) -> dict:
        return node.federation.handle_deposit(_bearer(request), payload)

    @app.post("/fed/export-sink")
    def fed_export_sink(request: Request,
                        payload: dict = Body(...)) -> dict:
        return node.federation.handle_export_sink(_bearer(request), payload)

    @app.post("/fed/sync")
    def fed_sync(request: Request, payload: dict = Body(...)) -> dict:
        return node.federation.handle_sync(_bearer(request), payload)

    return app
