"""Administrative command line: serve the portal, load a corpus, manage
users, groups, and peers, run analytics, and check log health."""

import argparse
import csv
import json
import sys
from pathlib import Path

from .analytics import Bucket, EdgeKind, Grouping
from .errors import AnnexError, DuplicateRef, ValidationFailed
from .model import AnnotatorProfile, DocumentRecord, Role
from .node import Node, resolve_config, split_listen
from .portal import create_app
from .sessions import hash_password
from .store import Store


def _node(args: argparse.Namespace) -> Node:
    return Node(resolve_config(data_dir=args.data_dir))


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    config = resolve_config(
        data_dir=args.data_dir,
        system_id=args.system_id,
        annotation_weight=args.annotation_weight,
        session_timeout=args.session_timeout,
        listen=args.listen,
        ui_origin=args.ui_origin,
    )
    host, port = split_listen(config.listen)
    node = Node(config)
    print(f"annex system {config.system_id!r} listening on {config.listen}",
          flush=True)
    uvicorn.run(create_app(node), host=host, port=port, log_level="warning")
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    node = _node(args)
    corpus = Path(args.directory)
    if not corpus.is_dir():
        print(f"not a directory: {corpus}", file=sys.stderr)
        return 1
    decoded: list[DocumentRecord] = []
    seen = set(node.store.documents)
    for path in sorted(corpus.glob("*.json")):
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
            doc = DocumentRecord.from_dict(
                data, default_available_at=node.now())
        except (json.JSONDecodeError, AnnexError, KeyError,
                TypeError) as exc:
            print(f"cannot ingest {path}: {exc}", file=sys.stderr)
            return 1
        if doc.document_ref in seen:
            print(f"cannot ingest {path}: duplicate document "
                  f"{doc.document_ref!r}", file=sys.stderr)
            return 1
        seen.add(doc.document_ref)
        decoded.append(doc)
    for doc in decoded:
        node.store.ingest_document(doc)
    print(f"{len(decoded)} documents ingested")
    return 0


def cmd_user_add(args: argparse.Namespace) -> int:
    node = _node(args)
    profile = AnnotatorProfile(
        annotator_ref=args.ref,
        role=Role(args.role),
        first_name=args.first_name,
        last_name=args.last_name,
        email=args.email,
        postal_address=args.postal_address,
        region=args.region,
        country=args.country,
        activity_area=args.activity_area,
        created_at=node.now(),
    )
    credential = hash_password(args.password) if args.password else None
    node.store.put_user(profile, credential)
    print(f"user {args.ref} added")
    return 0


def cmd_group_add(args: argparse.Namespace) -> int:
    node = _node(args)
    if args.group_id in node.store.groups:
        raise DuplicateRef(f"group {args.group_id!r} exists")
    node.store.set_group(args.group_id, ())
    print(f"group {args.group_id} added")
    return 0


def cmd_group_member(args: argparse.Namespace) -> int:
    node = _node(args)
    node.store.add_group_member(args.group_id, args.user)
    print(f"{args.user} joined {args.group_id}")
    return 0


def cmd_peer_register(args: argparse.Namespace) -> int:
    node = _node(args)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    try:
        peer = node.federation.register_peer(args.peer_id, args.base_url,
                                             modes, token=args.token)
    except ValueError as exc:
        raise ValidationFailed(str(exc)) from exc
    print(f"peer {peer.peer_id} registered; token {peer.token}")
    return 0


def _emit(args: argparse.Namespace, header: list[str],
          rows: list[list], document: dict) -> None:
    if args.format == "csv":
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(rows)
    else:
        print(json.dumps(document, indent=2, sort_keys=True))


def cmd_analyze_group_time(args: argparse.Namespace) -> int:
    node = _node(args)
    matrix = node.analytics.group_time_counts(
        Grouping(args.grouping), Bucket(args.bucket), args.as_user,
        document_ref=args.document_ref, annotator_ref=args.annotator,
        created_from=args.created_from, created_to=args.created_to)
    body = matrix.to_dict()
    rows = [[c["group"], c["bucket_start"], c["count"]]
            for c in body["cells"]]
    _emit(args, ["group", "bucket_start", "count"], rows, body)
    return 0


def cmd_analyze_graph(args: argparse.Namespace) -> int:
    node = _node(args)
    edges = node.analytics.relationship_graph(EdgeKind(args.kind),
                                              args.as_user)
    body = {"kind": args.kind, "edges": [e.to_dict() for e in edges]}
    rows = [[e.a_ref, e.b_ref, e.weight] for e in edges]
    _emit(args, ["a_ref", "b_ref", "weight"], rows, body)
    return 0


def cmd_replay_check(args: argparse.Namespace) -> int:
    first = Store(args.data_dir, fsync=False)
    count = first.load()
    second = Store(args.data_dir, fsync=False)
    second.load()
    if first.snapshot() != second.snapshot():
        print("replay mismatch: two folds of the log disagree",
              file=sys.stderr)
        return 1
    print(f"replay ok: {count} entries")
    return 0


def _add_data_dir(parser: argparse.ArgumentParser,
                  required: bool = True) -> None:
    parser.add_argument("--data-dir", required=required, default=None,
                        help="directory holding the transaction log")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="annex",
        description="federated annotation service")
    commands = parser.add_subparsers(dest="command", required=True)

    serve = commands.add_parser("serve", help="run the HTTP portal")
    _add_data_dir(serve, required=False)
    serve.add_argument("--listen", default=None, help="host:port")
    serve.add_argument("--system-id", default=None)
    serve.add_argument("--annotation-weight", default=None,
                       help="extended-search weight, e.g. 1 or 1/2")
    serve.add_argument("--session-timeout", default=None, type=int)
    serve.add_argument("--ui-origin", default=None)
    serve.set_defaults(handler=cmd_serve)

    ingest = commands.add_parser("ingest",
                                 help="load a directory of document files")
    ingest.add_argument("directory")
    _add_data_dir(ingest)
    ingest.set_defaults(handler=cmd_ingest)

    user = commands.add_parser("user", help="manage users")
    user_sub = user.add_subparsers(dest="user_command", required=True)
    user_add = user_sub.add_parser("add", help="register an annotator")
    _add_data_dir(user_add)
    user_add.add_argument("--ref", required=True)
    user_add.add_argument("--role", required=True,
                          choices=[r.value for r in Role])
    user_add.add_argument("--first-name", required=True)
    user_add.add_argument("--last-name", required=True)
    user_add.add_argument("--email", required=True)
    user_add.add_argument("--postal-address", default="")
    user_add.add_argument("--region", default="")
    user_add.add_argument("--country", required=True)
    user_add.add_argument("--activity-area", required=True)
    user_add.add_argument("--password", default=None)
    user_add.set_defaults(handler=cmd_user_add)

    group = commands.add_parser("group", help="manage proxy groups")
    group_sub = group.add_subparsers(dest="group_command", required=True)
    group_add = group_sub.add_parser("add", help="create an empty group")
    _add_data_dir(group_add)
    group_add.add_argument("--group-id", required=True)
    group_add.set_defaults(handler=cmd_group_add)
    group_member = group_sub.add_parser("member",
                                        help="add a user to a group")
    _add_data_dir(group_member)
    group_member.add_argument("--group-id", required=True)
    group_member.add_argument("--user", required=True)
    group_member.set_defaults(handler=cmd_group_member)

    peer = commands.add_parser("peer", help="manage federation peers")
    peer_sub = peer.add_subparsers(dest="peer_command", required=True)
    peer_register = peer_sub.add_parser("register",
                                        help="register a remote system")
    _add_data_dir(peer_register)
    peer_register.add_argument("--peer-id", required=True)
    peer_register.add_argument("--base-url", required=True)
    peer_register.add_argument("--modes", required=True,
                               help="comma-separated federation modes")
    peer_register.add_argument("--token", default=None)
    peer_register.set_defaults(handler=cmd_peer_register)

    analyze = commands.add_parser("analyze", help="annotation analytics")
    analyze_sub = analyze.add_subparsers(dest="analyze_command",
                                         required=True)
    group_time = analyze_sub.add_parser("group-time",
                                        help="counts per group and period")
    _add_data_dir(group_time)
    group_time.add_argument("--as-user", required=True)
    group_time.add_argument("--grouping", required=True,
                            choices=[g.value for g in Grouping])
    group_time.add_argument("--bucket", required=True,
                            choices=[b.value for b in Bucket])
    group_time.add_argument("--document-ref", default=None)
    group_time.add_argument("--annotator", default=None)
    group_time.add_argument("--created-from", type=int, default=None)
    group_time.add_argument("--created-to", type=int, default=None)
    group_time.add_argument("--format", choices=["json", "csv"],
                            default="json")
    group_time.set_defaults(handler=cmd_analyze_group_time)
    graph = analyze_sub.add_parser("graph", help="relationship edges")
    _add_data_dir(graph)
    graph.add_argument("--as-user", required=True)
    graph.add_argument("--kind", required=True,
                       choices=[k.value for k in EdgeKind])
    graph.add_argument("--format", choices=["json", "csv"],
                       default="json")
    graph.set_defaults(handler=cmd_analyze_graph)

    replay = commands.add_parser("replay-check",
                                 help="verify the log folds cleanly")
    _add_data_dir(replay)
    replay.set_defaults(handler=cmd_replay_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except AnnexError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
