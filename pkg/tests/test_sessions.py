"""Session lifecycle and implicit-profile synthesis.

The oracle for profiles is a from-scratch fold over the transaction log,
written here without reference to the synthesizer's internals.
"""

import random

import pytest

from annex.errors import (
    NonMonotonicTime,
    SessionAlreadyOpen,
    SessionClosed,
    TimeBeforeOpen,
    Unauthorized,
    UnknownRef,
    UnknownUser,
)
from annex.model import EventKind, SessionEvent
from annex.sessions import (
    ImplicitProfile,
    ProfileSynthesizer,
    hash_password,
    verify_password,
)
from annex.store import Store
from conftest import BASE_AT, make_annotation, make_document, make_profile


def fold_profile(store, annotator_ref):
    """Pure fold over the log: the definition the synthesizer must match."""
    total = 0
    docs = {}
    queries = []
    count = 0
    for entry in store.entries:
        payload = entry.payload
        if entry.op.value == "open_session":
            if payload["annotator_ref"] == annotator_ref:
                count += 1
        elif entry.op.value == "append_event":
            session = store.sessions[payload["session_ref"]]
            if session.annotator_ref != annotator_ref:
                continue
            event = payload["event"]
            if event["kind"] == "document_consulted":
                docs[event["document_ref"]] = \
                    docs.get(event["document_ref"], 0) + 1
            elif event["kind"] == "query_issued":
                queries.append((tuple(event["terms"]), event["at"]))
        elif entry.op.value == "close_session":
            session = store.sessions[payload["session_ref"]]
            if session.annotator_ref == annotator_ref:
                total += session.closed_at - session.opened_at
    return ImplicitProfile(
        annotator_ref=annotator_ref,
        total_time_on_system=total,
        documents_consulted=docs,
        queries_issued=tuple(queries),
        sessions_count=count,
    )


def build(idle_timeout=3600, tmp_path=None):
    store = Store(tmp_path, clock=lambda: BASE_AT)
    synth = ProfileSynthesizer(store, idle_timeout=idle_timeout)
    store.put_user(make_profile("u1"))
    store.put_user(make_profile("u2"))
    store.ingest_document(make_document("d1"))
    store.ingest_document(make_document("d2", body="medical accounting"))
    return store, synth


def consult(at, ref):
    return SessionEvent(at, EventKind.DOCUMENT_CONSULTED, document_ref=ref)


def query(at, *terms):
    return SessionEvent(at, EventKind.QUERY_ISSUED, terms=terms)


class TestLifecycle:
    def test_open_gives_empty_session(self):
        _, synth = build()
        session = synth.open_session("u1", BASE_AT)
        assert session.events == ()
        assert session.is_open

    def test_open_twice_rejected(self):
        _, synth = build()
        synth.open_session("u1", BASE_AT)
        with pytest.raises(SessionAlreadyOpen):
            synth.open_session("u1", BASE_AT + 10)

    def test_unknown_user(self):
        _, synth = build()
        with pytest.raises(UnknownUser):
            synth.open_session("ghost", BASE_AT)

    def test_consult_order_preserved(self):
        _, synth = build()
        session = synth.open_session("u1", BASE_AT)
        synth.record_event(session.session_ref, consult(BASE_AT + 5, "d1"))
        updated = synth.record_event(session.session_ref,
                                     consult(BASE_AT + 9, "d2"))
        assert [e.document_ref for e in updated.events] == ["d1", "d2"]

    def test_non_monotonic_event(self):
        _, synth = build()
        session = synth.open_session("u1", BASE_AT)
        synth.record_event(session.session_ref, consult(BASE_AT + 9, "d1"))
        with pytest.raises(NonMonotonicTime):
            synth.record_event(session.session_ref, consult(BASE_AT + 5, "d1"))

    def test_unknown_payload_ref(self):
        _, synth = build()
        session = synth.open_session("u1", BASE_AT)
        with pytest.raises(UnknownRef):
            synth.record_event(session.session_ref, consult(BASE_AT + 5, "d9"))

    def test_zero_length_session(self):
        _, synth = build()
        session = synth.open_session("u1", BASE_AT)
        closed = synth.close_session(session.session_ref, BASE_AT)
        assert closed.closed_at == BASE_AT
        profile = synth.compute_implicit_profile("u1")
        assert profile.total_time_on_system == 0
        assert profile.sessions_count == 1

    def test_sixty_second_session(self):
        _, synth = build()
        session = synth.open_session("u1", BASE_AT + 100)
        synth.close_session(session.session_ref, BASE_AT + 160)
        assert synth.compute_implicit_profile("u1").total_time_on_system == 60

    def test_close_twice(self):
        _, synth = build()
        session = synth.open_session("u1", BASE_AT)
        synth.close_session(session.session_ref, BASE_AT + 10)
        with pytest.raises(SessionClosed):
            synth.close_session(session.session_ref, BASE_AT + 20)

    def test_close_before_open(self):
        _, synth = build()
        session = synth.open_session("u1", BASE_AT)
        with pytest.raises(TimeBeforeOpen):
            synth.close_session(session.session_ref, BASE_AT - 1)


class TestIdleTimeout:
    def test_event_after_idle_gap_closes_session(self):
        _, synth = build(idle_timeout=100)
        session = synth.open_session("u1", BASE_AT)
        synth.record_event(session.session_ref, consult(BASE_AT + 10, "d1"))
        with pytest.raises(SessionClosed):
            synth.record_event(session.session_ref,
                               consult(BASE_AT + 110, "d1"))
        closed = synth._store.sessions[session.session_ref]
        assert closed.closed_at == BASE_AT + 10

    def test_gap_below_timeout_still_alive(self):
        _, synth = build(idle_timeout=100)
        session = synth.open_session("u1", BASE_AT)
        synth.record_event(session.session_ref, consult(BASE_AT + 99, "d1"))
        assert synth._store.sessions[session.session_ref].is_open

    def test_reopen_after_idle(self):
        store, synth = build(idle_timeout=100)
        first = synth.open_session("u1", BASE_AT)
        second = synth.open_session("u1", BASE_AT + 100)
        assert store.sessions[first.session_ref].closed_at == BASE_AT
        assert second.is_open

    def test_reopen_just_before_idle_rejected(self):
        _, synth = build(idle_timeout=100)
        synth.open_session("u1", BASE_AT)
        with pytest.raises(SessionAlreadyOpen):
            synth.open_session("u1", BASE_AT + 99)

    def test_sweep_closes_at_last_activity(self):
        store, synth = build(idle_timeout=100)
        s1 = synth.open_session("u1", BASE_AT)
        synth.record_event(s1.session_ref, consult(BASE_AT + 40, "d1"))
        s2 = synth.open_session("u2", BASE_AT + 90)
        closed = synth.sweep_idle(BASE_AT + 150)
        assert closed == [s1.session_ref]
        assert store.sessions[s1.session_ref].closed_at == BASE_AT + 40
        assert store.sessions[s2.session_ref].is_open


class TestProfiles:
    def test_no_sessions_all_zero(self):
        _, synth = build()
        profile = synth.compute_implicit_profile("u1")
        assert profile == ImplicitProfile(annotator_ref="u1")

    def test_unknown_user(self):
        _, synth = build()
        with pytest.raises(UnknownUser):
            synth.compute_implicit_profile("ghost")

    def test_two_session_example(self):
        _, synth = build()
        s1 = synth.open_session("u1", BASE_AT)
        synth.record_event(s1.session_ref, consult(BASE_AT + 10, "d1"))
        synth.record_event(s1.session_ref, consult(BASE_AT + 20, "d2"))
        synth.close_session(s1.session_ref, BASE_AT + 60)
        s2 = synth.open_session("u1", BASE_AT + 100)
        synth.record_event(s2.session_ref, consult(BASE_AT + 110, "d1"))
        synth.close_session(s2.session_ref, BASE_AT + 130)
        profile = synth.compute_implicit_profile("u1")
        assert profile.total_time_on_system == 90
        assert profile.documents_consulted == {"d1": 2, "d2": 1}
        assert profile.sessions_count == 2

    def test_queries_recorded_in_order(self):
        _, synth = build()
        session = synth.open_session("u1", BASE_AT)
        synth.record_event(session.session_ref, query(BASE_AT + 1, "tax"))
        synth.record_event(session.session_ref,
                           query(BASE_AT + 2, "audit", "risk"))
        profile = synth.compute_implicit_profile("u1")
        assert profile.queries_issued == ((("tax",), BASE_AT + 1),
                                          (("audit", "risk"), BASE_AT + 2))

    def test_open_session_contributes_no_time(self):
        _, synth = build()
        session = synth.open_session("u1", BASE_AT)
        synth.record_event(session.session_ref, consult(BASE_AT + 50, "d1"))
        profile = synth.compute_implicit_profile("u1")
        assert profile.total_time_on_system == 0
        assert profile.documents_consulted == {"d1": 1}

    def test_explicit_profile_snapshot(self):
        store, synth = build()
        assert synth.explicit_profile("u1") == store.get_user("u1")


class TestFoldEquivalence:
    def run_random_workload(self, store, synth, rng, steps, start=BASE_AT):
        users = ["u1", "u2"]
        now = {"t": start}
        for _ in range(steps):
            now["t"] += rng.randrange(1, 30)
            user = rng.choice(users)
            open_ref = store.open_session_by_user.get(user)
            action = rng.random()
            try:
                if open_ref is None or action < 0.15:
                    synth.open_session(user, now["t"])
                elif action < 0.30:
                    synth.close_session(open_ref, now["t"])
                elif action < 0.65:
                    synth.record_event(open_ref,
                                       consult(now["t"],
                                               rng.choice(["d1", "d2"])))
                else:
                    synth.record_event(open_ref, query(now["t"], "tax"))
            except (SessionAlreadyOpen, SessionClosed):
                pass
        return now["t"]

    def test_incremental_equals_fold(self):
        store, synth = build()
        rng = random.Random(101)
        self.run_random_workload(store, synth, rng, 400)
        for user in ("u1", "u2"):
            assert synth.compute_implicit_profile(user) == \
                fold_profile(store, user)

    def test_counters_never_decrease(self):
        store, synth = build()
        rng = random.Random(55)
        last = {u: (0, 0) for u in ("u1", "u2")}
        clock = BASE_AT
        for _ in range(40):
            clock = self.run_random_workload(store, synth, rng, 10,
                                             start=clock)
            for user in ("u1", "u2"):
                profile = synth.compute_implicit_profile(user)
                time_now = (profile.total_time_on_system,
                            profile.sessions_count)
                assert time_now >= last[user]
                last[user] = time_now

    def test_profiles_survive_replay(self, tmp_path):
        store, synth = build(tmp_path=tmp_path)
        rng = random.Random(77)
        self.run_random_workload(store, synth, rng, 200)
        expected = {u: synth.compute_implicit_profile(u)
                    for u in ("u1", "u2")}
        reopened = Store(tmp_path)
        rebuilt = ProfileSynthesizer(reopened)
        reopened.load()
        for user, profile in expected.items():
            assert rebuilt.compute_implicit_profile(user) == profile

    def test_annotation_event_agrees_with_store(self):
        store, synth = build()
        session = synth.open_session("u1", BASE_AT)
        ann = make_annotation("a1", store.get_document("d1"),
                              session_ref=session.session_ref)
        store.append_annotation(ann)
        events = store.sessions[session.session_ref].events
        assert [e.context_ref for e in events] == ["a1"]
        # Annotation events do not perturb consult or query tallies.
        profile = synth.compute_implicit_profile("u1")
        assert profile.documents_consulted == {}
        assert profile.queries_issued == ()


class TestPasswords:
    def test_round_trip(self):
        credential = hash_password("open sesame")
        assert verify_password(credential, "open sesame")
        assert not verify_password(credential, "open says me")

    def test_salts_differ(self):
        a = hash_password("same")
        b = hash_password("same")
        assert a["salt"] != b["salt"]
        assert a["hash"] != b["hash"]

    def test_login_flow(self):
        store, synth = build()
        store.put_user(make_profile("u3"), credential=hash_password("pw"))
        session = synth.login("u3", "pw", BASE_AT)
        assert session.is_open
        with pytest.raises(Unauthorized):
            synth.login("u3", "wrong", BASE_AT + 5000)
        with pytest.raises(UnknownUser):
            synth.login("nobody", "pw", BASE_AT)

    def test_login_without_credential_rejected(self):
        _, synth = build()
        with pytest.raises(Unauthorized):
            synth.login("u1", "anything", BASE_AT)
