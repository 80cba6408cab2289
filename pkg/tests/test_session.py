"""Session lifecycle: bootstrap gate, freeze, interception, round checks."""

from __future__ import annotations

import pytest

from conftest import make_artifact, make_root, make_session
from skillgate.audit import AuditLog
from skillgate.brokers import AllowAllBroker, DenyAllBroker
from skillgate.capabilities import CapabilityToken
from skillgate.errors import (
    SessionAborted,
    SessionFrozenError,
    UnlockedRootError,
)
from skillgate.gate import RequestEnvelope
from skillgate.lattice import parse_label
from skillgate.levels import VerificationLevel
from skillgate.session import Session
from skillgate.skillpkg import CapabilityDecl, collect_package_files, pack_files, write_skill_package
from skillgate.canonical import sha256_hex
from skillgate.trustroot import TrustRoot


def _write_env(target, action="delete", **extra):
    args = {"target": target, "action": action}
    args.update(extra)
    return RequestEnvelope(op="fs.write.irrev", args=args, origin_skill_id="skill-a")


class TestBootstrapDiscipline:
    def test_unlocked_root_refused(self, keypair, tmp_path):
        root = make_root(keypair[1], locked=False)
        with pytest.raises(UnlockedRootError):
            make_session(root, tmp_path)

    def test_session_start_audits_lock_posture(self, trust_root, tmp_path):
        session = make_session(trust_root, tmp_path)
        assert session.log.records[0].record_type == "trustroot.lock"

    def test_load_after_freeze_refused(self, trust_root, private_key, corpus_dir):
        session = make_session(trust_root, corpus_dir)
        session.load_skill(make_artifact(private_key))
        session.freeze()
        with pytest.raises(SessionFrozenError):
            session.load_skill(make_artifact(private_key, skill_id="late", version=1))

    def test_first_dispatch_freezes(self, live_session, private_key):
        live_session.dispatch(RequestEnvelope(
            op="fs.read", args={"target": "doc_0.txt"}, origin_skill_id="skill-a"))
        assert live_session.phase == "active"
        with pytest.raises(SessionFrozenError):
            live_session.load_skill(make_artifact(private_key, skill_id="late"))

    def test_tool_registration_is_bootstrap_only(self, live_session):
        live_session.register_tool("fmt", reversible=True)
        live_session.freeze()
        with pytest.raises(SessionFrozenError):
            live_session.register_tool("late-tool")


class TestReversiblePath:
    def test_buffered_write_then_commit_audits(self, live_session, corpus_dir):
        outcome = live_session.dispatch(RequestEnvelope(
            op="fs.write.rev", args={"target": "doc_0.txt", "content": "new text\n"},
            origin_skill_id="skill-a"))
        assert outcome.status == "buffered"
        assert (corpus_dir / "doc_0.txt").read_text() == "document 0\n"
        live_session.commit_buffer()
        assert (corpus_dir / "doc_0.txt").read_text() == "new text\n"
        assert any(r.record_type == "reversible.executed" for r in live_session.log.records)

    def test_buffered_write_then_rollback(self, live_session, corpus_dir):
        live_session.dispatch(RequestEnvelope(
            op="fs.write.rev", args={"target": "doc_1.txt", "content": "scribble"},
            origin_skill_id="skill-a"))
        live_session.rollback_buffer()
        assert (corpus_dir / "doc_1.txt").read_text() == "document 1\n"
        assert not any(r.record_type == "reversible.executed"
                       for r in live_session.log.records)


class TestMutationInterception:
    def _session_with_installed_skill(self, keypair, private_key, tmp_path, broker):
        root = make_root(keypair[1])
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        install = tmp_path / "skills" / "skill-a"
        install.mkdir(parents=True)
        (install / "SKILL.md").write_bytes(b"# installed skill\n")
        files = collect_package_files(install)
        artifact = make_artifact(
            private_key,
            caps=frozenset({CapabilityDecl(CapabilityToken.FS_WRITE_IRREV, "")}),
            files=files,
        )
        write_skill_package(install, artifact.manifest, artifact.signature)
        session = make_session(root, corpus, broker=broker)
        session.load_skill(artifact, install_path=install)
        return session, install

    def _mutation_records(self, session):
        return [r for r in session.log.records if r.record_type == "skill.mutation.attempt"]

    def test_denied_mutation_audited_with_hashes_file_unchanged(
            self, keypair, private_key, tmp_path):
        session, install = self._session_with_installed_skill(
            keypair, private_key, tmp_path, DenyAllBroker())
        pre = sha256_hex(pack_files(collect_package_files(install)))
        outcome = session.dispatch(_write_env(str(install / "SKILL.md"),
                                              action="overwrite", content="hijacked"))
        assert outcome.status == "denied"
        records = self._mutation_records(session)
        assert len(records) == 1
        payload = records[0].payload
        assert payload["preHash"] == pre
        assert payload["proposedHash"] != pre
        assert payload["decision"] == "deny"
        assert (install / "SKILL.md").read_bytes() == b"# installed skill\n"
        assert session.requires_reverification == set()

    def test_approved_mutation_changes_disk_not_memory(self, keypair, private_key, tmp_path):
        session, install = self._session_with_installed_skill(
            keypair, private_key, tmp_path, AllowAllBroker())
        loaded_before = session.loaded_skills()["skill-a"]
        outcome = session.dispatch(_write_env(str(install / "SKILL.md"),
                                              action="overwrite", content="hijacked"))
        assert outcome.status == "executed"
        payload = self._mutation_records(session)[0].payload
        assert payload["decision"] == "approve"
        assert (install / "SKILL.md").read_bytes() == b"hijacked"
        assert session.loaded_skills()["skill-a"].artifact.content == loaded_before.artifact.content
        assert session.requires_reverification == {"skill-a"}

    def test_mutation_never_auto_approves(self, keypair, private_key, tmp_path):
        # Even with blanket declared caps the mutation consults the broker.
        session, install = self._session_with_installed_skill(
            keypair, private_key, tmp_path, DenyAllBroker())
        outcome = session.dispatch(_write_env(str(install / "SKILL.md"),
                                              action="overwrite", content="x"))
        assert outcome.status == "denied"
        request = next(r for r in session.log.records
                       if r.record_type == "irreversible.request")
        assert request.payload["route"] == "hitl-consult-broker"

    def test_reversible_envelope_on_skill_path_still_intercepted(
            self, keypair, private_key, tmp_path):
        session, install = self._session_with_installed_skill(
            keypair, private_key, tmp_path, DenyAllBroker())
        outcome = session.dispatch(RequestEnvelope(
            op="fs.write.rev",
            args={"target": str(install / "SKILL.md"), "content": "sneaky"},
            origin_skill_id="skill-a"))
        assert outcome.status == "denied"
        assert self._mutation_records(session)

    def test_write_outside_skill_paths_not_intercepted(self, keypair, private_key, tmp_path):
        session, _ = self._session_with_installed_skill(
            keypair, private_key, tmp_path, AllowAllBroker())
        (tmp_path / "corpus" / "plain.txt").write_text("hi")
        session.dispatch(_write_env("plain.txt"))
        assert not self._mutation_records(session)


class TestRoundCheck:
    def _tested_session(self, keypair, private_key, corpus_dir):
        root = make_root(keypair[1])
        session = make_session(root, corpus_dir, broker=AllowAllBroker())
        artifact = make_artifact(
            private_key,
            caps=frozenset({CapabilityDecl(CapabilityToken.FS_WRITE_IRREV, "")}),
            verification=VerificationLevel.TESTED,
        )
        session.load_skill(artifact)
        session.freeze()
        return session

    def test_clean_round_ok(self, keypair, private_key, corpus_dir):
        session = self._tested_session(keypair, private_key, corpus_dir)
        session.dispatch(_write_env("doc_0.txt"))
        assert session.round_boundary() == "ok"
        assert not session.halted

    def test_stealth_write_aborts(self, keypair, private_key, corpus_dir):
        session = self._tested_session(keypair, private_key, corpus_dir)
        (corpus_dir / "doc_1.txt").write_text("tampered outside the gate")
        assert session.round_boundary() == "abort"
        assert session.halted
        assert session.log.records[-1].record_type == "session.abort"
        with pytest.raises(SessionAborted):
            session.dispatch(_write_env("doc_0.txt"))

    def test_declared_level_skips_check(self, trust_root, private_key, corpus_dir):
        session = make_session(trust_root, corpus_dir)
        session.load_skill(make_artifact(private_key))
        session.freeze()
        (corpus_dir / "doc_1.txt").write_text("changed but unchecked")
        assert session.round_boundary() == "ok"

    def test_committed_reversible_writes_do_not_abort(self, keypair, private_key,
                                                      corpus_dir):
        session = self._tested_session(keypair, private_key, corpus_dir)
        session.dispatch(RequestEnvelope(
            op="fs.write.rev", args={"target": "doc_2.txt", "content": "buffered"},
            origin_skill_id="skill-a"))
        session.commit_buffer()
        assert session.round_boundary() == "ok"


class TestStorageFailure:
    def test_append_failure_halts_the_session(self, keypair, private_key, tmp_path,
                                              monkeypatch):
        from skillgate.errors import StorageError

        root = make_root(keypair[1])
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        (corpus / "doc.txt").write_text("x")
        session = make_session(root, corpus, broker=AllowAllBroker())
        session.load_skill(make_artifact(private_key))

        def broken_append(*args, **kwargs):
            raise StorageError("disk full")

        monkeypatch.setattr(session.log, "append", broken_append)
        with pytest.raises(StorageError):
            session.dispatch(_write_env("doc.txt"))
        assert session.halted
        monkeypatch.undo()
        with pytest.raises(SessionAborted):
            session.dispatch(_write_env("doc.txt"))


class TestProfile:
    def test_unknown_profile_rejected(self, trust_root, tmp_path):
        with pytest.raises(ValueError):
            Session(
                root=trust_root,
                operator_clearance=parse_label("0::"),
                log=AuditLog(mode="harness"),
                broker=DenyAllBroker(),
                profile="yolo",
            )

    def test_no_bypass_shaped_configuration_exists(self):
        import inspect

        params = inspect.signature(Session.__init__).parameters
        for name in params:
            lowered = name.lower()
            assert "bypass" not in lowered and "disable" not in lowered
            assert "skip" not in lowered and "unsafe" not in lowered
