"""Manifest canonical form, signing, packaging, and the 7-step loader."""

from __future__ import annotations

import json

import pytest
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from conftest import SIGNER_ID, make_artifact, make_root, make_session
from skillgate.canonical import sha256_hex
from skillgate.capabilities import CapabilityToken
from skillgate.errors import (
    AttestationAuthorityError,
    BadSignatureError,
    HashMismatchError,
    LoaderError,
    OperatorClearanceError,
    ParseError,
    ReplayError,
    SignerClearanceError,
    UnknownSignerError,
)
from skillgate.levels import VerificationLevel
from skillgate.skillpkg import (
    ReplayGuard,
    SkillArtifact,
    canonicalize,
    collect_package_files,
    pack_files,
    parse_manifest,
    read_skill_package,
    sign_skill,
    unpack_files,
    verify_skill_signature,
    write_skill_package,
)


class TestCanonicalManifest:
    def test_round_trip_fixpoint(self, private_key):
        manifest = make_artifact(private_key).manifest
        encoded = canonicalize(manifest)
        reparsed = parse_manifest(json.loads(encoded))
        assert canonicalize(reparsed) == encoded

    def test_field_order_irrelevant(self, private_key):
        manifest = make_artifact(private_key).manifest
        raw = manifest.to_dict()
        shuffled = dict(reversed(list(raw.items())))
        assert canonicalize(parse_manifest(shuffled)) == canonicalize(manifest)

    def test_pollution_key_rejected(self, private_key):
        raw = make_artifact(private_key).manifest.to_dict()
        raw["__proto__"] = {}
        with pytest.raises(ParseError):
            parse_manifest(raw)

    def test_unknown_cap_token_rejected(self, private_key):
        raw = make_artifact(private_key).manifest.to_dict()
        raw["caps"] = [{"token": "fs.format", "target": ""}]
        with pytest.raises(ParseError):
            parse_manifest(raw)

    def test_version_must_be_positive_int(self, private_key):
        raw = make_artifact(private_key).manifest.to_dict()
        for bad in (0, -1, "3", True):
            raw["version"] = bad
            with pytest.raises(ParseError):
                parse_manifest(raw)

    def test_absent_verification_defaults_unverified(self, private_key):
        raw = make_artifact(private_key).manifest.to_dict()
        del raw["verification"]
        assert parse_manifest(raw).verification is VerificationLevel.UNVERIFIED


class TestSigning:
    def test_sign_then_verify(self, private_key):
        artifact = make_artifact(private_key)
        assert verify_skill_signature(
            artifact.manifest, artifact.content, artifact.signature,
            private_key.public_key(),
        )

    def test_content_flip_breaks_verification(self, private_key):
        artifact = make_artifact(private_key)
        tampered = bytes([artifact.content[0] ^ 1]) + artifact.content[1:]
        assert not verify_skill_signature(
            artifact.manifest, tampered, artifact.signature, private_key.public_key()
        )

    def test_hash_mismatch_refused_at_sign(self, private_key):
        artifact = make_artifact(private_key)
        with pytest.raises(HashMismatchError):
            sign_skill(artifact.manifest, artifact.content + b"x", private_key)


class TestPackaging:
    def test_pack_unpack_round_trip(self):
        files = {"SKILL.md": b"# hi\n", "scripts/run.sh": b"echo hi\n"}
        assert unpack_files(pack_files(files)) == files

    def test_path_escape_rejected(self):
        with pytest.raises(ParseError):
            pack_files({"../evil": b""})
        with pytest.raises(ParseError):
            pack_files({"/abs": b""})

    def test_dir_round_trip(self, tmp_path, private_key):
        skill_dir = tmp_path / "pkg"
        (skill_dir / "scripts").mkdir(parents=True)
        (skill_dir / "SKILL.md").write_bytes(b"# body\n")
        (skill_dir / "scripts" / "go.py").write_bytes(b"print(1)\n")
        files = collect_package_files(skill_dir)
        assert set(files) == {"SKILL.md", "scripts/go.py"}
        artifact = make_artifact(private_key, files=files)
        write_skill_package(skill_dir, artifact.manifest, artifact.signature)
        loaded = read_skill_package(skill_dir)
        assert loaded.content == artifact.content
        assert loaded.signature == artifact.signature
        assert parse_manifest(loaded.manifest) == artifact.manifest

    def test_symlink_rejected(self, tmp_path):
        skill_dir = tmp_path / "pkg"
        skill_dir.mkdir()
        (skill_dir / "SKILL.md").write_bytes(b"x")
        (skill_dir / "link").symlink_to(tmp_path)
        with pytest.raises(ParseError):
            collect_package_files(skill_dir)


class TestReplayGuard:
    def test_monotone(self):
        guard = ReplayGuard()
        guard.check("s", 3)
        with pytest.raises(ReplayError):
            guard.check("s", 2)
        with pytest.raises(ReplayError):
            guard.check("s", 3)
        guard.check("s", 4)
        guard.check("other", 1)


@pytest.fixture
def loader_env(keypair, private_key, tmp_path):
    root = make_root(keypair[1], max_clearance="3:a,b:",
                     max_level=VerificationLevel.TESTED)
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    session = make_session(root, corpus, operator_clearance="2:a,b:")
    return root, session, private_key


class TestLoaderMatrix:
    """One targeted artifact per admission step, plus a fully valid one."""

    def _reject(self, session, artifact, error_type, step):
        before = len(session.log)
        with pytest.raises(error_type):
            session.load_skill(artifact)
        rejects = [r for r in session.log.records[before:]
                   if r.record_type == "skill.load.reject"]
        assert len(rejects) == 1
        assert rejects[0].payload["step"] == step
        assert rejects[0].payload["error"] == error_type.__name__

    def test_valid_artifact_loads(self, loader_env):
        _, session, key = loader_env
        loaded = session.load_skill(make_artifact(key, label="1:a:"))
        assert loaded.effective_level is VerificationLevel.DECLARED
        assert any(r.record_type == "skill.load.ok" for r in session.log.records)

    def test_step1_unknown_field(self, loader_env):
        _, session, key = loader_env
        artifact = make_artifact(key)
        raw = artifact.manifest.to_dict()
        raw["surprise"] = 1
        bad = SkillArtifact(manifest=raw, content=artifact.content,
                            signature=artifact.signature)
        self._reject(session, bad, ParseError, 1)

    def test_step1_prototype_pollution(self, loader_env):
        _, session, key = loader_env
        artifact = make_artifact(key)
        raw = artifact.manifest.to_dict()
        raw["__proto__"] = {"polluted": True}
        bad = SkillArtifact(manifest=raw, content=artifact.content,
                            signature=artifact.signature)
        self._reject(session, bad, ParseError, 1)

    def test_step2_unknown_signer(self, loader_env):
        _, session, key = loader_env
        bad = make_artifact(key, signer="ghost")
        self._reject(session, bad, UnknownSignerError, 2)

    def test_step3_bad_signature(self, loader_env):
        _, session, key = loader_env
        artifact = make_artifact(key)
        flipped = bytes([artifact.signature[0] ^ 1]) + artifact.signature[1:]
        bad = SkillArtifact(manifest=artifact.manifest, content=artifact.content,
                            signature=flipped)
        self._reject(session, bad, BadSignatureError, 3)

    def test_step4_signer_over_clearance(self, loader_env):
        _, session, key = loader_env
        bad = make_artifact(key, label="4::")
        self._reject(session, bad, SignerClearanceError, 4)

    def test_step5_operator_over_clearance(self, loader_env):
        _, session, key = loader_env
        bad = make_artifact(key, label="3:a:")
        self._reject(session, bad, OperatorClearanceError, 5)

    def test_step6_attestation_over_authority(self, loader_env):
        _, session, key = loader_env
        bad = make_artifact(key, verification=VerificationLevel.FORMAL)
        self._reject(session, bad, AttestationAuthorityError, 6)

    def test_step7_version_replay(self, loader_env):
        _, session, key = loader_env
        session.load_skill(make_artifact(key, version=3))
        stale = make_artifact(key, version=2,
                              files={"SKILL.md": b"# older build\n"})
        self._reject(session, stale, ReplayError, 7)

    def test_equal_version_is_a_replay(self, loader_env):
        _, session, key = loader_env
        session.load_skill(make_artifact(key, version=3))
        again = make_artifact(key, version=3, files={"SKILL.md": b"# resigned\n"})
        self._reject(session, again, ReplayError, 7)


class TestLoaderOrdering:
    def test_earliest_broken_step_wins(self, loader_env):
        _, session, key = loader_env
        # Broken at 3 (signature) and 4 (clearance): must report 3.
        artifact = make_artifact(key, label="4::")
        flipped = bytes([artifact.signature[0] ^ 1]) + artifact.signature[1:]
        bad = SkillArtifact(manifest=artifact.manifest, content=artifact.content,
                            signature=flipped)
        with pytest.raises(BadSignatureError):
            session.load_skill(bad)
        last = session.log.records[-1]
        assert last.payload["step"] == 3

    def test_unknown_field_beats_unknown_signer(self, loader_env):
        _, session, key = loader_env
        artifact = make_artifact(key, signer="ghost")
        raw = artifact.manifest.to_dict()
        raw["surprise"] = 1
        bad = SkillArtifact(manifest=raw, content=artifact.content,
                            signature=artifact.signature)
        with pytest.raises(ParseError):
            session.load_skill(bad)
        assert session.log.records[-1].payload["step"] == 1

    def test_content_hash_mismatch_is_step1(self, loader_env):
        _, session, key = loader_env
        artifact = make_artifact(key)
        bad = SkillArtifact(manifest=artifact.manifest,
                            content=artifact.content + b"tail",
                            signature=artifact.signature)
        with pytest.raises(ParseError):
            session.load_skill(bad)
        assert session.log.records[-1].payload["step"] == 1


class TestLevelImmutability:
    def test_manifest_omitting_verification_loads_unverified(self, loader_env):
        _, session, key = loader_env
        artifact = make_artifact(key, verification=VerificationLevel.UNVERIFIED)
        raw = artifact.manifest.to_dict()
        del raw["verification"]
        loaded = session.load_skill(
            SkillArtifact(manifest=raw, content=artifact.content,
                          signature=artifact.signature)
        )
        assert loaded.effective_level is VerificationLevel.UNVERIFIED

    def test_no_elevation_surface_exists(self, loader_env):
        _, session, key = loader_env
        loaded = session.load_skill(make_artifact(key))
        for name in set(dir(loaded)) | set(dir(session)):
            assert "elevate" not in name.lower()
            assert "set_verification" not in name.lower()
        with pytest.raises(Exception):
            loaded.effective_level = VerificationLevel.FORMAL

    def test_loaded_artifact_is_frozen(self, loader_env):
        _, session, key = loader_env
        loaded = session.load_skill(make_artifact(key))
        with pytest.raises(Exception):
            loaded.artifact.content = b"new"
        assert loaded.frozen
