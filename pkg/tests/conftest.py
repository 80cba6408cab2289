"""Shared builders for runtime objects used across the suite."""

from __future__ import annotations

from pathlib import Path

import pytest
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from skillgate.audit import AuditLog
from skillgate.brokers import AllowAllBroker, Broker
from skillgate.canonical import sha256_hex
from skillgate.capabilities import CapabilityToken
from skillgate.host import FilesystemHost
from skillgate.lattice import Label, parse_label
from skillgate.levels import VerificationLevel
from skillgate.session import Session
from skillgate.skillpkg import (
    CapabilityDecl,
    Manifest,
    SkillArtifact,
    generate_keypair,
    pack_files,
    sign_skill,
)
from skillgate.trustroot import SignerEntry, TrustRoot

TEST_KEY_SEED = b"test-signer"
SIGNER_ID = "signer-1"


@pytest.fixture
def keypair() -> tuple[bytes, bytes]:
    return generate_keypair(TEST_KEY_SEED)


@pytest.fixture
def private_key(keypair) -> Ed25519PrivateKey:
    return Ed25519PrivateKey.from_private_bytes(keypair[0])


def make_root(
    pub: bytes,
    key_id: str = SIGNER_ID,
    max_clearance: str = "3:a,b:",
    max_level: VerificationLevel = VerificationLevel.TESTED,
    locked: bool = True,
) -> TrustRoot:
    root = TrustRoot()
    root.set(
        SignerEntry(
            key_id=key_id,
            pub_key=pub,
            max_clearance=parse_label(max_clearance),
            max_verification_level=max_level,
        )
    )
    if locked:
        root.lock()
    return root


@pytest.fixture
def trust_root(keypair) -> TrustRoot:
    return make_root(keypair[1])


def make_artifact(
    private: Ed25519PrivateKey,
    skill_id: str = "skill-a",
    label: str = "1:a:",
    caps: frozenset[CapabilityDecl] | None = None,
    signer: str = SIGNER_ID,
    version: int = 1,
    verification: VerificationLevel = VerificationLevel.DECLARED,
    files: dict[str, bytes] | None = None,
) -> SkillArtifact:
    content = pack_files(files or {"SKILL.md": b"# test skill\n"})
    manifest = Manifest(
        skill_id=skill_id,
        label=parse_label(label),
        caps=caps if caps is not None else frozenset(
            {CapabilityDecl(CapabilityToken.FS_WRITE_IRREV, "")}
        ),
        signer=signer,
        version=version,
        verification=verification,
        content_hash=sha256_hex(content),
    )
    return SkillArtifact(
        manifest=manifest, content=content, signature=sign_skill(manifest, content, private)
    )


def make_session(
    root: TrustRoot,
    corpus: Path,
    broker: Broker | None = None,
    operator_clearance: str = "3:a,b:",
    seed: int = 0,
    **kwargs,
) -> Session:
    return Session(
        root=root,
        operator_clearance=parse_label(operator_clearance),
        log=kwargs.pop("log", AuditLog(mode="harness")),
        broker=broker or AllowAllBroker(),
        corpus_root=corpus,
        host=kwargs.pop("host", FilesystemHost(corpus)),
        seed=seed,
        **kwargs,
    )


@pytest.fixture
def corpus_dir(tmp_path: Path) -> Path:
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for i in range(3):
        (corpus / f"doc_{i}.txt").write_text(f"document {i}\n", encoding="utf-8")
    return corpus


@pytest.fixture
def live_session(trust_root, private_key, corpus_dir) -> Session:
    """Session with one declared-level skill holding blanket fs caps."""
    session = make_session(trust_root, corpus_dir)
    artifact = make_artifact(
        private_key,
        caps=frozenset(
            {
                CapabilityDecl(CapabilityToken.FS_WRITE_IRREV, ""),
                CapabilityDecl(CapabilityToken.FS_READ, ""),
            }
        ),
    )
    session.load_skill(artifact)
    return session
