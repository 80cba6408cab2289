"""Skill packaging: manifests, signing, the fail-closed loader, and replay defense.

A skill is a (manifest, content, signature) tuple. The manifest is
canonically encoded for signing; the signature covers the canonical
manifest bytes, a newline, and the SHA-256 of the content, binding both
halves. Loading walks seven ordered checks and fails closed on the
first broken one, appending a typed rejection record that names the
step.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .canonical import (
    canonical_json_bytes,
    parse_strict_object,
    sha256_bytes,
    sha256_hex,
)
from .capabilities import CapabilityToken
from .errors import (
    AttestationAuthorityError,
    BadSignatureError,
    HashMismatchError,
    LoaderError,
    OperatorClearanceError,
    ParseError,
    ReplayError,
    SignerClearanceError,
    UnknownCapabilityError,
    UnknownSignerError,
)
from .lattice import DEFAULT_MAX_RANK, Label, dominated_by, parse_label
from .levels import VerificationLevel

if TYPE_CHECKING:
    from .trustroot import TrustRoot


@dataclass(frozen=True)
class CapabilityDecl:
    token: CapabilityToken
    target: str

    def key(self) -> tuple[str, str]:
        return (self.token.value, self.target)


@dataclass(frozen=True)
class Manifest:
    skill_id: str
    label: Label
    caps: frozenset[CapabilityDecl]
    signer: str
    version: int
    verification: VerificationLevel
    content_hash: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "skillId": self.skill_id,
            "label": self.label.to_text(),
            "caps": [
                {"token": decl.token.value, "target": decl.target}
                for decl in sorted(self.caps, key=CapabilityDecl.key)
            ],
            "signer": self.signer,
            "version": self.version,
            "verification": self.verification.token,
            "contentHash": self.content_hash,
        }


@dataclass(frozen=True)
class SkillArtifact:
    """Admission unit. ``manifest`` is a raw JSON object when read from
    disk (so the loader's parse step sees exactly what was shipped) or a
    ``Manifest`` when constructed in process."""

    manifest: Manifest | dict[str, Any]
    content: bytes
    signature: bytes


@dataclass(frozen=True)
class LoadedSkill:
    artifact: SkillArtifact
    effective_level: VerificationLevel
    registered_caps: frozenset[CapabilityDecl]
    install_path: Path | None = None
    frozen: bool = field(default=True)

    @property
    def manifest(self) -> Manifest:
        assert isinstance(self.artifact.manifest, Manifest)
        return self.artifact.manifest

    @property
    def skill_id(self) -> str:
        return self.manifest.skill_id


# --------------------------------------------------------------------------
# Canonical encoding and parsing
# --------------------------------------------------------------------------

_MANIFEST_REQUIRED = frozenset({"skillId", "label", "caps", "signer", "version", "contentHash"})
_MANIFEST_OPTIONAL = frozenset({"verification"})
_CAP_FIELDS = frozenset({"token", "target"})


def canonicalize(manifest: Manifest) -> bytes:
    """Deterministic manifest bytes; equal manifests encode identically."""
    return canonical_json_bytes(manifest.to_dict())


def parse_manifest(raw: dict[str, Any], max_rank: int = DEFAULT_MAX_RANK) -> Manifest:
    """Strict parse: unknown fields, pollution keys, and bad values all reject.

    An absent verification field defaults to unverified.
    """
    parse_strict_object(raw, required=_MANIFEST_REQUIRED, optional=_MANIFEST_OPTIONAL,
                        what="manifest")
    skill_id = raw["skillId"]
    if not isinstance(skill_id, str) or not skill_id:
        raise ParseError("skillId must be a non-empty string")
    try:
        label = parse_label(raw["label"], max_rank=max_rank)
    except Exception as exc:
        raise ParseError(f"bad label: {exc}") from exc
    caps_raw = raw["caps"]
    if not isinstance(caps_raw, list):
        raise ParseError("caps must be a list")
    caps = set()
    for item in caps_raw:
        parse_strict_object(item, required=_CAP_FIELDS, what="capability declaration")
        try:
            token = CapabilityToken.parse(item["token"])
        except UnknownCapabilityError as exc:
            raise ParseError(str(exc)) from exc
        target = item["target"]
        if not isinstance(target, str):
            raise ParseError("capability target must be a string")
        caps.add(CapabilityDecl(token=token, target=target))
    signer = raw["signer"]
    if not isinstance(signer, str) or not signer:
        raise ParseError("signer must be a non-empty string")
    version = raw["version"]
    if not isinstance(version, int) or isinstance(version, bool) or version < 1:
        raise ParseError("version must be a positive integer")
    content_hash = raw["contentHash"]
    if not isinstance(content_hash, str) or len(content_hash) != 64:
        raise ParseError("contentHash must be a 64-char hex digest")
    verification = VerificationLevel.parse(raw.get("verification"))
    return Manifest(
        skill_id=skill_id,
        label=label,
        caps=frozenset(caps),
        signer=signer,
        version=version,
        verification=verification,
        content_hash=content_hash,
    )


# --------------------------------------------------------------------------
# Content packaging
# --------------------------------------------------------------------------

PACKAGE_MANIFEST_NAME = "manifest.json"
PACKAGE_SIGNATURE_NAME = "skill.sig"


def pack_files(files: dict[str, bytes]) -> bytes:
    """Deterministic container for the skill body: sorted path -> base64 map."""
    for rel in files:
        if rel.startswith("/") or ".." in Path(rel).parts:
            raise ParseError(f"path escapes package root: {rel!r}")
    encoded = {rel: base64.b64encode(data).decode("ascii") for rel, data in files.items()}
    return canonical_json_bytes({"files": encoded})


def unpack_files(content: bytes) -> dict[str, bytes]:
    raw = json.loads(content.decode("utf-8"))
    return {rel: base64.b64decode(data) for rel, data in raw["files"].items()}


def collect_package_files(skill_dir: Path | str) -> dict[str, bytes]:
    """Every regular file under the package dir except manifest and signature.

    Symlinks are refused; a package must be self-contained.
    """
    skill_dir = Path(skill_dir)
    files: dict[str, bytes] = {}
    for path in sorted(skill_dir.rglob("*")):
        rel = path.relative_to(skill_dir).as_posix()
        if rel in (PACKAGE_MANIFEST_NAME, PACKAGE_SIGNATURE_NAME):
            continue
        if path.is_symlink():
            raise ParseError(f"symlink not allowed in skill package: {rel}")
        if path.is_file():
            files[rel] = path.read_bytes()
    return files


def write_skill_package(skill_dir: Path | str, manifest: Manifest,
                        signature: bytes) -> None:
    """Write manifest.json (canonical form) and skill.sig next to the body."""
    skill_dir = Path(skill_dir)
    (skill_dir / PACKAGE_MANIFEST_NAME).write_bytes(canonicalize(manifest) + b"\n")
    (skill_dir / PACKAGE_SIGNATURE_NAME).write_text(
        base64.b64encode(signature).decode("ascii") + "\n", encoding="utf-8"
    )


def read_skill_package(skill_dir: Path | str) -> SkillArtifact:
    """Read the on-disk layout back; the manifest stays raw for the loader."""
    skill_dir = Path(skill_dir)
    raw_text = (skill_dir / PACKAGE_MANIFEST_NAME).read_text(encoding="utf-8")
    try:
        raw = json.loads(raw_text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest.json is not valid JSON: {exc}") from exc
    sig_b64 = (skill_dir / PACKAGE_SIGNATURE_NAME).read_text(encoding="utf-8").strip()
    try:
        signature = base64.b64decode(sig_b64, validate=True)
    except Exception as exc:
        raise ParseError("skill.sig is not valid base64") from exc
    content = pack_files(collect_package_files(skill_dir))
    return SkillArtifact(manifest=raw, content=content, signature=signature)


# --------------------------------------------------------------------------
# Signing
# --------------------------------------------------------------------------


def signing_message(manifest: Manifest, content: bytes) -> bytes:
    return canonicalize(manifest) + b"\n" + sha256_bytes(content)


def sign_skill(manifest: Manifest, content: bytes, private_key: Ed25519PrivateKey) -> bytes:
    if manifest.content_hash != sha256_hex(content):
        raise HashMismatchError(
            "manifest contentHash does not match the packaged content"
        )
    return private_key.sign(signing_message(manifest, content))


def verify_skill_signature(manifest: Manifest, content: bytes, signature: bytes,
                           public_key: Ed25519PublicKey) -> bool:
    try:
        public_key.verify(signature, signing_message(manifest, content))
        return True
    except InvalidSignature:
        return False


def generate_keypair(seed: bytes | None = None) -> tuple[bytes, bytes]:
    """Raw (private, public) Ed25519 key bytes; seed makes it deterministic."""
    if seed is not None:
        key = Ed25519PrivateKey.from_private_bytes(sha256_bytes(seed))
    else:
        key = Ed25519PrivateKey.generate()
    from cryptography.hazmat.primitives import serialization

    priv = key.private_bytes(
        serialization.Encoding.Raw,
        serialization.PrivateFormat.Raw,
        serialization.NoEncryption(),
    )
    pub = key.public_key().public_bytes(
        serialization.Encoding.Raw, serialization.PublicFormat.Raw
    )
    return priv, pub


# --------------------------------------------------------------------------
# Version replay defense
# --------------------------------------------------------------------------


class ReplayGuard:
    """Strictly monotone per-skill version high-water marks."""

    def __init__(self) -> None:
        self._seen: dict[str, int] = {}

    def check(self, skill_id: str, version: int) -> None:
        """Record the version, or raise ReplayError if it does not advance."""
        high = self._seen.get(skill_id)
        if high is not None and version <= high:
            raise ReplayError(
                f"version {version} for {skill_id!r} does not exceed observed {high}"
            )
        self._seen[skill_id] = version

    def observed(self, skill_id: str) -> int | None:
        return self._seen.get(skill_id)


# --------------------------------------------------------------------------
# The loader
# --------------------------------------------------------------------------


def load_skill(
    root: "TrustRoot",
    artifact: SkillArtifact,
    operator_clearance: Label,
    session: Any,
    install_path: Path | None = None,
) -> LoadedSkill:
    """Walk the seven admission checks in order, failing closed.

    ``session`` supplies the audit log, the replay guard, the bootstrap
    phase gate, and capability registration; each rejection appends a
    ``skill.load.reject`` record naming the failed step.
    """
    session.require_bootstrap_phase()
    skill_id_hint = None
    raw = artifact.manifest
    if isinstance(raw, dict) and isinstance(raw.get("skillId"), str):
        skill_id_hint = raw["skillId"]
    elif isinstance(raw, Manifest):
        skill_id_hint = raw.skill_id

    try:
        # Step 1: canonical parse; unknown fields, pollution keys, and a
        # content hash that disagrees with the packaged bytes all reject.
        if isinstance(artifact.manifest, Manifest):
            manifest = artifact.manifest
        else:
            manifest = parse_manifest(artifact.manifest, max_rank=session.max_rank)
        if manifest.content_hash != sha256_hex(artifact.content):
            raise ParseError("contentHash does not match packaged content")
        skill_id_hint = manifest.skill_id

        # Step 2: resolve the signer in the trust root.
        entry = root.resolve(manifest.signer)
        if entry is None:
            raise UnknownSignerError(f"signer {manifest.signer!r} not in trust root")

        # Step 3: verify the detached signature.
        if not verify_skill_signature(
            manifest, artifact.content, artifact.signature, entry.public_key()
        ):
            raise BadSignatureError("signature does not verify")

        # Step 4: a signer cannot sign above its authorized clearance.
        if not dominated_by(manifest.label, entry.max_clearance):
            raise SignerClearanceError(
                f"label {manifest.label} exceeds signer clearance {entry.max_clearance}"
            )

        # Step 5: the operator cannot load a skill above their own clearance.
        if not dominated_by(manifest.label, operator_clearance):
            raise OperatorClearanceError(
                f"label {manifest.label} exceeds operator clearance {operator_clearance}"
            )

        # Step 6: the attested level is bounded by the signer's authority.
        if manifest.verification > entry.max_verification_level:
            raise AttestationAuthorityError(
                f"level {manifest.verification.token} exceeds signer authority "
                f"{entry.max_verification_level.token}"
            )

        # Step 7: version replay defense, then capability registration.
        session.replay_guard.check(manifest.skill_id, manifest.version)
        parsed_artifact = SkillArtifact(
            manifest=manifest, content=artifact.content, signature=artifact.signature
        )
        loaded = LoadedSkill(
            artifact=parsed_artifact,
            effective_level=manifest.verification,
            registered_caps=manifest.caps,
            install_path=install_path,
        )
        session.register_loaded(loaded)
    except LoaderError as exc:
        payload: dict[str, Any] = {"step": exc.step, "error": type(exc).__name__,
                                   "detail": str(exc)}
        if skill_id_hint is not None:
            payload["skillId"] = skill_id_hint
        session.log.append("skill.load.reject", payload=payload)
        raise

    session.log.append(
        "skill.load.ok",
        payload={
            "skillId": manifest.skill_id,
            "version": manifest.version,
            "level": manifest.verification.token,
            "label": manifest.label.to_text(),
            "contentHash": manifest.content_hash,
        },
    )
    return loaded
