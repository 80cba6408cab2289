"""The trust root: a finite, lockable set of signer entries.

Signers are bounded two ways: ``max_clearance`` caps the label a signer
may put on a manifest, and ``max_verification_level`` caps the level it
may attest. The root supports a one-shot lock; once locked, ``set`` and
``remove`` raise ``LockedError`` for the process lifetime and there is
deliberately no unlock operation.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PublicKey

from .canonical import parse_strict_object
from .errors import AbsentError, LockedError, ParseError
from .lattice import DEFAULT_MAX_RANK, Label, parse_label
from .levels import VerificationLevel

if TYPE_CHECKING:
    from .audit import AuditLog


@dataclass(frozen=True)
class SignerEntry:
    key_id: str
    pub_key: bytes
    max_clearance: Label
    max_verification_level: VerificationLevel

    def __post_init__(self) -> None:
        if not self.key_id:
            raise ParseError("signer keyId must be non-empty")
        if len(self.pub_key) != 32:
            raise ParseError(f"pubKey must be 32 bytes, got {len(self.pub_key)}")
        try:
            Ed25519PublicKey.from_public_bytes(self.pub_key)
        except Exception as exc:
            raise ParseError(f"pubKey is not a valid Ed25519 encoding: {exc}") from exc

    def public_key(self) -> Ed25519PublicKey:
        return Ed25519PublicKey.from_public_bytes(self.pub_key)


class TrustRoot:
    """Mutable only until ``lock()``; read-only and shareable afterwards."""

    def __init__(self) -> None:
        self._entries: dict[str, SignerEntry] = {}
        self._locked = False

    @property
    def locked(self) -> bool:
        return self._locked

    def set(self, entry: SignerEntry) -> None:
        if self._locked:
            raise LockedError("trust root is locked; set refused")
        self._entries[entry.key_id] = entry

    def remove(self, key_id: str) -> None:
        if self._locked:
            raise LockedError("trust root is locked; remove refused")
        if key_id not in self._entries:
            raise AbsentError(f"no signer entry for keyId {key_id!r}")
        del self._entries[key_id]

    def lock(self, log: "AuditLog | None" = None) -> None:
        """Lock the root. Idempotent; every call is audited when a log is given."""
        self._locked = True
        if log is not None:
            log.append(
                "trustroot.lock",
                payload={"entries": sorted(self._entries), "locked": True},
            )

    def resolve(self, key_id: str) -> SignerEntry | None:
        return self._entries.get(key_id)

    def key_ids(self) -> list[str]:
        return sorted(self._entries)


_ROOT_FIELDS = frozenset({"entries", "locked"})
_ENTRY_FIELDS = frozenset({"keyId", "pubKey", "maxClearance", "maxVerificationLevel"})


def parse_trust_root(raw: dict, max_rank: int = DEFAULT_MAX_RANK) -> TrustRoot:
    """Build a TrustRoot from its JSON document form; unknown fields reject."""
    parse_strict_object(raw, required={"entries"}, optional={"locked"}, what="trust root")
    entries = raw["entries"]
    if not isinstance(entries, list):
        raise ParseError("trust root entries must be a list")
    root = TrustRoot()
    for item in entries:
        parse_strict_object(item, required=_ENTRY_FIELDS, what="signer entry")
        key_id = item["keyId"]
        if root.resolve(key_id) is not None:
            raise ParseError(f"duplicate signer keyId {key_id!r}")
        try:
            pub = base64.b64decode(item["pubKey"], validate=True)
        except Exception as exc:
            raise ParseError(f"pubKey for {key_id!r} is not valid base64") from exc
        root.set(
            SignerEntry(
                key_id=key_id,
                pub_key=pub,
                max_clearance=parse_label(item["maxClearance"], max_rank=max_rank),
                max_verification_level=VerificationLevel.parse(item["maxVerificationLevel"]),
            )
        )
    if raw.get("locked", False):
        root.lock()
    return root


def load_trust_root(path: Path | str, max_rank: int = DEFAULT_MAX_RANK) -> TrustRoot:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return parse_trust_root(raw, max_rank=max_rank)


def dump_trust_root(root: TrustRoot) -> dict:
    return {
        "entries": [
            {
                "keyId": key_id,
                "pubKey": base64.b64encode(entry.pub_key).decode("ascii"),
                "maxClearance": entry.max_clearance.to_text(),
                "maxVerificationLevel": entry.max_verification_level.token,
            }
            for key_id in root.key_ids()
            for entry in [root.resolve(key_id)]
        ],
        "locked": root.locked,
    }


def save_trust_root(root: TrustRoot, path: Path | str) -> None:
    Path(path).write_text(json.dumps(dump_trust_root(root), indent=2) + "\n", encoding="utf-8")
