"""Hash-chained, append-only audit log.

Each record carries the SHA-256 of its predecessor (``prevHash``) and of
its own canonical bytes (``selfHash``); the genesis prevHash is 32 zero
bytes. A single serialized writer owns the log; verification and the
extraction of the audited set are read-only.

In harness mode records carry only a logical timestamp so that seeded
runs serialize byte-identically; production mode additionally stamps
wall-clock milliseconds into the payload (and therefore into the chain).
"""

from __future__ import annotations

import json
import threading
import time
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

from .canonical import canonical_json_bytes, sha256_hex
from .errors import ChainError, StorageError

GENESIS_PREV_HASH = "0" * 64

RECORD_TYPES = frozenset(
    {
        "skill.load.ok",
        "skill.load.reject",
        "trustroot.lock",
        "irreversible.request",
        "irreversible.decision",
        "irreversible.executed",
        "irreversible.error",
        "reversible.executed",
        "skill.mutation.attempt",
        "session.abort",
    }
)


@dataclass(frozen=True)
class AuditRecord:
    seq: int
    prev_hash: str
    record_type: str
    request_id: str | None
    payload: dict[str, Any]
    self_hash: str

    def body(self) -> dict[str, Any]:
        """The hashed portion of the record (everything except selfHash)."""
        body: dict[str, Any] = {
            "seq": self.seq,
            "prevHash": self.prev_hash,
            "recordType": self.record_type,
            "payload": self.payload,
        }
        if self.request_id is not None:
            body["requestId"] = self.request_id
        return body

    def to_line(self) -> str:
        full = self.body()
        full["selfHash"] = self.self_hash
        return canonical_json_bytes(full).decode("utf-8")


def _record_from_parts(
    seq: int,
    prev_hash: str,
    record_type: str,
    request_id: str | None,
    payload: dict[str, Any],
) -> AuditRecord:
    body: dict[str, Any] = {
        "seq": seq,
        "prevHash": prev_hash,
        "recordType": record_type,
        "payload": payload,
    }
    if request_id is not None:
        body["requestId"] = request_id
    self_hash = sha256_hex(canonical_json_bytes(body))
    return AuditRecord(
        seq=seq,
        prev_hash=prev_hash,
        record_type=record_type,
        request_id=request_id,
        payload=payload,
        self_hash=self_hash,
    )


class AuditLog:
    """Append-only log with one serialized writer.

    ``path`` of None keeps the log in memory (harness trials); a real
    path gets one canonical record per line, flushed on every append.
    """

    def __init__(self, path: Path | str | None = None, mode: str = "harness") -> None:
        if mode not in ("harness", "production"):
            raise ValueError(f"unknown log mode {mode!r}")
        self.mode = mode
        self.path = Path(path) if path is not None else None
        self._records: list[AuditRecord] = []
        self._write_lock = threading.Lock()
        self._clock = 0
        if self.path is not None and self.path.exists() and self.path.stat().st_size:
            self._records = list(read_records(self.path))
            self._clock = len(self._records)

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> tuple[AuditRecord, ...]:
        return tuple(self._records)

    def append(
        self,
        record_type: str,
        request_id: str | None = None,
        payload: dict[str, Any] | None = None,
    ) -> AuditRecord:
        if record_type not in RECORD_TYPES:
            raise ValueError(f"unknown record type {record_type!r}")
        with self._write_lock:
            body_payload = dict(payload or {})
            body_payload["ts"] = self._clock
            if self.mode == "production":
                body_payload["wallTimeMs"] = time.time_ns() // 1_000_000
            prev = self._records[-1].self_hash if self._records else GENESIS_PREV_HASH
            record = _record_from_parts(
                seq=len(self._records),
                prev_hash=prev,
                record_type=record_type,
                request_id=request_id,
                payload=body_payload,
            )
            if self.path is not None:
                try:
                    with open(self.path, "a", encoding="utf-8") as fh:
                        fh.write(record.to_line() + "\n")
                        fh.flush()
                except OSError as exc:
                    raise StorageError(f"audit append failed: {exc}") from exc
            self._records.append(record)
            self._clock += 1
            return record

    def to_bytes(self) -> bytes:
        return "".join(r.to_line() + "\n" for r in self._records).encode("utf-8")


@dataclass(frozen=True)
class ChainVerdict:
    ok: bool
    broken_at: int | None = None


def _parse_line(line: str) -> AuditRecord | None:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError:
        return None
    if not isinstance(raw, dict):
        return None
    expected = {"seq", "prevHash", "recordType", "payload", "selfHash"}
    if not expected <= set(raw) or set(raw) - expected - {"requestId"}:
        return None
    if not isinstance(raw["seq"], int) or not isinstance(raw["payload"], dict):
        return None
    return AuditRecord(
        seq=raw["seq"],
        prev_hash=raw["prevHash"],
        record_type=raw["recordType"],
        request_id=raw.get("requestId"),
        payload=raw["payload"],
        self_hash=raw["selfHash"],
    )


def read_records(path: Path | str) -> list[AuditRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = _parse_line(line)
            if record is None:
                # Keep a placeholder so verify_chain reports the right index.
                record = AuditRecord(
                    seq=-1, prev_hash="", record_type="", request_id=None,
                    payload={}, self_hash="",
                )
            records.append(record)
    return records


def verify_chain(records: Iterable[AuditRecord]) -> ChainVerdict:
    """Check self hashes, prev links, and sequence contiguity.

    Returns the lowest broken position on failure.
    """
    prev = GENESIS_PREV_HASH
    for index, record in enumerate(records):
        if record.seq != index or record.record_type not in RECORD_TYPES:
            return ChainVerdict(ok=False, broken_at=index)
        recomputed = sha256_hex(canonical_json_bytes(record.body()))
        if record.self_hash != recomputed or record.prev_hash != prev:
            return ChainVerdict(ok=False, broken_at=index)
        prev = record.self_hash
    return ChainVerdict(ok=True)


def extract_s(records: Iterable[AuditRecord]) -> Counter:
    """The audited multiset: (op, target) of executed-ok irreversible records.

    Denied requests and host errors contribute nothing. The chain must
    verify first; extraction from a broken log raises ChainError.
    """
    records = list(records)
    verdict = verify_chain(records)
    if not verdict.ok:
        raise ChainError(f"chain broken at seq {verdict.broken_at}")
    audited: Counter = Counter()
    for record in records:
        if record.record_type != "irreversible.executed":
            continue
        if record.payload.get("ok") is not True:
            continue
        audited[(record.payload["op"], record.payload["target"])] += 1
    return audited
