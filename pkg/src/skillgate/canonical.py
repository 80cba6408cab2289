"""Canonical JSON encoding for signing and hash chaining.

The encoding is deterministic: UTF-8, object keys sorted by code point,
no insignificant whitespace, integers in minimal base-10, strings
minimally escaped. Floats are rejected outright so that two runs can
never disagree on formatting; callers store times and amounts as
integers.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

from .errors import EncodingError, ParseError

# Keys that enable prototype-pollution style attacks in permissive
# deserializers; refused anywhere in a parsed document.
POLLUTION_KEYS = frozenset({"__proto__", "constructor", "prototype"})


def _check_encodable(value: Any, path: str = "$") -> None:
    if value is None or isinstance(value, (str, bool)):
        return
    if isinstance(value, int):
        return
    if isinstance(value, float):
        raise EncodingError(f"float at {path} has no canonical form")
    if isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            _check_encodable(item, f"{path}[{i}]")
        return
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str):
                raise EncodingError(f"non-string key {key!r} at {path}")
            _check_encodable(item, f"{path}.{key}")
        return
    raise EncodingError(f"unrepresentable value of type {type(value).__name__} at {path}")


def canonical_json_bytes(value: Any) -> bytes:
    """Encode ``value`` deterministically; equal values yield identical bytes."""
    _check_encodable(value)
    return json.dumps(
        value, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_bytes(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def reject_pollution_keys(value: Any, path: str = "$") -> None:
    """Raise ParseError if any object key is a prototype-pollution vector."""
    if isinstance(value, dict):
        for key, item in value.items():
            if key in POLLUTION_KEYS:
                raise ParseError(f"forbidden key {key!r} at {path}")
            reject_pollution_keys(item, f"{path}.{key}")
    elif isinstance(value, list):
        for i, item in enumerate(value):
            reject_pollution_keys(item, f"{path}[{i}]")


def parse_strict_object(
    raw: dict[str, Any],
    required: frozenset[str] | set[str],
    optional: frozenset[str] | set[str] = frozenset(),
    what: str = "object",
) -> None:
    """Validate field presence: unknown fields and missing required fields reject."""
    if not isinstance(raw, dict):
        raise ParseError(f"{what} must be a JSON object")
    reject_pollution_keys(raw)
    keys = set(raw)
    unknown = keys - set(required) - set(optional)
    if unknown:
        raise ParseError(f"unknown field(s) in {what}: {sorted(unknown)}")
    missing = set(required) - keys
    if missing:
        raise ParseError(f"missing mandatory field(s) in {what}: {sorted(missing)}")
