"""Capability vocabulary and target matching.

The vocabulary is a fixed enum; unknown tokens fail closed at manifest
parse and at dispatch. Reversibility is a property of the dispatch path
the runtime routes a call through, not of the underlying syscall:
``fs.write.rev`` goes through the transaction buffer, ``fs.read`` is
non-mutating, ``tool.invoke`` takes the tag its tool was registered
with, and everything else is irreversible.
"""

from __future__ import annotations

import enum

from .errors import UnknownCapabilityError


class CapabilityToken(str, enum.Enum):
    NET_EGRESS = "net.egress"
    FS_READ = "fs.read"
    FS_WRITE_REV = "fs.write.rev"
    FS_WRITE_IRREV = "fs.write.irrev"
    TOOL_INVOKE = "tool.invoke"
    SPAWN_PROC = "spawn.proc"
    PUBLISH = "publish"
    PAY = "pay"
    MUTATE_SCHEMA = "mutate.schema"

    @classmethod
    def parse(cls, token: str) -> "CapabilityToken":
        try:
            return cls(token)
        except ValueError:
            raise UnknownCapabilityError(f"unknown capability token {token!r}") from None


# Tokens that are always irreversible regardless of arguments.
ALWAYS_IRREVERSIBLE = frozenset(
    {
        CapabilityToken.FS_WRITE_IRREV,
        CapabilityToken.NET_EGRESS,
        CapabilityToken.SPAWN_PROC,
        CapabilityToken.PUBLISH,
        CapabilityToken.PAY,
        CapabilityToken.MUTATE_SCHEMA,
    }
)

# Tokens whose target is a filesystem path and matches by prefix;
# all other tokens match their target exactly.
PATH_TARGET_TOKENS = frozenset(
    {CapabilityToken.FS_READ, CapabilityToken.FS_WRITE_REV, CapabilityToken.FS_WRITE_IRREV}
)


def target_matches(token: CapabilityToken, declared: str, requested: str) -> bool:
    """Whether a declared capability target covers a requested one."""
    if token in PATH_TARGET_TOKENS:
        if declared == "":
            return True
        prefix = declared.rstrip("/")
        return requested == prefix or requested.startswith(prefix + "/")
    return declared == requested
