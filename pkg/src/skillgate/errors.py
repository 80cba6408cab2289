"""Typed error hierarchy.

Every refusal the runtime makes is a distinct exception type so callers
(and the audit log) can name the failure precisely instead of matching
on message strings.
"""

from __future__ import annotations


class SkillGateError(Exception):
    """Base class for all runtime errors."""


class EncodingError(SkillGateError):
    """A value cannot be represented in canonical form."""


class LabelError(SkillGateError):
    """Malformed classification label."""


class LockedError(SkillGateError):
    """Mutation attempted on a locked trust root."""


class AbsentError(SkillGateError):
    """Referenced entry does not exist."""


class UnlockedRootError(SkillGateError):
    """Session start refused because the trust root is not locked."""


class LoaderError(SkillGateError):
    """Base for skill-load rejections; carries the failing step number."""

    step: int = 0

    def __str__(self) -> str:
        base = super().__str__()
        return f"{type(self).__name__} step {self.step}: {base}"


class ParseError(LoaderError):
    step = 1


class UnknownSignerError(LoaderError):
    step = 2


class BadSignatureError(LoaderError):
    step = 3


class SignerClearanceError(LoaderError):
    step = 4


class OperatorClearanceError(LoaderError):
    step = 5


class AttestationAuthorityError(LoaderError):
    step = 6


class ReplayError(LoaderError):
    step = 7


class HashMismatchError(SkillGateError):
    """Manifest contentHash disagrees with the packaged content."""


class StorageError(SkillGateError):
    """Audit storage failed; the session must abort rather than continue."""


class ChainError(SkillGateError):
    """Audit chain does not verify."""


class UnknownCapabilityError(SkillGateError):
    """Capability token, tool name, or target has no positive registration."""


class ClosedBufferError(SkillGateError):
    """Transaction buffer used after commit or rollback."""


class PolicyParseError(SkillGateError):
    """Broker policy document is malformed."""


class HostError(SkillGateError):
    """The host-side effect failed after approval."""


class SessionFrozenError(SkillGateError):
    """Skill load attempted after the bootstrap snapshot was frozen."""


class SessionAborted(SkillGateError):
    """Dispatch refused because the session aborted fail-closed."""


class DomainError(SkillGateError):
    """Argument outside the mathematical domain of an operation."""
