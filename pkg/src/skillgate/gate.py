"""Gate policy: reversibility classification and the per-level route table.

The route table is a pure function of (verification level, op, target,
declared caps) and is not configurable per call: unverified skills
consult the broker on every irreversible op, declared-and-above skills
auto-approve ops covered by their declared capability set and consult
the broker for everything else.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .capabilities import ALWAYS_IRREVERSIBLE, CapabilityToken, target_matches
from .errors import UnknownCapabilityError
from .levels import VerificationLevel
from .skillpkg import CapabilityDecl


@dataclass
class RequestEnvelope:
    """The agent-emitted tool call the gate classifies and routes."""

    op: str
    args: dict[str, Any]
    reasoning: str = ""
    request_id: str | None = None
    origin_skill_id: str = ""

    @property
    def target(self) -> str:
        target = self.args.get("target")
        if not isinstance(target, str):
            raise UnknownCapabilityError("envelope args must carry a string target")
        return target


@dataclass(frozen=True)
class BrokerDecision:
    decision: str  # "approve" | "deny"; binary, no third state
    broker_id: str

    @property
    def approved(self) -> bool:
        return self.decision == "approve"


class Route(enum.Enum):
    CONSULT_BROKER = "hitl-consult-broker"
    AUTO_APPROVE = "hitl-auto-approve"
    REVERSIBLE_BUFFER = "reversible-buffer"


class Reversibility(enum.Enum):
    REVERSIBLE = "reversible"
    IRREVERSIBLE = "irreversible"
    NON_MUTATING = "non-mutating"


def classify_reversibility(
    op: CapabilityToken, tool_registry: Mapping[str, bool] | None = None,
    tool_name: str | None = None,
) -> Reversibility:
    """Classify by dispatch path. Unregistered tools are denied outright."""
    if op is CapabilityToken.FS_WRITE_REV:
        return Reversibility.REVERSIBLE
    if op is CapabilityToken.FS_READ:
        return Reversibility.NON_MUTATING
    if op in ALWAYS_IRREVERSIBLE:
        return Reversibility.IRREVERSIBLE
    if op is CapabilityToken.TOOL_INVOKE:
        registry = tool_registry or {}
        if tool_name is None or tool_name not in registry:
            raise UnknownCapabilityError(f"tool {tool_name!r} has no registration")
        return Reversibility.REVERSIBLE if registry[tool_name] else Reversibility.IRREVERSIBLE
    raise UnknownCapabilityError(f"unclassifiable capability {op!r}")


def route_for(
    level: VerificationLevel,
    op: CapabilityToken,
    target: str,
    declared_caps: Iterable[CapabilityDecl],
) -> Route:
    """Route an irreversible call. Reversible ops never reach this table."""
    if level is VerificationLevel.UNVERIFIED:
        return Route.CONSULT_BROKER
    for decl in declared_caps:
        if decl.token is op and target_matches(op, decl.target, target):
            return Route.AUTO_APPROVE
    return Route.CONSULT_BROKER


@dataclass(frozen=True)
class GatePolicyRow:
    level: VerificationLevel
    in_declared_caps: bool
    route: Route


def policy_table() -> list[GatePolicyRow]:
    """The full fixed (level x in-caps) mapping, for documentation and tests."""
    rows = []
    for level in VerificationLevel:
        for in_caps in (False, True):
            if level is VerificationLevel.UNVERIFIED:
                route = Route.CONSULT_BROKER
            else:
                route = Route.AUTO_APPROVE if in_caps else Route.CONSULT_BROKER
            rows.append(GatePolicyRow(level=level, in_declared_caps=in_caps, route=route))
    return rows


@dataclass
class DispatchOutcome:
    status: str  # "executed" | "denied" | "host-error" | "read" | "buffered"
    request_id: str | None = None
    decision: BrokerDecision | None = None
    detail: dict[str, Any] = field(default_factory=dict)
