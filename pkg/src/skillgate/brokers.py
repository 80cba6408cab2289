"""Brokers: the pluggable binary-decision oracles behind the HITL gate.

All brokers answer approve or deny; none can skip the lifecycle or the
audit records around it. The allow-all broker exists for the harness
sweep only; it is a broker policy, not a gate bypass.
"""

from __future__ import annotations

import fnmatch
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Callable

from .capabilities import CapabilityToken
from .errors import PolicyParseError, UnknownCapabilityError
from .gate import BrokerDecision

if TYPE_CHECKING:
    from .gate import RequestEnvelope

DEFAULT_DECISION_TIMEOUT = 60.0


class Broker:
    kind = "abstract"

    def decide(self, envelope: "RequestEnvelope") -> BrokerDecision:
        raise NotImplementedError


class DenyAllBroker(Broker):
    """Fail-safe default: equivalent to running without irreversible capability."""

    kind = "deny-all"

    def decide(self, envelope: "RequestEnvelope") -> BrokerDecision:
        return BrokerDecision("deny", self.kind)


class AllowAllBroker(Broker):
    """Harness-only: approves everything, still walking the full lifecycle."""

    kind = "allow-all"

    def decide(self, envelope: "RequestEnvelope") -> BrokerDecision:
        return BrokerDecision("approve", self.kind)


@dataclass(frozen=True)
class PolicyRule:
    action: str  # "allow" | "deny"
    token: CapabilityToken
    pattern: str

    def matches(self, op: str, target: str) -> bool:
        return self.token.value == op and fnmatch.fnmatchcase(target, self.pattern)


def parse_policy(text: str) -> list[PolicyRule]:
    """Ordered `allow|deny <token> <target-pattern>` rules; `#` comments."""
    rules = []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise PolicyParseError(f"line {lineno}: expected 'allow|deny token pattern'")
        action, token_s, pattern = parts
        if action not in ("allow", "deny"):
            raise PolicyParseError(f"line {lineno}: unknown action {action!r}")
        try:
            token = CapabilityToken.parse(token_s)
        except UnknownCapabilityError as exc:
            raise PolicyParseError(f"line {lineno}: {exc}") from exc
        rules.append(PolicyRule(action=action, token=token, pattern=pattern))
    return rules


def load_policy(path: Path | str) -> list[PolicyRule]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise PolicyParseError(f"cannot read policy document: {exc}") from exc
    return parse_policy(text)


class PolicyBroker(Broker):
    """Mechanical first-match-wins evaluation; no match means deny."""

    kind = "policy"

    def __init__(self, rules: list[PolicyRule]) -> None:
        self.rules = rules

    def decide(self, envelope: "RequestEnvelope") -> BrokerDecision:
        for rule in self.rules:
            if rule.matches(envelope.op, envelope.target):
                return BrokerDecision(
                    "approve" if rule.action == "allow" else "deny", self.kind
                )
        return BrokerDecision("deny", self.kind)


def broker_from_policy_path(path: Path | str) -> Broker:
    """Policy broker, or deny-all when the document is unreadable or malformed."""
    try:
        return PolicyBroker(load_policy(path))
    except PolicyParseError:
        return DenyAllBroker()


@dataclass
class PendingItem:
    request_id: str
    op: str
    target: str
    reasoning: str
    origin_skill_id: str
    deadline: float  # monotonic-clock expiry
    event: threading.Event = field(default_factory=threading.Event)
    decision: str | None = None

    def seconds_remaining(self) -> float:
        return max(0.0, self.deadline - time.monotonic())


class PendingQueue:
    """Thread-safe rendezvous between a waiting gate and a remote decider."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._pending: dict[str, PendingItem] = {}
        self._decided: dict[str, str] = {}

    def submit(self, envelope: "RequestEnvelope", timeout: float) -> PendingItem:
        item = PendingItem(
            request_id=envelope.request_id or "",
            op=envelope.op,
            target=envelope.target,
            reasoning=envelope.reasoning,
            origin_skill_id=envelope.origin_skill_id,
            deadline=time.monotonic() + timeout,
        )
        with self._lock:
            self._pending[item.request_id] = item
        return item

    def wait(self, item: PendingItem, timeout: float) -> str | None:
        decided = item.event.wait(timeout)
        with self._lock:
            self._pending.pop(item.request_id, None)
            if decided and item.decision is not None:
                return item.decision
            # Expired undecided requests count as decided-by-timeout so a
            # late console click cannot retroactively approve.
            self._decided.setdefault(item.request_id, "deny")
            return None

    def pending(self) -> list[PendingItem]:
        with self._lock:
            return list(self._pending.values())

    def resolve(self, request_id: str, decision: str) -> str:
        """Returns "ok", "unknown", or "already-decided"."""
        with self._lock:
            if request_id in self._decided:
                return "already-decided"
            item = self._pending.get(request_id)
            if item is None:
                return "unknown"
            self._decided[request_id] = decision
            item.decision = decision
            item.event.set()
            return "ok"


class WebhookBroker(Broker):
    """Delegates to a remote decider that polls the approval API.

    The request parks on the session's pending queue; no decision before
    the deadline (or no queue wired at all) denies.
    """

    kind = "webhook"

    def __init__(self, queue: PendingQueue | None,
                 timeout: float = DEFAULT_DECISION_TIMEOUT) -> None:
        self.queue = queue
        self.timeout = timeout

    def decide(self, envelope: "RequestEnvelope") -> BrokerDecision:
        if self.queue is None:
            return BrokerDecision("deny", "timeout")
        item = self.queue.submit(envelope, self.timeout)
        decision = self.queue.wait(item, self.timeout)
        if decision is None:
            return BrokerDecision("deny", "timeout")
        return BrokerDecision(decision, self.kind)


class InteractiveBroker(Broker):
    """Prompts a human; expiry of the timeout denies.

    ``prompt_fn`` renders the request and returns "approve", "deny", or
    None; the default reads a line from stdin on a worker thread so the
    timeout holds even with no console attached.
    """

    kind = "interactive"

    def __init__(
        self,
        prompt_fn: Callable[["RequestEnvelope"], str | None] | None = None,
        timeout: float = DEFAULT_DECISION_TIMEOUT,
    ) -> None:
        self.prompt_fn = prompt_fn or self._stdin_prompt
        self.timeout = timeout

    def _stdin_prompt(self, envelope: "RequestEnvelope") -> str | None:
        print(
            f"[HITL] {envelope.op} target={envelope.target!r} "
            f"skill={envelope.origin_skill_id!r}\n  reasoning: {envelope.reasoning}"
        )
        print(f"  approve/deny (timeout {self.timeout:.0f}s, default deny)? ", end="", flush=True)
        answer: list[str] = []

        def _read() -> None:
            try:
                answer.append(input().strip().lower())
            except EOFError:
                pass

        reader = threading.Thread(target=_read, daemon=True)
        reader.start()
        reader.join(self.timeout)
        if answer and answer[0] in ("approve", "deny"):
            return answer[0]
        if answer and answer[0] in ("y", "yes", "a"):
            return "approve"
        return None

    def decide(self, envelope: "RequestEnvelope") -> BrokerDecision:
        answer = self.prompt_fn(envelope)
        if answer not in ("approve", "deny"):
            return BrokerDecision("deny", "timeout")
        return BrokerDecision(answer, self.kind)


BROKER_KINDS = ("deny-all", "policy", "interactive", "webhook", "allow-all")


def make_broker(
    kind: str,
    policy_path: Path | str | None = None,
    queue: PendingQueue | None = None,
    timeout: float = DEFAULT_DECISION_TIMEOUT,
) -> Broker:
    if kind == "deny-all":
        return DenyAllBroker()
    if kind == "allow-all":
        return AllowAllBroker()
    if kind == "policy":
        if policy_path is None:
            return DenyAllBroker()
        return broker_from_policy_path(policy_path)
    if kind == "interactive":
        return InteractiveBroker(timeout=timeout)
    if kind == "webhook":
        return WebhookBroker(queue=queue, timeout=timeout)
    raise ValueError(f"unknown broker kind {kind!r}")
