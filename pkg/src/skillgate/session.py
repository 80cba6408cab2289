"""Session state: bootstrap, dispatch, interception, and the round check.

A session refuses to start on an unlocked trust root, loads skills only
during bootstrap, freezes the loaded set on first dispatch, and routes
every envelope through classification, the policy table, and the HITL
lifecycle. There is no configuration surface that skips any of those
layers: brokers decide approve or deny, nothing else.
"""

from __future__ import annotations

import random
from pathlib import Path
from typing import Any

from .audit import AuditLog
from .bicond import check, compute_delta, snapshot
from .brokers import Broker, PendingQueue
from .buffer import TransactionBuffer
from .capabilities import CapabilityToken
from .errors import (
    HostError,
    SessionAborted,
    SessionFrozenError,
    StorageError,
    UnknownCapabilityError,
    UnlockedRootError,
)
from .canonical import sha256_hex
from .gate import (
    BrokerDecision,
    DispatchOutcome,
    RequestEnvelope,
    Route,
    classify_reversibility,
    Reversibility,
    route_for,
)
from .host import FilesystemHost, Host, NullHost
from .lattice import DEFAULT_MAX_RANK, Label
from .levels import VerificationLevel
from .skillpkg import (
    LoadedSkill,
    ReplayGuard,
    SkillArtifact,
    collect_package_files,
    load_skill,
    pack_files,
)
from .trustroot import TrustRoot

PROFILES = ("strict", "dev")


class Session:
    def __init__(
        self,
        root: TrustRoot,
        operator_clearance: Label,
        log: AuditLog,
        broker: Broker,
        corpus_root: Path | str | None = None,
        host: Host | None = None,
        seed: int = 0,
        max_rank: int = DEFAULT_MAX_RANK,
        profile: str = "strict",
        pending_queue: PendingQueue | None = None,
    ) -> None:
        if profile not in PROFILES:
            raise ValueError(f"unknown profile {profile!r}")
        if not root.locked:
            raise UnlockedRootError(
                "session start refused: trust root is not locked"
            )
        self.root = root
        self.operator_clearance = operator_clearance
        self.log = log
        self.broker = broker
        self.corpus_root = Path(corpus_root) if corpus_root is not None else None
        if host is None:
            host = FilesystemHost(self.corpus_root) if self.corpus_root else NullHost()
        self.host = host
        self.max_rank = max_rank
        self.profile = profile
        self.pending_queue = pending_queue
        self.replay_guard = ReplayGuard()
        self.requires_reverification: set[str] = set()

        self._rng = random.Random(f"session:{seed}")
        self._phase = "bootstrap"
        self._halted = False
        self._loaded: dict[str, LoadedSkill] = {}
        self._tools: dict[str, bool] = {}
        self._buffer: TransactionBuffer | None = None
        self._round_base_seq = 0
        self._last_snapshot: dict[str, str] | None = None

        # Audit the locked posture; lock() is idempotent on purpose.
        root.lock(log)

    # -- bootstrap ---------------------------------------------------------

    def require_bootstrap_phase(self) -> None:
        if self._phase != "bootstrap":
            raise SessionFrozenError("loaded-skill set is frozen for the session")

    def load_skill(self, artifact: SkillArtifact,
                   install_path: Path | str | None = None) -> LoadedSkill:
        return load_skill(
            self.root,
            artifact,
            self.operator_clearance,
            self,
            install_path=Path(install_path).resolve() if install_path else None,
        )

    def register_loaded(self, loaded: LoadedSkill) -> None:
        self.require_bootstrap_phase()
        self._loaded[loaded.skill_id] = loaded

    def register_tool(self, name: str, fn=None, reversible: bool = False) -> None:
        self.require_bootstrap_phase()
        self._tools[name] = reversible
        if fn is not None:
            self.host.tools[name] = fn

    def freeze(self) -> None:
        if self._phase != "bootstrap":
            return
        self._phase = "active"
        if self.corpus_root is not None and self._bicond_rounds_active():
            self._last_snapshot = snapshot(self.corpus_root)
            self._round_base_seq = len(self.log)

    def _bicond_rounds_active(self) -> bool:
        return any(
            skill.effective_level >= VerificationLevel.TESTED
            for skill in self._loaded.values()
        )

    # -- accessors ---------------------------------------------------------

    @property
    def halted(self) -> bool:
        return self._halted

    @property
    def phase(self) -> str:
        return self._phase

    def loaded_skills(self) -> dict[str, LoadedSkill]:
        return dict(self._loaded)

    def new_request_id(self) -> str:
        return f"{self._rng.getrandbits(128):032x}"

    # -- transaction buffer ------------------------------------------------

    def _ensure_buffer(self) -> TransactionBuffer:
        if self._buffer is None or self._buffer.state != "open":
            root = self.corpus_root
            if root is None and isinstance(self.host, FilesystemHost):
                root = self.host.root
            if root is None:
                raise HostError("no filesystem root for reversible writes")
            self._buffer = TransactionBuffer(root)
        return self._buffer

    @property
    def buffer(self) -> TransactionBuffer:
        return self._ensure_buffer()

    def commit_buffer(self) -> None:
        if self._buffer is not None and self._buffer.state == "open":
            self._buffer.commit(self.log)
            self._buffer = None

    def rollback_buffer(self) -> None:
        if self._buffer is not None and self._buffer.state == "open":
            self._buffer.rollback()
            self._buffer = None

    # -- dispatch ----------------------------------------------------------

    def dispatch(self, envelope: RequestEnvelope) -> DispatchOutcome:
        # Audit storage failure is fatal: no side-effect may proceed
        # without its record landing, so the session halts fail-closed.
        try:
            return self._dispatch(envelope)
        except StorageError:
            self._halted = True
            raise

    def _dispatch(self, envelope: RequestEnvelope) -> DispatchOutcome:
        if self._halted:
            raise SessionAborted("session aborted; dispatch refused")
        if self._phase == "bootstrap":
            self.freeze()

        op = CapabilityToken.parse(envelope.op)
        target = envelope.target
        origin = self._loaded.get(envelope.origin_skill_id)
        if origin is None:
            raise UnknownCapabilityError(
                f"origin skill {envelope.origin_skill_id!r} is not loaded"
            )
        if envelope.request_id is None:
            envelope.request_id = self.new_request_id()

        # In-session mutation of a loaded skill is always intercepted as
        # irreversible, whatever the envelope claimed.
        if op in (CapabilityToken.FS_WRITE_REV, CapabilityToken.FS_WRITE_IRREV):
            owner = self._skill_owning(target)
            if owner is not None:
                return self._intercept_mutation(owner, envelope, op, target)

        kind = classify_reversibility(op, self._tools, tool_name=target)
        if kind is Reversibility.NON_MUTATING:
            return self._execute_non_mutating(envelope, op, target)
        if kind is Reversibility.REVERSIBLE:
            if op is CapabilityToken.FS_WRITE_REV:
                content = envelope.args.get("content", "")
                data = content.encode("utf-8") if isinstance(content, str) else content
                self._ensure_buffer().write(target, data)
                return DispatchOutcome("buffered", envelope.request_id)
            return self._execute_non_mutating(envelope, op, target)

        route = route_for(origin.effective_level, op, target, origin.registered_caps)
        return self._lifecycle(envelope, op, target, route)

    def _execute_non_mutating(self, envelope: RequestEnvelope, op: CapabilityToken,
                              target: str) -> DispatchOutcome:
        ok = True
        detail: dict[str, Any] = {}
        try:
            if op is CapabilityToken.FS_READ:
                data = self.host.read(target)
                detail["bytes"] = len(data)
            else:
                self.host.perform(op, envelope.args)
        except HostError as exc:
            ok = False
            detail["error"] = str(exc)
        payload = {"op": op.value, "target": target, "ok": ok}
        payload.update(detail)
        self.log.append("reversible.executed", envelope.request_id, payload)
        return DispatchOutcome("read" if op is CapabilityToken.FS_READ else "executed",
                               envelope.request_id, detail=detail)

    def _lifecycle(
        self,
        envelope: RequestEnvelope,
        op: CapabilityToken,
        target: str,
        route: Route,
        mutation: dict[str, Any] | None = None,
    ) -> DispatchOutcome:
        rid = envelope.request_id
        self.log.append(
            "irreversible.request",
            rid,
            {
                "op": op.value,
                "target": target,
                "reasoning": envelope.reasoning,
                "originSkillId": envelope.origin_skill_id,
                "route": route.value,
            },
        )
        if route is Route.AUTO_APPROVE:
            decision = BrokerDecision("approve", "manifest-declared")
        else:
            decision = self.broker.decide(envelope)
        self.log.append(
            "irreversible.decision",
            rid,
            {"decision": decision.decision, "brokerId": decision.broker_id},
        )
        if mutation is not None:
            payload = dict(mutation)
            payload["decision"] = decision.decision
            self.log.append("skill.mutation.attempt", rid, payload)
        if not decision.approved:
            return DispatchOutcome("denied", rid, decision)
        try:
            self.host.perform(op, envelope.args)
        except HostError as exc:
            self.log.append(
                "irreversible.error",
                rid,
                {"op": op.value, "target": target, "error": str(exc)},
            )
            return DispatchOutcome("host-error", rid, decision)
        self.log.append(
            "irreversible.executed",
            rid,
            {"op": op.value, "target": target, "ok": True},
        )
        if mutation is not None:
            self.requires_reverification.add(mutation["skillId"])
        return DispatchOutcome("executed", rid, decision)

    # -- skill mutation interception ----------------------------------------

    def _skill_owning(self, target: str) -> LoadedSkill | None:
        resolved = self.host.resolve(target).resolve()
        for skill in self._loaded.values():
            if skill.install_path is None:
                continue
            install = skill.install_path
            if resolved == install or install in resolved.parents:
                return skill
        return None

    def _intercept_mutation(
        self, skill: LoadedSkill, envelope: RequestEnvelope,
        op: CapabilityToken, target: str,
    ) -> DispatchOutcome:
        install = skill.install_path
        assert install is not None
        files = collect_package_files(install)
        pre_hash = sha256_hex(pack_files(files))
        resolved = self.host.resolve(target).resolve()
        rel = resolved.relative_to(install).as_posix() if resolved != install else ""
        action = envelope.args.get("action", "overwrite")
        proposed = dict(files)
        if rel:
            if action == "delete":
                proposed.pop(rel, None)
            elif action == "append":
                line = envelope.args.get("line", "")
                proposed[rel] = proposed.get(rel, b"") + (line + "\n").encode("utf-8")
            else:
                content = envelope.args.get("content", "")
                proposed[rel] = content.encode("utf-8") if isinstance(content, str) else content
        proposed_hash = sha256_hex(pack_files(proposed))
        mutation = {
            "skillId": skill.skill_id,
            "preHash": pre_hash,
            "proposedHash": proposed_hash,
        }
        # A mutation can never ride a declared capability: verification
        # attests the pinned content, which this request would change.
        return self._lifecycle(
            envelope, CapabilityToken.FS_WRITE_IRREV, target,
            Route.CONSULT_BROKER, mutation=mutation,
        )

    # -- in-session biconditional check --------------------------------------

    def round_boundary(self) -> str:
        """Reconcile the corpus against the audit slice since the last round.

        Active only when a tested-or-above skill is loaded; a failed
        check appends session.abort and halts dispatch fail-closed.
        """
        if self._halted:
            return "abort"
        if self._last_snapshot is None or self.corpus_root is None:
            return "ok"
        now = snapshot(self.corpus_root)
        delta = compute_delta(self._last_snapshot, now)
        window = self.log.records[self._round_base_seq:]
        audited = {}
        reversible_targets = set()
        for record in window:
            if record.record_type == "irreversible.executed" and record.payload.get("ok") is True:
                key = (record.payload["op"], self._corpus_relative(record.payload["target"]))
                if key[1] is not None:
                    audited[key] = audited.get(key, 0) + 1
            elif (record.record_type == "reversible.executed"
                  and record.payload.get("op") == "fs.write.rev"):
                rel = self._corpus_relative(record.payload["target"])
                if rel is not None:
                    reversible_targets.add(rel)
        verdict = check(delta, audited, reversible_targets=frozenset(reversible_targets))
        self._last_snapshot = now
        self._round_base_seq = len(self.log)
        if verdict.passed:
            return "ok"
        self.log.append(
            "session.abort",
            payload={
                "reason": "biconditional check failed",
                "unexplained": [f"{e.op} {e.target} {e.kind}" for e in verdict.unexplained_changes],
                "unmatched": [f"{op} {t}" for op, t in verdict.unmatched_executions],
            },
        )
        self._halted = True
        return "abort"

    def _corpus_relative(self, target: str) -> str | None:
        """Map an executed target into corpus path space; outside is None."""
        if self.corpus_root is None:
            return None
        path = Path(target)
        if not path.is_absolute():
            return path.as_posix()
        try:
            return path.resolve().relative_to(self.corpus_root.resolve()).as_posix()
        except ValueError:
            return None
