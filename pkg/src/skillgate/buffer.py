"""Transaction buffer for reversible writes.

Writes are staged in memory and hit the filesystem only on commit;
rollback restores every touched target to its first-touch before-image,
byte for byte, even if the target changed underneath the buffer. Commit
audits one ``reversible.executed`` record per applied target; those
records are never part of the irreversible audited set.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .audit import AuditLog
from .errors import ClosedBufferError, HostError


@dataclass
class _Staged:
    before: bytes | None  # None: target absent at first touch
    after: bytes


class TransactionBuffer:
    def __init__(self, root: Path | str) -> None:
        self.root = Path(root)
        self.state = "open"
        self._staged: dict[str, _Staged] = {}

    def _require_open(self) -> None:
        if self.state != "open":
            raise ClosedBufferError(f"buffer already {self.state}")

    def _resolve(self, target: str) -> Path:
        path = (self.root / target).resolve()
        if self.root.resolve() not in path.parents and path != self.root.resolve():
            raise HostError(f"target escapes buffer root: {target!r}")
        return path

    def write(self, target: str, data: bytes) -> None:
        """Stage a write; the before-image is captured on first touch only."""
        self._require_open()
        path = self._resolve(target)
        if target in self._staged:
            self._staged[target].after = data
        else:
            before = path.read_bytes() if path.exists() else None
            self._staged[target] = _Staged(before=before, after=data)

    def staged_targets(self) -> list[str]:
        return list(self._staged)

    def commit(self, log: AuditLog | None = None) -> None:
        """Apply the final staged image per target and audit each one."""
        self._require_open()
        for target, staged in self._staged.items():
            path = self._resolve(target)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(staged.after)
            if log is not None:
                log.append(
                    "reversible.executed",
                    payload={"op": "fs.write.rev", "target": target, "ok": True},
                )
        self.state = "committed"

    def rollback(self) -> None:
        """Physically restore every touched target to its before-image."""
        self._require_open()
        for target, staged in self._staged.items():
            path = self._resolve(target)
            if staged.before is None:
                if path.exists():
                    path.unlink()
            else:
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_bytes(staged.before)
        self.state = "rolledBack"
