"""Host backends: where approved side-effects actually land.

The gate performs side-effects only through a ``Host``; anything the
host has no backend for fails as a host error and is audited as such.
The filesystem host resolves relative targets against its root and
supports delete, overwrite, and append actions plus reads.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Callable

from .capabilities import CapabilityToken
from .errors import HostError


class Host:
    def __init__(self) -> None:
        self.tools: dict[str, Callable[[dict[str, Any]], Any]] = {}

    def perform(self, op: CapabilityToken, args: dict[str, Any]) -> dict[str, Any]:
        raise NotImplementedError

    def read(self, target: str) -> bytes:
        raise HostError("host has no read backend")

    def resolve(self, target: str) -> Path:
        return Path(target)


class NullHost(Host):
    """Deny-by-default backend: every effect fails."""

    def perform(self, op: CapabilityToken, args: dict[str, Any]) -> dict[str, Any]:
        raise HostError(f"no backend registered for {op.value}")


class FilesystemHost(Host):
    def __init__(self, root: Path | str,
                 tools: dict[str, Callable[[dict[str, Any]], Any]] | None = None) -> None:
        super().__init__()
        self.root = Path(root)
        self.tools = dict(tools or {})

    def resolve(self, target: str) -> Path:
        path = Path(target)
        return path if path.is_absolute() else self.root / path

    def read(self, target: str) -> bytes:
        path = self.resolve(target)
        try:
            if path.is_dir():
                listing = "\n".join(sorted(p.name for p in path.iterdir()))
                return listing.encode("utf-8")
            return path.read_bytes()
        except OSError as exc:
            raise HostError(f"read failed: {exc}") from exc

    def perform(self, op: CapabilityToken, args: dict[str, Any]) -> dict[str, Any]:
        if op is CapabilityToken.TOOL_INVOKE:
            name = args.get("target", "")
            tool = self.tools.get(name)
            if tool is None:
                raise HostError(f"tool {name!r} has no host backend")
            try:
                result = tool(args)
            except Exception as exc:
                raise HostError(f"tool {name!r} failed: {exc}") from exc
            return {"result": repr(result)}
        if op not in (CapabilityToken.FS_WRITE_IRREV, CapabilityToken.FS_WRITE_REV):
            raise HostError(f"no backend registered for {op.value}")

        target = args.get("target")
        if not isinstance(target, str) or not target:
            raise HostError("write requires a target")
        path = self.resolve(target)
        action = args.get("action", "overwrite")
        try:
            if action == "delete":
                if not path.exists():
                    raise HostError(f"target vanished: {target}")
                path.unlink()
            elif action == "overwrite":
                content = args.get("content", "")
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_bytes(content.encode("utf-8") if isinstance(content, str) else content)
            elif action == "append":
                if not path.exists():
                    raise HostError(f"target vanished: {target}")
                line = args.get("line", "")
                with open(path, "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
            else:
                raise HostError(f"unknown write action {action!r}")
        except HostError:
            raise
        except OSError as exc:
            raise HostError(f"write failed: {exc}") from exc
        return {"action": action}
