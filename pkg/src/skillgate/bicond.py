"""Audit-world reconciliation: does the corpus delta match the audited set?

The pass criterion is equality of the (op, target) projections of the
observed corpus delta D and the audited executed-ok set S; either
direction broken is a fail, with witnesses reported per direction.

Granularity matters. Snapshots cannot count repeated writes to one
target, so within any one comparison window the projection collapses to
per-target sets, on both sides identically. Callers that need
multiplicity (the in-session round check, the harness trials) compare a
sequence of windows, one per round, which counts repetitions across
rounds. A single whole-run comparison is supported and documented as
the coarser mode.

One deliberate exclusion: targets whose only audited activity is
committed reversible writes are dropped from D before comparison;
reversible commits are audited but are never part of S, and without the
exclusion every committed buffer write would read as an unexplained
change.
"""

from __future__ import annotations

import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .canonical import sha256_hex

WRITE_OP = "fs.write.irrev"


def walk_regular_files(root: Path | str) -> list[str]:
    """Relative posix paths of every regular file under root, sorted.

    Symlinks are skipped. scandir keeps this cheap on large corpora.
    """
    root = os.fspath(root)
    found: list[str] = []

    def _walk(dirpath: str, prefix: str) -> None:
        with os.scandir(dirpath) as it:
            for entry in it:
                if entry.is_symlink():
                    continue
                rel = f"{prefix}{entry.name}"
                if entry.is_dir(follow_symlinks=False):
                    _walk(entry.path, rel + "/")
                elif entry.is_file(follow_symlinks=False):
                    found.append(rel)

    _walk(root, "")
    found.sort()
    return found


def snapshot(corpus_root: Path | str) -> dict[str, str]:
    """Per-file SHA-256 map keyed by normalized relative path.

    Symlinks are skipped; only regular files under the root count.
    """
    root = os.fspath(corpus_root)
    digest: dict[str, str] = {}
    for rel in walk_regular_files(root):
        with open(os.path.join(root, rel), "rb") as fh:
            digest[rel] = sha256_hex(fh.read())
    return digest


def write_snapshot(snap: Mapping[str, str], path: Path | str) -> None:
    lines = [f"{digest} {rel}" for rel, digest in sorted(snap.items())]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_snapshot(path: Path | str) -> dict[str, str]:
    snap: dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        digest, rel = line.split(" ", 1)
        snap[rel] = digest
    return snap


@dataclass(frozen=True)
class DeltaEntry:
    op: str
    target: str
    kind: str  # created | modified | deleted; diagnostic only, not projected

    def projection(self) -> tuple[str, str]:
        return (self.op, self.target)


def compute_delta(s0: Mapping[str, str], s1: Mapping[str, str]) -> list[DeltaEntry]:
    """One entry per path created, modified, or deleted between snapshots."""
    entries = []
    for rel in sorted(set(s0) | set(s1)):
        before, after = s0.get(rel), s1.get(rel)
        if before == after:
            continue
        if before is None:
            kind = "created"
        elif after is None:
            kind = "deleted"
        else:
            kind = "modified"
        entries.append(DeltaEntry(op=WRITE_OP, target=rel, kind=kind))
    return entries


@dataclass
class BicondVerdict:
    passed: bool
    unexplained_changes: list[DeltaEntry] = field(default_factory=list)
    unmatched_executions: list[tuple[str, str]] = field(default_factory=list)


def check(
    delta: Iterable[DeltaEntry],
    audited_s: Counter | Mapping[tuple[str, str], int] | Iterable[tuple[str, str]],
    reversible_targets: frozenset[str] | set[str] = frozenset(),
) -> BicondVerdict:
    """Compare one window's delta against its audited slice.

    Both sides collapse to per-target (op, target) sets within the
    window; witnesses carry the uncovered entries of each direction.
    """
    if isinstance(audited_s, (Counter, dict)):
        s_keys = set(audited_s)
    else:
        s_keys = set(audited_s)
    s_targets = {target for _, target in s_keys}
    delta = list(delta)
    effective = [
        entry
        for entry in delta
        if not (entry.target in reversible_targets and entry.target not in s_targets)
    ]
    d_keys = {entry.projection() for entry in effective}
    unexplained = [entry for entry in effective if entry.projection() not in s_keys]
    unmatched = sorted(s_keys - d_keys)
    return BicondVerdict(
        passed=not unexplained and not unmatched,
        unexplained_changes=unexplained,
        unmatched_executions=unmatched,
    )


def check_rounds(
    snapshots: list[Mapping[str, str]],
    audited_slices: list[Counter],
    reversible_slices: list[frozenset[str]] | None = None,
) -> BicondVerdict:
    """Round-granular reconciliation over n+1 snapshots and n audit slices.

    Passes iff every round passes; witnesses accumulate across rounds.
    """
    if len(snapshots) != len(audited_slices) + 1:
        raise ValueError("need one snapshot more than audit slices")
    if reversible_slices is None:
        reversible_slices = [frozenset()] * len(audited_slices)
    verdicts = [
        check(
            compute_delta(snapshots[i], snapshots[i + 1]),
            audited_slices[i],
            reversible_targets=reversible_slices[i],
        )
        for i in range(len(audited_slices))
    ]
    return BicondVerdict(
        passed=all(v.passed for v in verdicts),
        unexplained_changes=[e for v in verdicts for e in v.unexplained_changes],
        unmatched_executions=[u for v in verdicts for u in v.unmatched_executions],
    )


def classify_failure(verdict: BicondVerdict) -> list[str]:
    """Heuristic shape tags for a failed verdict; the verdict stays binary.

    Unexplained-only changes look like a gate bypass; unmatched-only
    executions look like audit forgery or a silent host failure (host
    errors are never in S, so they cannot explain this shape); one of
    each looks like a wrong-target execution.
    """
    if verdict.passed:
        return []
    tags = []
    if verdict.unexplained_changes and not verdict.unmatched_executions:
        tags.append("F1-shaped")
    if verdict.unmatched_executions and not verdict.unexplained_changes:
        tags.append("F2/F3-shaped")
    if verdict.unexplained_changes and verdict.unmatched_executions:
        tags.append("F4-shaped")
    return tags
