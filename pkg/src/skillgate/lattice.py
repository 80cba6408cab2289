"""Classification label algebra.

A ``Label`` is a triple of a numeric rank, a compartment set, and a
releasability caveat set. Labels are ordered by ``dominated_by`` and
combined with ``join``; the caveat component is contravariant in the
order (``a`` dominated by ``b`` requires ``a`` to carry at least ``b``'s
caveats), which is the only orientation under which the intersecting
join is the least upper bound.

The canonical text form is ``rank:comp1,comp2:cav1,cav2`` with both
sets sorted lexicographically; empty sets render as empty segments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import LabelError

DEFAULT_MAX_RANK = 4

_IDENT_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")


@dataclass(frozen=True)
class Label:
    rank: int
    compartments: frozenset[str] = field(default_factory=frozenset)
    caveats: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if not isinstance(self.rank, int) or isinstance(self.rank, bool) or self.rank < 0:
            raise LabelError(f"rank must be a non-negative integer, got {self.rank!r}")
        object.__setattr__(self, "compartments", frozenset(self.compartments))
        object.__setattr__(self, "caveats", frozenset(self.caveats))
        for name, items in (("compartment", self.compartments), ("caveat", self.caveats)):
            for item in items:
                if not isinstance(item, str) or not _IDENT_RE.match(item):
                    raise LabelError(f"invalid {name} identifier: {item!r}")

    def to_text(self) -> str:
        comps = ",".join(sorted(self.compartments))
        cavs = ",".join(sorted(self.caveats))
        return f"{self.rank}:{comps}:{cavs}"

    def __str__(self) -> str:
        return self.to_text()


def join(a: Label, b: Label) -> Label:
    """Least upper bound: max rank, union of compartments, intersection of caveats."""
    return Label(
        rank=max(a.rank, b.rank),
        compartments=a.compartments | b.compartments,
        caveats=a.caveats & b.caveats,
    )


def dominated_by(a: Label, b: Label) -> bool:
    """True iff ``a`` is at or below ``b`` in the lattice order."""
    return (
        a.rank <= b.rank
        and a.compartments <= b.compartments
        and a.caveats >= b.caveats
    )


def parse_label(text: str, max_rank: int = DEFAULT_MAX_RANK) -> Label:
    """Parse the canonical text form, rejecting ranks above ``max_rank``."""
    if not isinstance(text, str):
        raise LabelError(f"label must be a string, got {type(text).__name__}")
    parts = text.split(":")
    if len(parts) != 3:
        raise LabelError(f"label must have three colon-separated segments: {text!r}")
    rank_s, comps_s, cavs_s = parts
    if not rank_s.isdigit():
        raise LabelError(f"rank segment must be a non-negative integer: {rank_s!r}")
    rank = int(rank_s)
    if rank > max_rank:
        raise LabelError(f"rank {rank} exceeds configured maximum {max_rank}")

    def _parse_set(segment: str, name: str) -> frozenset[str]:
        if segment == "":
            return frozenset()
        items = segment.split(",")
        if any(item == "" for item in items):
            raise LabelError(f"empty {name} identifier in {text!r}")
        if len(set(items)) != len(items):
            raise LabelError(f"duplicate {name} identifier in {text!r}")
        return frozenset(items)

    return Label(
        rank=rank,
        compartments=_parse_set(comps_s, "compartment"),
        caveats=_parse_set(cavs_s, "caveat"),
    )
