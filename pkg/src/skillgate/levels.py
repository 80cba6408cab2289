"""Verification levels, totally ordered from least to most trusted."""

from __future__ import annotations

import enum

from .errors import ParseError


class VerificationLevel(enum.IntEnum):
    UNVERIFIED = 0
    DECLARED = 1
    TESTED = 2
    FORMAL = 3

    @property
    def token(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, token: str | None) -> "VerificationLevel":
        """Parse a level name; an absent field defaults to unverified."""
        if token is None:
            return cls.UNVERIFIED
        try:
            return cls[token.upper()]
        except (KeyError, AttributeError):
            raise ParseError(f"unknown verification level: {token!r}") from None
