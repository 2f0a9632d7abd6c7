"""Error type shared by all modules.

Every rejection carries a stable machine-readable code (e.g. ``SELF_PAIR``,
``ILLEGAL_RESIDUE``) plus a ``details`` dict with enough context to locate
the offending input. The CLI maps these codes onto exit statuses.
"""

from __future__ import annotations


class PairforgeError(Exception):
    """Exception with a stable code and structured details."""

    def __init__(self, code: str, message: str, **details):
        self.code = code
        self.details = details
        super().__init__(f"{code}: {message}")


def reject(code: str, message: str, **details) -> "PairforgeError":
    return PairforgeError(code, message, **details)
