"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` so the CLI can emit
structured rejections.
"""

from __future__ import annotations


class FairspaceError(Exception):
    def __init__(self, code: str, message: str = "", **details):
        self.code = code
        self.message = message
        self.details = details
        super().__init__(f"{code}: {message}" if message else code)

    def to_dict(self) -> dict:
        out = {"error": self.code, "message": self.message}
        if self.details:
            out["details"] = self.details
        return out


class SpaceValidationError(FairspaceError):
    """Raised by :func:`fairspace.spaces.validate_space` with every violated invariant."""

    def __init__(self, violations: list[tuple[str, str]]):
        self.violations = list(violations)
        codes = sorted({code for code, _ in self.violations})
        msg = "; ".join(f"{code}: {text}" for code, text in self.violations)
        super().__init__("INVALID_SPACE", msg, violations=[c for c, _ in self.violations])
        self.codes = codes
