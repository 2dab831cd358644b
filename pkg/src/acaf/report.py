"""Pass/fail records shared by the verification routines and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fields
from .exact import fmt


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    residual: str = "0"
    note: str = ""
    required: bool = True

    def as_dict(self) -> dict:
        d = {"name": self.name, "passed": self.passed, "residual": self.residual, "required": self.required}
        if self.note:
            d["note"] = self.note
        return d


@dataclass
class Report:
    title: str
    checks: list[Check] = field(default_factory=list)
    data: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.required)

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        return check

    def extend(self, checks) -> None:
        self.checks.extend(checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "title": self.title,
            "passed": self.passed,
            "checks": [c.as_dict() for c in sorted(self.checks, key=lambda c: c.name)],
            "data": self.data,
        }


def residual_summary(r) -> str:
    """Short text for a residual: "0", or the count of nonzero entries and one sample."""
    arr = np.asarray(r, dtype=object).reshape(-1) if isinstance(r, np.ndarray) else None
    if arr is None:
        return "0" if r == 0 else _entry(r)
    nz = [v for v in arr if v != 0]
    if not nz:
        return "0"
    return f"{len(nz)} nonzero entries, e.g. {_entry(nz[0])}"


def _entry(v) -> str:
    if isinstance(v, fields.PolyScalar):
        s = str(v)
        return s if len(s) < 60 else s[:57] + "..."
    return fmt(v)


def compare(name: str, lhs, rhs, note: str = "", required: bool = True) -> Check:
    """Exact equality check with a residual summary."""
    return zero_check(name, lhs - rhs, note, required)


def zero_check(name: str, value, note: str = "", required: bool = True) -> Check:
    ok = fields.is_zero(value) if isinstance(value, np.ndarray) else value == 0
    return Check(name, bool(ok), residual_summary(value), note, required)
