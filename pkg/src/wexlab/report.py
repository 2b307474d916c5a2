"""Verification reports: per-check records and JSON/CSV serialization."""

from __future__ import annotations

import contextvars
import csv
import json
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable

import numpy as np

from .exponents import Infinity

__all__ = ["CheckRecord", "VerificationReport", "PASS", "FAIL", "INFO", "INCONCLUSIVE",
           "DEFAULT_TOL", "current_tolerance", "tolerance", "jsonable", "merge_reports"]

PASS, FAIL, INFO, INCONCLUSIVE = "PASS", "FAIL", "INFO", "INCONCLUSIVE"
DEFAULT_TOL = 1e-9

_TOL = contextvars.ContextVar("wexlab_tolerance", default=DEFAULT_TOL)


def current_tolerance() -> float:
    return _TOL.get()


@contextmanager
def tolerance(tol: float):
    """Relative tolerance used by inequality checks that do not pass one explicitly."""
    tol = float(tol)
    if not (tol >= 0 and math.isfinite(tol)):
        raise ValueError(f"tolerance must be a finite nonnegative number, got {tol}")
    token = _TOL.set(tol)
    try:
        yield tol
    finally:
        _TOL.reset(token)


def jsonable(x: Any) -> Any:
    """Convert exponents, numpy scalars and tuples into plain JSON values."""
    if isinstance(x, Infinity):
        return "inf"
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [jsonable(v) for v in x]
    if hasattr(x, "_asdict"):
        return jsonable(x._asdict())
    return x if isinstance(x, (str, type(None))) else str(x)


@dataclass
class CheckRecord:
    name: str
    status: str
    measured: Any = None
    allowed: Any = None
    witness: Any = None
    note: str = ""

    @classmethod
    def inequality(cls, name, measured, allowed, *, tol=None, witness=None,
                   note="") -> "CheckRecord":
        """PASS iff measured <= allowed * (1 + tol); tol defaults to the current tolerance."""
        if tol is None:
            tol = _TOL.get()
        m, a = float(measured), float(allowed)
        ok = (not math.isnan(m)) and m <= a * (1.0 + tol)
        return cls(name, PASS if ok else FAIL, m, a, witness, note)

    @classmethod
    def exact(cls, name, ok: bool, *, measured=None, allowed=None, witness=None,
              note="") -> "CheckRecord":
        return cls(name, PASS if ok else FAIL, measured, allowed, witness, note)

    @classmethod
    def info(cls, name, measured=None, allowed=None, *, witness=None, note="") -> "CheckRecord":
        return cls(name, INFO, measured, allowed, witness, note)

    @property
    def ok(self) -> bool:
        return self.status in (PASS, INFO)

    def to_dict(self) -> dict:
        return jsonable({"name": self.name, "status": self.status, "measured": self.measured,
                         "allowed": self.allowed, "witness": self.witness, "note": self.note})


@dataclass
class VerificationReport:
    suite: str
    checks: list = field(default_factory=list)
    environment: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    wall_clock: float = 0.0

    def add(self, record: CheckRecord) -> CheckRecord:
        self.checks.append(record)
        return record

    def extend(self, records: Iterable[CheckRecord]):
        self.checks.extend(records)

    def note(self, text: str):
        if text not in self.notes:
            self.notes.append(text)

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.ok]

    def worst(self, prefix: str = "") -> CheckRecord | None:
        """The record with the largest measured/allowed ratio among those named with ``prefix``."""
        best, best_r = None, -math.inf
        for c in self.checks:
            if not c.name.startswith(prefix) or c.measured is None or c.allowed in (None, 0):
                continue
            try:
                r = float(c.measured) / float(c.allowed)
            except (TypeError, ValueError):
                continue
            if r > best_r:
                best, best_r = c, r
        return best

    def summary(self) -> str:
        n_fail = len(self.failures)
        state = "PASS" if self.passed else "FAIL"
        return f"{self.suite}: {state} ({len(self.checks)} checks, {n_fail} not passing)"

    def to_dict(self, *, include_timing: bool = True) -> dict:
        out = {
            "suite": self.suite,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "environment": jsonable(self.environment),
            "notes": list(self.notes),
            "data": jsonable(self.data),
        }
        if include_timing:
            out["wall_clock"] = self.wall_clock
        return out

    def to_json(self, *, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing=include_timing), sort_keys=True, indent=2)

    def write_json(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    def write_csv(self, path):
        """Scan rows: parameter, lower_char, upper_char, measured, allowed, slope_contribution."""
        cols = ["parameter", "lower_char", "upper_char", "measured", "allowed", "slope_contribution"]
        rows = self.data.get("rows", [])
        with open(path, "w", newline="") as fh:
            wr = csv.DictWriter(fh, fieldnames=cols)
            wr.writeheader()
            for r in rows:
                wr.writerow({k: jsonable(r.get(k)) for k in cols})


def merge_reports(suite: str, parts: Iterable[VerificationReport], prefix_with_suite=True,
                  environment=None) -> VerificationReport:
    out = VerificationReport(suite, environment=dict(environment or {}))
    for part in parts:
        for c in part.checks:
            name = f"{part.suite}/{c.name}" if prefix_with_suite else c.name
            out.add(CheckRecord(name, c.status, c.measured, c.allowed, c.witness, c.note))
        for n in part.notes:
            out.note(n)
    return out
