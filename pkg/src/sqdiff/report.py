"""Checked inequalities and JSON/CSV run reports."""

from __future__ import annotations

import csv
import datetime
import io
import json
import math
from dataclasses import asdict, dataclass, field

__all__ = ["Check", "RunReport", "check_le", "check_ge", "check_eq", "to_jsonable"]

INVARIANT = "invariant"
ASYMPTOTIC = "asymptotic"


@dataclass(frozen=True)
class Check:
    """One asserted relation with both sides kept."""

    name: str
    lhs: float
    relation: str
    rhs: float
    holds: bool
    kind: str = INVARIANT

    def to_json(self) -> dict:
        return asdict(self)


def _mk(name, lhs, rel, rhs, holds, kind):
    return Check(name, float(lhs), rel, float(rhs), bool(holds), kind)


def check_le(name: str, lhs, rhs, kind: str = INVARIANT) -> Check:
    return _mk(name, lhs, "<=", rhs, lhs <= rhs, kind)


def check_ge(name: str, lhs, rhs, kind: str = INVARIANT) -> Check:
    return _mk(name, lhs, ">=", rhs, lhs >= rhs, kind)


def check_eq(name: str, lhs, rhs, tol: float, kind: str = INVARIANT) -> Check:
    return _mk(name, lhs, f"== (tol {tol:g})", rhs, abs(lhs - rhs) <= tol, kind)


def to_jsonable(obj):
    """Recursively convert numpy scalars, Fractions, dataclasses and enums."""
    from enum import Enum
    from fractions import Fraction

    import numpy as np

    if hasattr(obj, "to_json"):
        return to_jsonable(obj.to_json())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Fraction):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, int) and abs(obj) >= 2**63:
        return str(obj)
    return obj


@dataclass
class RunReport:
    command: str
    config: dict
    calibration: dict
    results: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    timestamp: str | None = None

    def stamp(self, enabled: bool = True) -> "RunReport":
        self.timestamp = datetime.datetime.now(datetime.timezone.utc).isoformat() if enabled else None
        return self

    def add(self, *checks: Check) -> None:
        self.checks.extend(checks)

    @property
    def invariant_failures(self) -> list:
        return [c for c in self.checks if not c.holds and c.kind == INVARIANT]

    @property
    def asymptotic_failures(self) -> list:
        return [c for c in self.checks if not c.holds and c.kind == ASYMPTOTIC]

    def exit_code(self) -> int:
        if self.invariant_failures:
            return 1
        if self.asymptotic_failures:
            return 2
        return 0

    def to_json(self) -> dict:
        d = {
            "command": self.command,
            "config": self.config,
            "calibration": self.calibration,
            "results": self.results,
            "checks": [c.to_json() for c in self.checks],
            "timings": self.timings,
        }
        if self.timestamp is not None:
            d["timestamp"] = self.timestamp
        return to_jsonable(d)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()
