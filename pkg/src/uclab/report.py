"""Named-check verification reports, serializable to JSON and CSV."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

__all__ = ["CheckEntry", "VerificationReport"]

_VERSION = "0.1.0"


@dataclass
class CheckEntry:
    check_id: str
    anchor: str          # stable slug describing the claim being checked
    measured: float
    bound: float
    tolerance: float
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "check_id": self.check_id,
            "anchor": self.anchor,
            "measured": _jsonable(self.measured),
            "bound": _jsonable(self.bound),
            "tolerance": _jsonable(self.tolerance),
            "pass": bool(self.passed),
            "detail": self.detail,
        }


def _jsonable(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


@dataclass
class VerificationReport:
    name: str
    entries: list[CheckEntry] = field(default_factory=list)
    seed: int | None = None
    metadata: dict = field(default_factory=dict)

    def add(self, check_id: str, anchor: str, measured: float, bound: float,
            tolerance: float, passed: bool, detail: str = "") -> CheckEntry:
        e = CheckEntry(check_id, anchor, float(measured), float(bound),
                       float(tolerance), bool(passed), detail)
        self.entries.append(e)
        return e

    def check_le(self, check_id: str, anchor: str, measured: float, bound: float,
                 tolerance: float = 0.0, detail: str = "") -> CheckEntry:
        """Record measured <= bound * (1 + tolerance) + tolerance."""
        ok = float(measured) <= float(bound) * (1.0 + tolerance) + tolerance
        return self.add(check_id, anchor, measured, bound, tolerance, ok, detail)

    def extend(self, other: "VerificationReport") -> None:
        self.entries.extend(other.entries)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    @property
    def failures(self) -> list[CheckEntry]:
        return [e for e in self.entries if not e.passed]

    def to_dict(self, timestamp: bool = True) -> dict:
        meta = {"version": _VERSION, "seed": self.seed}
        meta.update(self.metadata)
        if timestamp:
            meta["timestamp"] = datetime.now(timezone.utc).isoformat()
        return {
            "name": self.name,
            "pass": self.passed,
            "entries": [e.to_dict() for e in sorted(self.entries, key=lambda e: e.check_id)],
            "metadata": meta,
        }

    def to_json(self, timestamp: bool = True) -> str:
        return json.dumps(self.to_dict(timestamp=timestamp), indent=2, sort_keys=True)

    def write_json(self, path, timestamp: bool = True) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json(timestamp=timestamp))
            fh.write("\n")

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["check_id", "anchor", "measured", "bound", "tolerance", "pass", "detail"])
            for e in sorted(self.entries, key=lambda e: e.check_id):
                w.writerow([e.check_id, e.anchor, repr(e.measured), repr(e.bound),
                            repr(e.tolerance), int(e.passed), e.detail])

    def summary_lines(self) -> list[str]:
        lines = []
        for e in sorted(self.entries, key=lambda e: e.check_id):
            tag = "PASS" if e.passed else "FAIL"
            lines.append(f"[{tag}] {e.check_id}: measured={e.measured:.6g} "
                         f"bound={e.bound:.6g} tol={e.tolerance:.2g}")
        return lines
