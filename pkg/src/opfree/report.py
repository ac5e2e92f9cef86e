"""Verification records and their plain-text serialization."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

PASS, WARN, FAIL, NOT_REPRODUCIBLE = "PASS", "WARN", "FAIL", "NOT-REPRODUCIBLE"


@dataclass
class CheckRecord:
    label: str
    anchor: str
    defect: float
    tolerance: float
    status: str
    detail: str = ""
    fingerprint: str = ""

    def line(self) -> str:
        defect = "-" if self.defect is None or not np.isfinite(self.defect) else f"{self.defect:.3e}"
        fields = [f"label={self.label}", f"anchor={self.anchor}", f"defect={defect}",
                  f"tolerance={self.tolerance:.3e}", f"status={self.status}"]
        if self.fingerprint:
            fields.append(f"inputs={self.fingerprint}")
        if self.detail:
            fields.append(f"detail={self.detail}")
        return " | ".join(fields)


@dataclass
class VerificationReport:
    suite: str
    records: list[CheckRecord] = field(default_factory=list)
    environment: dict = field(default_factory=dict)

    def add(self, label, anchor, defect, tolerance, detail="", status=None, fingerprint=""):
        defect = float(defect)
        if status is None:
            status = PASS if defect <= tolerance else FAIL
        rec = CheckRecord(label, anchor, defect, float(tolerance), status, detail, fingerprint)
        self.records.append(rec)
        return rec

    def extend(self, other: "VerificationReport"):
        self.records.extend(other.records)

    @property
    def passed(self) -> bool:
        return all(r.status != FAIL for r in self.records)

    @property
    def warnings(self) -> list[CheckRecord]:
        return [r for r in self.records if r.status == WARN]

    @property
    def failures(self) -> list[CheckRecord]:
        return [r for r in self.records if r.status == FAIL]

    def worst(self) -> float:
        vals = [r.defect for r in self.records if r.defect is not None and np.isfinite(r.defect)]
        return max(vals, default=0.0)

    def status(self) -> str:
        if self.failures:
            return FAIL
        if self.warnings:
            return WARN
        if self.records and all(r.status == NOT_REPRODUCIBLE for r in self.records):
            return NOT_REPRODUCIBLE
        return PASS

    def to_text(self) -> str:
        lines = [f"[suite {self.suite}] status={self.status()}"]
        for k in sorted(self.environment):
            lines.append(f"  env {k}={self.environment[k]}")
        lines += ["  " + r.line() for r in self.records]
        return "\n".join(lines)


def fingerprint(*arrays) -> str:
    """Short stable hash of numeric inputs, for traceability in reports."""
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(np.asarray(a, dtype=complex))
        h.update(np.round(a, 12).tobytes())
    return h.hexdigest()[:12]
