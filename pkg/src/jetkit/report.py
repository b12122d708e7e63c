"""Check/report records shared by the verifiers."""
from __future__ import annotations

from dataclasses import dataclass, field

from .expr import ZeroVerdict, render

PASSING = ("pass", "probabilistic-pass")
_SEVERITY = {"pass": 0, "probabilistic-pass": 1, "fail": 2, "undecidable": 3}


@dataclass
class Check:
    name: str
    verdict: str
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.verdict in PASSING

    @classmethod
    def from_zero(cls, name: str, v: ZeroVerdict) -> "Check":
        detail = "" if v.verdict == "pass" else f"residual: {render(v.residual)}"
        return cls(name, v.verdict, detail)

    def to_dict(self) -> dict:
        return {"name": self.name, "verdict": self.verdict, "details": self.detail}


@dataclass
class Report:
    title: str
    checks: list[Check] = field(default_factory=list)

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        return check

    def extend(self, other: "Report", prefix: str = ""):
        for c in other.checks:
            self.checks.append(Check(prefix + c.name, c.verdict, c.detail))

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def verdict(self) -> str:
        """Worst verdict, except that a fail outranks undecidable."""
        if not self.checks:
            return "pass"
        vs = {c.verdict for c in self.checks}
        if "fail" in vs:
            return "fail"
        return max(vs, key=_SEVERITY.__getitem__)

    @property
    def symbolic(self) -> bool:
        return all(c.verdict == "pass" for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.ok]

    def __str__(self) -> str:
        lines = [f"{self.title}: {self.verdict}"]
        for c in self.checks:
            lines.append(f"  [{c.verdict}] {c.name}" + (f"  {c.detail}" if c.detail else ""))
        return "\n".join(lines)
