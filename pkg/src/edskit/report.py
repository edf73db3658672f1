"""Structured pass/fail/unknown verification reports.

A report is a tree: each node records one named check, its status, an
optional witness (the offending form, rank, or sample point), and the
genericity assumptions accumulated while deciding it.  A node never claims
PASS if any child is FAIL or UNKNOWN.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional


class Status(Enum):
    PASS = "pass"
    FAIL = "fail"
    UNKNOWN = "unknown"


class CheckError(Exception):
    """Raised when a verification cannot even be set up (bad inputs)."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


@dataclass
class Report:
    name: str
    status: Status = Status.PASS
    detail: str = ""
    witness: Optional[str] = None
    assumptions: list[str] = field(default_factory=list)
    children: list["Report"] = field(default_factory=list)

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def passed(name: str, detail: str = "", assumptions: Iterable[str] = ()) -> "Report":
        return Report(name, Status.PASS, detail, assumptions=list(assumptions))

    @staticmethod
    def failed(name: str, detail: str = "", witness: Optional[str] = None) -> "Report":
        return Report(name, Status.FAIL, detail, witness=witness)

    @staticmethod
    def unknown(name: str, detail: str = "", witness: Optional[str] = None) -> "Report":
        return Report(name, Status.UNKNOWN, detail, witness=witness)

    def add(self, child: "Report") -> "Report":
        self.children.append(child)
        if child.status is Status.FAIL and self.status is not Status.FAIL:
            self.status = Status.FAIL
        elif child.status is Status.UNKNOWN and self.status is Status.PASS:
            self.status = Status.UNKNOWN
        return child

    def assume(self, facts: Iterable[str]) -> None:
        for f in facts:
            if f not in self.assumptions:
                self.assumptions.append(f)

    # -- queries ---------------------------------------------------------------

    @property
    def ok(self) -> bool:
        return self.status is Status.PASS

    def all_assumptions(self) -> list[str]:
        out = list(self.assumptions)
        for c in self.children:
            for a in c.all_assumptions():
                if a not in out:
                    out.append(a)
        return out

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        d: dict = {"name": self.name, "status": self.status.value}
        if self.detail:
            d["detail"] = self.detail
        if self.witness is not None:
            d["witness"] = self.witness
        if self.assumptions:
            d["assumptions"] = list(self.assumptions)
        if self.children:
            d["children"] = [c.to_dict() for c in self.children]
        return d

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @staticmethod
    def from_dict(d: dict) -> "Report":
        r = Report(
            d["name"],
            Status(d["status"]),
            d.get("detail", ""),
            d.get("witness"),
            list(d.get("assumptions", [])),
        )
        r.children = [Report.from_dict(c) for c in d.get("children", [])]
        return r

    @staticmethod
    def from_json(text: str) -> "Report":
        return Report.from_dict(json.loads(text))

    def render_text(self, indent: int = 0) -> str:
        mark = {Status.PASS: "PASS", Status.FAIL: "FAIL", Status.UNKNOWN: "????"}
        lines = ["  " * indent + f"[{mark[self.status]}] {self.name}"
                 + (f" -- {self.detail}" if self.detail else "")]
        if self.witness:
            lines.append("  " * (indent + 1) + f"witness: {self.witness}")
        for a in self.assumptions:
            lines.append("  " * (indent + 1) + f"assuming: {a}")
        for c in self.children:
            lines.append(c.render_text(indent + 1))
        return "\n".join(lines)
