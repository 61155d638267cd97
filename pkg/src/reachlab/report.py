"""Structured outcome of a probe run, plus the tolerance bookkeeping behind its verdict."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any


class Verdict(str, enum.Enum):
    CONFIRMED = "confirmed"
    VIOLATED = "violated"
    INCONCLUSIVE = "inconclusive"


# an excess above tol but within this multiple of tol is treated as numerical noise
NOISE_FACTOR = 10.0


@dataclass
class ProbeReport:
    name: str
    space: dict | None
    params: dict
    verdict: Verdict
    witnesses: list = field(default_factory=list)
    slacks: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    data: dict = field(default_factory=dict)

    @property
    def confirmed(self) -> bool:
        return self.verdict is Verdict.CONFIRMED

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "space": self.space,
            "params": self.params,
            "verdict": self.verdict.value,
            "witnesses": self.witnesses,
            "slacks": self.slacks,
            "counts": self.counts,
            "notes": self.notes,
            "data": self.data,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProbeReport":
        return cls(
            name=d["name"],
            space=d.get("space"),
            params=d.get("params", {}),
            verdict=Verdict(d["verdict"]),
            witnesses=d.get("witnesses", []),
            slacks=d.get("slacks", {}),
            counts=d.get("counts", {}),
            notes=d.get("notes", []),
            data=d.get("data", {}),
        )


class Checker:
    """Accumulates inequality checks and turns them into a verdict.

    Each check records an *excess*: how far the asserted inequality is from
    holding (<= 0 means it holds).  Excess within ``tol`` passes; up to
    ``NOISE_FACTOR * tol`` downgrades to inconclusive; beyond that is a
    violation.
    """

    def __init__(self) -> None:
        self.slacks: dict[str, float] = {}
        self.counts: dict[str, int] = {}
        self.notes: list[str] = []
        self._status = Verdict.CONFIRMED
        self._n_checks = 0

    def check(self, key: str, excess: float, tol: float) -> bool:
        self._n_checks += 1
        excess = float(excess)
        if math.isnan(excess):
            excess = math.inf
        prev = self.slacks.get(key, -math.inf)
        self.slacks[key] = max(prev, excess)
        if excess <= tol:
            self.bump(f"{key}:pass")
            return True
        self.bump(f"{key}:fail")
        if excess <= NOISE_FACTOR * tol:
            self._downgrade(Verdict.INCONCLUSIVE)
        else:
            self._downgrade(Verdict.VIOLATED)
        return False

    def require(self, key: str, ok: bool) -> bool:
        """Boolean assertion; failure counts as a violation."""
        return self.check(key, 0.0 if ok else math.inf, 0.0)

    def inconclusive(self, note: str) -> None:
        self.notes.append(note)
        self._downgrade(Verdict.INCONCLUSIVE)

    def bump(self, key: str, n: int = 1) -> None:
        self.counts[key] = self.counts.get(key, 0) + n

    def _downgrade(self, v: Verdict) -> None:
        order = [Verdict.CONFIRMED, Verdict.INCONCLUSIVE, Verdict.VIOLATED]
        if order.index(v) > order.index(self._status):
            self._status = v

    @property
    def verdict(self) -> Verdict:
        return self._status

    def report(self, name: str, space: dict | None, params: dict, **kw: Any) -> ProbeReport:
        return ProbeReport(
            name=name,
            space=space,
            params=params,
            verdict=self.verdict,
            slacks=dict(self.slacks),
            counts=dict(self.counts),
            notes=list(self.notes) + list(kw.pop("notes", [])),
            **kw,
        )
