"""Verdicts and residual reports shared by all checks."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import numpy as np


class Verdict(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    SKIPPED = "hypothesis unmet"
    ERROR = "error"


def _point_repr(p) -> list[float]:
    coords = getattr(p, "coords", p)
    return [float(c) for c in np.asarray(coords, dtype=float).reshape(-1)]


@dataclass
class Report:
    """Outcome of one check: residuals per sub-check and the verdict they imply."""

    name: str
    verdict: Verdict
    residuals: dict[str, float] = field(default_factory=dict)
    tol: float | None = None
    points: list = field(default_factory=list)
    case: str | None = None
    details: dict[str, Any] = field(default_factory=dict)
    messages: list[str] = field(default_factory=list)
    children: list["Report"] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS

    @property
    def max_residual(self) -> float:
        vals = [v for v in self.residuals.values() if v is not None and np.isfinite(v)]
        return max(vals) if vals else 0.0

    def __bool__(self) -> bool:
        return self.passed

    @classmethod
    def from_residuals(cls, name: str, residuals: Mapping[str, float], tol: float,
                       points: Iterable = (), **kw) -> "Report":
        res = {k: float(v) for k, v in residuals.items()}
        ok = all(v <= tol for v in res.values())
        return cls(name, Verdict.PASS if ok else Verdict.FAIL, res, tol, list(points), **kw)

    @classmethod
    def skipped(cls, name: str, reason: str, **kw) -> "Report":
        return cls(name, Verdict.SKIPPED, messages=[reason], **kw)

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "verdict": self.verdict.value,
            "max_residual": self.max_residual,
            "residuals": {k: float(v) for k, v in sorted(self.residuals.items())},
            "tol": self.tol,
            "points": [_point_repr(p) for p in self.points],
        }
        if self.case is not None:
            out["case"] = self.case
        if self.details:
            out["details"] = _jsonable(self.details)
        if self.messages:
            out["messages"] = list(self.messages)
        if self.children:
            out["children"] = [c.to_json() for c in self.children]
        return out

    def summary(self) -> str:
        return f"{self.name}: {self.verdict.value} (max residual {self.max_residual:.3e})"


IntegrabilityReport = Report


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int)) and not isinstance(x, bool):
        return int(x)
    if isinstance(x, enum.Enum):
        return x.value
    if hasattr(x, "coords"):
        return _point_repr(x)
    return x
