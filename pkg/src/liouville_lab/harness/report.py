"""Check records and run reports.

A check is a measured value, the bound it is compared against and the
comparison; ``passed`` is always recomputed from those three, so a report
re-rendered from stored records reproduces its pass/fail flags.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from .config import as_jsonable
from .io import read_csv, write_csv

FORMAT = "liouville-lab-report/1"
COMPARATORS = ("le", "ge", "within")


def evaluate(value: float, bound, comparator: str) -> bool:
    if comparator not in COMPARATORS:
        raise ValueError(f"unknown comparator {comparator!r}")
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return False
    if comparator == "le":
        return value <= bound
    if comparator == "ge":
        return value >= bound
    lo, hi = bound
    return lo <= value <= hi


@dataclass
class CheckRecord:
    name: str
    value: float
    bound: object
    comparator: str = "le"
    criterion: Optional[int] = None
    note: str = ""

    def __post_init__(self):
        self.value = float(self.value)
        if isinstance(self.bound, (list, tuple)):
            self.bound = [float(b) for b in self.bound]
        else:
            self.bound = float(self.bound)

    @property
    def passed(self) -> bool:
        return evaluate(self.value, self.bound, self.comparator)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return as_jsonable(d)

    def line(self) -> str:
        op = {"le": "<=", "ge": ">=", "within": "in"}[self.comparator]
        bound = f"[{self.bound[0]:.4g}, {self.bound[1]:.4g}]" if isinstance(self.bound, list) else f"{self.bound:.4g}"
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.name}: {self.value:.4g} {op} {bound}" + (f"  ({self.note})" if self.note else "")


@dataclass
class RunReport:
    config: dict
    checks: list
    suite: str
    timing: dict = field(default_factory=dict)
    format: str = FORMAT

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def criteria(self) -> dict:
        """``{criterion: passed}`` over checks that carry a criterion number."""
        out: dict = {}
        for c in self.checks:
            if c.criterion is not None:
                out[c.criterion] = out.get(c.criterion, True) and c.passed
        return dict(sorted(out.items()))

    def body(self) -> dict:
        names = [c.name for c in self.checks]
        if len(names) != len(set(names)):
            raise ValueError("every check must appear exactly once")
        return {
            "format": self.format,
            "suite": self.suite,
            "config": as_jsonable(self.config),
            "checks": [c.as_dict() for c in self.checks],
            "passed": self.passed,
        }

    def body_json(self) -> str:
        """Deterministic serialization of everything except timing."""
        return json.dumps(self.body(), sort_keys=True, indent=2)

    def to_json(self) -> str:
        doc = self.body()
        doc["timing"] = self.timing
        return json.dumps(doc, sort_keys=True, indent=2)

    def render_text(self) -> str:
        lines = [f"suite {self.suite}  ({self.format})"]
        lines += [c.line() for c in self.checks]
        crit = self.criteria()
        if crit:
            lines.append("criteria: " + " ".join(f"{k}:{'ok' if v else 'FAIL'}" for k, v in crit.items()))
        lines.append("overall: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)

    # -- persistence ------------------------------------------------------

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json())
        (out / "config.json").write_text(json.dumps(as_jsonable(self.config), sort_keys=True, indent=2))
        write_csv(
            out / "raw" / "checks.csv",
            ["name", "criterion", "value", "bound_lo", "bound_hi", "comparator", "note"],
            [
                (
                    c.name,
                    "" if c.criterion is None else c.criterion,
                    c.value,
                    c.bound[0] if isinstance(c.bound, list) else c.bound,
                    c.bound[1] if isinstance(c.bound, list) else "",
                    c.comparator,
                    c.note,
                )
                for c in self.checks
            ],
        )
        (out / "raw" / "suite.txt").write_text(self.suite + "\n")
        return out


def load_records(raw_dir) -> list:
    rows = read_csv(Path(raw_dir) / "checks.csv")
    records = []
    for r in rows:
        bound = float(r["bound_lo"]) if r["bound_hi"] == "" else [float(r["bound_lo"]), float(r["bound_hi"])]
        records.append(
            CheckRecord(
                name=r["name"],
                value=float(r["value"]),
                bound=bound,
                comparator=r["comparator"],
                criterion=int(r["criterion"]) if r["criterion"] else None,
                note=r["note"],
            )
        )
    return records


def rerender(raw_dir) -> RunReport:
    """Rebuild a report from a run's raw directory, re-evaluating every flag."""
    raw = Path(raw_dir)
    config_path = raw.parent / "config.json"
    config = json.loads(config_path.read_text()) if config_path.exists() else {}
    suite_path = raw / "suite.txt"
    suite = suite_path.read_text().strip() if suite_path.exists() else "unknown"
    return RunReport(config, load_records(raw), suite)
