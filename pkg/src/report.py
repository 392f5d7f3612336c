"""Scenario reports and their CSV / JSON renderings."""

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple


@dataclass
class Table:
    """Named columns; `provenance` tags what the numbers were derived from."""
    name: str
    columns: Tuple[str, ...]
    provenance: str = "none"
    rows: List[Tuple[Any, ...]] = field(default_factory=list)

    def add(self, *values: Any) -> None:
        if len(values) != len(self.columns):
            raise ValueError(
                f"table '{self.name}' has {len(self.columns)} columns, got {len(values)} values"
            )
        self.rows.append(tuple(_scalar(v) for v in values))


@dataclass(frozen=True)
class InvariantCheck:
    name: str
    passed: bool
    residual: float
    tolerance: float


def check_below(name: str, residual: float, tolerance: float) -> InvariantCheck:
    residual = float(residual)
    return InvariantCheck(name, math.isfinite(residual) and residual <= tolerance,
                          residual, tolerance)


def check_above(name: str, value: float, bound: float) -> InvariantCheck:
    """Passes when `value` exceeds `bound`, e.g. a residual expected to be large."""
    value = float(value)
    return InvariantCheck(name, math.isfinite(value) and value > bound, value, bound)


@dataclass
class ScenarioReport:
    scenario: str
    parameters: Dict[str, Any]
    tables: List[Table] = field(default_factory=list)
    checks: List[InvariantCheck] = field(default_factory=list)

    def table(self, name: str, columns: Sequence[str], provenance: str = "none") -> Table:
        t = Table(name, tuple(columns), provenance)
        self.tables.append(t)
        return t

    def check(self, c: InvariantCheck) -> None:
        self.checks.append(c)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> List[InvariantCheck]:
        return [c for c in self.checks if not c.passed]


def _scalar(value: Any) -> Any:
    """numpy scalars to plain Python values."""
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        value = value.item()
    if isinstance(value, complex) and value.imag == 0:
        value = value.real
    return value


def to_json(report: ScenarioReport) -> str:
    document = {
        "scenario": report.scenario,
        "parameters": report.parameters,
        "tables": [
            {"name": t.name, "provenance": t.provenance,
             "columns": list(t.columns), "rows": [list(row) for row in t.rows]}
            for t in report.tables
        ],
        "checks": [
            {"name": c.name, "passed": c.passed,
             "residual": c.residual, "tolerance": c.tolerance}
            for c in report.checks
        ],
        "passed": report.passed,
    }
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def to_csv(report: ScenarioReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    for t in report.tables:
        out.write(f"# table: {t.name} (provenance: {t.provenance})\n")
        writer.writerow(t.columns)
        for row in t.rows:
            writer.writerow([_cell(v) for v in row])
    out.write("# checks\n")
    writer.writerow(("name", "passed", "residual", "tolerance"))
    for c in report.checks:
        writer.writerow([c.name, _cell(c.passed), _cell(c.residual), _cell(c.tolerance)])
    return out.getvalue()


def render(report: ScenarioReport, fmt: str) -> str:
    if fmt == "json":
        return to_json(report)
    if fmt == "csv":
        return to_csv(report)
    raise ValueError(f"unknown output format '{fmt}'")
