"""Variety metadata and grading-standard tables.

Rates everywhere in the package are fractions in [0, 1]; they are turned
into percentages only when a report is rendered.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping


class Branch(str, enum.Enum):
    INDICA = "Indica"
    JAPONICA = "Japonica"
    GLUTINOUS_JAPONICA = "GlutinousJaponica"
    GLUTINOUS_INDICA = "GlutinousIndica"

    @property
    def glutinous(self) -> bool:
        return self in (Branch.GLUTINOUS_JAPONICA, Branch.GLUTINOUS_INDICA)


class CompletenessClass(str, enum.Enum):
    WHOLE = "Whole"
    SIZEABLE_BROKEN = "SizeableBroken"
    TINY_BROKEN = "TinyBroken"


class VarietyCode(str, enum.Enum):
    # declaration order is the tie-break order of the centroid classifier
    GD = "GD"
    NM = "NM"
    WC = "WC"
    PJX = "PJX"
    WN = "WN"
    YB = "YB"


@dataclass(frozen=True)
class RiceVariety:
    code: VarietyCode
    name: str
    branch: Branch
    avg_length_mm: float
    avg_width_mm: float

    def __post_init__(self):
        if not self.avg_length_mm > self.avg_width_mm > 0:
            raise ValueError(f"{self.code.value}: need length > width > 0")

    @property
    def expected_area_mm2(self) -> float:
        """Projected area of an ellipse with the variety's mean length and width."""
        return 0.25 * 3.141592653589793 * self.avg_length_mm * self.avg_width_mm


_VARIETIES = (
    RiceVariety(VarietyCode.GD, "Guangdong Simiao Rice", Branch.INDICA, 6.74, 1.74),
    # NM is only labelled "Glutinous"; japonica branch is a configurable default
    RiceVariety(VarietyCode.NM, "Northeastern Glutinous Rice", Branch.GLUTINOUS_JAPONICA, 4.45, 2.86),
    RiceVariety(VarietyCode.WC, "Wuchang Rice", Branch.INDICA, 6.63, 2.44),
    RiceVariety(VarietyCode.PJX, "Panjin Crab Field Rice", Branch.JAPONICA, 4.82, 2.83),
    RiceVariety(VarietyCode.WN, "Wannian Gong Rice", Branch.INDICA, 6.81, 2.20),
    RiceVariety(VarietyCode.YB, "Yanbian Rice", Branch.JAPONICA, 4.59, 2.62),
)

VARIETIES: Mapping[VarietyCode, RiceVariety] = MappingProxyType({v.code: v for v in _VARIETIES})


def get_variety(code, branch_overrides: Mapping[str, str] | None = None) -> RiceVariety:
    """Look up a variety by code, optionally re-assigning its branch."""
    code = VarietyCode(code)
    variety = VARIETIES[code]
    if branch_overrides and code.value in branch_overrides:
        variety = RiceVariety(
            variety.code, variety.name, Branch(branch_overrides[code.value]),
            variety.avg_length_mm, variety.avg_width_mm,
        )
    return variety


def variety_centroid(code) -> tuple[float, float]:
    v = VARIETIES[VarietyCode(code)]
    return v.avg_length_mm, v.avg_width_mm


@dataclass(frozen=True)
class GradingStandard:
    branch: Branch
    level: int
    max_broken_rate: float
    max_small_broken_rate: float
    max_chalk_rate: float | None
    max_admixture_rate: float = 0.05

    def accepts(self, small_broken: float, broken: float, chalk: float, admixture: float) -> bool:
        if broken > self.max_broken_rate or small_broken > self.max_small_broken_rate:
            return False
        if self.max_chalk_rate is not None and chalk > self.max_chalk_rate:
            return False
        return admixture <= self.max_admixture_rate

    def to_dict(self) -> dict:
        return {
            "branch": self.branch.value,
            "level": self.level,
            "max_broken_rate": self.max_broken_rate,
            "max_small_broken_rate": self.max_small_broken_rate,
            "max_chalk_rate": self.max_chalk_rate,
            "max_admixture_rate": self.max_admixture_rate,
        }


class StandardsTable:
    """Immutable collection of grading rows keyed by (branch, level)."""

    def __init__(self, rows: Iterable[GradingStandard]):
        by_branch: dict[Branch, list[GradingStandard]] = {}
        for row in rows:
            by_branch.setdefault(row.branch, []).append(row)
        for branch, branch_rows in by_branch.items():
            branch_rows.sort(key=lambda r: r.level)
            levels = [r.level for r in branch_rows]
            if levels != list(range(1, len(levels) + 1)):
                raise ValueError(f"{branch.value}: levels must be 1..n, got {levels}")
            for lo, hi in zip(branch_rows, branch_rows[1:]):
                if (hi.max_broken_rate < lo.max_broken_rate
                        or hi.max_small_broken_rate < lo.max_small_broken_rate
                        or hi.max_admixture_rate < lo.max_admixture_rate):
                    raise ValueError(f"{branch.value}: thresholds decrease at level {hi.level}")
                if (lo.max_chalk_rate is None) != (hi.max_chalk_rate is None):
                    raise ValueError(f"{branch.value}: chalk threshold present on some levels only")
                if lo.max_chalk_rate is not None and hi.max_chalk_rate < lo.max_chalk_rate:
                    raise ValueError(f"{branch.value}: chalk threshold decreases at level {hi.level}")
        self._rows = {b: tuple(r) for b, r in by_branch.items()}

    def rows(self, branch) -> tuple[GradingStandard, ...]:
        return self._rows.get(Branch(branch), ())

    def row(self, branch, level: int) -> GradingStandard:
        rows = self.rows(branch)
        if not 1 <= level <= len(rows):
            raise IndexError(f"level {level} out of range 1..{len(rows)} for {Branch(branch).value}")
        return rows[level - 1]

    def __iter__(self):
        for branch in Branch:
            yield from self._rows.get(branch, ())

    def to_list(self) -> list[dict]:
        return [row.to_dict() for row in self]

    @classmethod
    def from_list(cls, data: list[dict]) -> "StandardsTable":
        rows = []
        for item in data:
            chalk = item.get("max_chalk_rate")
            rows.append(GradingStandard(
                branch=Branch(item["branch"]),
                level=int(item["level"]),
                max_broken_rate=float(item["max_broken_rate"]),
                max_small_broken_rate=float(item["max_small_broken_rate"]),
                max_chalk_rate=None if chalk is None else float(chalk),
                max_admixture_rate=float(item.get("max_admixture_rate", 0.05)),
            ))
        return cls(rows)

    @classmethod
    def load(cls, path: str | Path) -> "StandardsTable":
        with open(path, encoding="utf-8") as fh:
            return cls.from_list(json.load(fh))


def default_standards() -> StandardsTable:
    text = resources.files("ricegrade").joinpath("data/standards.json").read_text(encoding="utf-8")
    return StandardsTable.from_list(json.loads(text))


DEFAULT_STANDARDS = default_standards()


def standard_row(branch, level: int, table: StandardsTable | None = None) -> GradingStandard:
    return (table or DEFAULT_STANDARDS).row(branch, level)
