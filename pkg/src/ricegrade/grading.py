"""Completeness classes, broken-rice rates, variety identification and grade
assignment against the standards table."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .segmentation import Grain
from .varieties import (
    DEFAULT_STANDARDS,
    VARIETIES,
    Branch,
    CompletenessClass,
    RiceVariety,
    StandardsTable,
    VarietyCode,
)

WHOLE_LENGTH_FRACTION = 0.75
SIZEABLE_SIEVE_MM = 2.0
TINY_SIEVE_MM = 1.0
OFF_GRADE = "OffGrade"

MASS_MEASURED = "MeasuredMass"
MASS_AREA_PROXY = "AreaProxy"


def _long_short(grain) -> tuple[float, float]:
    if isinstance(grain, Grain):
        return grain.long_axis_mm, grain.short_axis_mm
    return float(grain[0]), float(grain[1])


def passes_sieve(short_axis_mm: float, hole_mm: float) -> bool:
    """A grain falls through a round-hole sieve when its short axis is below the hole diameter."""
    return short_axis_mm < hole_mm


def classify_completeness(grain, batch_avg_whole_length_mm: float) -> CompletenessClass | None:
    """Completeness class of a grain, or ``None`` for dust that passes the 1.0 mm sieve.

    ``grain`` is a Grain or a ``(long_mm, short_mm)`` pair.
    """
    if not batch_avg_whole_length_mm > 0:
        raise ValueError("batch average whole length must be positive")
    long_mm, short_mm = _long_short(grain)
    if long_mm >= WHOLE_LENGTH_FRACTION * batch_avg_whole_length_mm:
        return CompletenessClass.WHOLE
    if not passes_sieve(short_mm, SIZEABLE_SIEVE_MM):
        return CompletenessClass.SIZEABLE_BROKEN
    if not passes_sieve(short_mm, TINY_SIEVE_MM):
        return CompletenessClass.TINY_BROKEN
    return None


def compute_batch_avg_whole_length(grains: Sequence, variety: RiceVariety | VarietyCode | str) -> float:
    """Two-pass estimate of the batch's mean whole-grain length.

    Pass one classifies against the variety's catalogue length; pass two
    averages the long axes of the grains that came out whole. If none did,
    the catalogue length is returned.
    """
    if not len(grains):
        raise ValueError("need at least one grain")
    if not isinstance(variety, RiceVariety):
        variety = VARIETIES[VarietyCode(variety)]
    provisional = variety.avg_length_mm
    whole = [_long_short(g)[0] for g in grains
             if classify_completeness(g, provisional) is CompletenessClass.WHOLE]
    if not whole:
        return provisional
    return float(np.mean(whole))


def broken_rates(classified: Sequence[tuple], masses: Sequence[float] | None = None) -> tuple[float, float]:
    """Small-broken rate X1 and total broken rate X2 as mass fractions.

    ``classified`` holds ``(grain, CompletenessClass)`` pairs. Without
    ``masses`` the projected area of each grain stands in for its mass.
    """
    if masses is None:
        masses = [g.area_mm2 for g, _ in classified]
    if len(masses) != len(classified):
        raise ValueError("masses and grains differ in length")
    m = m1 = m2 = 0.0
    for (_, cls), mass in zip(classified, masses):
        m += mass
        if cls is CompletenessClass.TINY_BROKEN:
            m1 += mass
            m2 += mass
        elif cls is CompletenessClass.SIZEABLE_BROKEN:
            m2 += mass
    if not m > 0:
        raise ValueError("total sample mass must be positive")
    return m1 / m, m2 / m


def _centroid_space():
    codes = list(VarietyCode)
    pts = np.array([[VARIETIES[c].avg_length_mm, VARIETIES[c].avg_width_mm] for c in codes])
    scale = pts.std(axis=0)
    return codes, pts / scale, scale


_CODES, _CENTROIDS_Z, _SCALE = _centroid_space()


def classify_variety(grain) -> tuple[VarietyCode, float]:
    """Nearest catalogue centroid in (length, width) space, each axis divided by
    the across-variety standard deviation. Ties go to declaration order."""
    long_mm, short_mm = _long_short(grain)
    z = np.array([long_mm, short_mm]) / _SCALE
    dist = np.sqrt(((_CENTROIDS_Z - z) ** 2).sum(axis=1))
    best = int(np.argmin(dist))
    return _CODES[best], float(dist[best])


def admixture_rate(grains: Sequence, declared) -> float:
    if not len(grains):
        raise ValueError("need at least one grain")
    declared = VarietyCode(declared)
    foreign = sum(1 for g in grains if classify_variety(g)[0] is not declared)
    return foreign / len(grains)


def assign_grade(branch, small_broken: float, broken: float, chalk: float, admixture: float,
                 table: StandardsTable | None = None):
    """Best (lowest) level whose thresholds all hold, else ``OFF_GRADE``.

    The chalk rate is ignored for branches whose rows carry no chalk limit.
    """
    for row in (table or DEFAULT_STANDARDS).rows(Branch(branch)):
        if row.accepts(small_broken, broken, chalk, admixture):
            return row.level
    return OFF_GRADE


@dataclass
class SampleReport:
    declared_variety: str
    n_grains: int
    class_counts: dict = field(default_factory=dict)
    small_broken_rate: float = 0.0
    broken_rate: float = 0.0
    chalkiness: float = 0.0
    admixture_rate: float = 0.0
    grade: int | str = OFF_GRADE
    mass_basis: str = MASS_AREA_PROXY
    branch: str = ""
    batch_avg_whole_length_mm: float = 0.0
    chalk_detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if sum(self.class_counts.values()) != self.n_grains:
            raise ValueError("class counts must sum to n_grains")
        if self.small_broken_rate > self.broken_rate:
            raise ValueError("small broken rate exceeds broken rate")

    def to_dict(self) -> dict:
        return {
            "declared_variety": self.declared_variety,
            "branch": self.branch,
            "n_grains": self.n_grains,
            "class_counts": dict(self.class_counts),
            "small_broken_rate": self.small_broken_rate,
            "broken_rate": self.broken_rate,
            "chalkiness": self.chalkiness,
            "admixture_rate": self.admixture_rate,
            "grade": self.grade,
            "mass_basis": self.mass_basis,
            "batch_avg_whole_length_mm": self.batch_avg_whole_length_mm,
            "chalk_detail": dict(self.chalk_detail),
        }

    CSV_FIELDS = ("declared_variety", "branch", "n_grains", "whole", "sizeable_broken", "tiny_broken",
                  "small_broken_rate_pct", "broken_rate_pct", "chalkiness_pct", "admixture_rate_pct",
                  "grade", "mass_basis")

    def csv_row(self) -> dict:
        pct = lambda x: f"{100.0 * x:.4f}"  # noqa: E731
        return {
            "declared_variety": self.declared_variety,
            "branch": self.branch,
            "n_grains": self.n_grains,
            "whole": self.class_counts.get(CompletenessClass.WHOLE.value, 0),
            "sizeable_broken": self.class_counts.get(CompletenessClass.SIZEABLE_BROKEN.value, 0),
            "tiny_broken": self.class_counts.get(CompletenessClass.TINY_BROKEN.value, 0),
            "small_broken_rate_pct": pct(self.small_broken_rate),
            "broken_rate_pct": pct(self.broken_rate),
            "chalkiness_pct": pct(self.chalkiness),
            "admixture_rate_pct": pct(self.admixture_rate),
            "grade": self.grade,
            "mass_basis": self.mass_basis,
        }
