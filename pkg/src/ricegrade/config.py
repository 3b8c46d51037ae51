"""Pipeline configuration and its commented ``key = value`` file format.

Example::

    # bench camera, 20x objective
    calibration_mm_per_px = 0.05
    declared_variety = GD
    binarize_threshold =            # blank means Otsu
    branch_overrides = NM:GlutinousIndica
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

from .imgproc import DEFAULT_GAINS
from .varieties import Branch, VarietyCode, get_variety

THREADS_ENV = "RICEGRADE_THREADS"

DEFAULT_COMPLETENESS_TOKENS = {
    "whole": "Whole",
    "sizeable": "SizeableBroken",
    "large": "SizeableBroken",
    "tiny": "TinyBroken",
    "small": "TinyBroken",
}


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    calibration_mm_per_px: float = 0.05
    declared_variety: str = "GD"
    brightness_level: int = 1
    brightness_gains: tuple[float, ...] = DEFAULT_GAINS
    binarize_threshold: int | None = None
    min_grain_area_px: int = 50
    min_region_area_px: int | None = None  # defaults to min_grain_area_px
    median_window: int = 3
    axis_method: str = "minrect"
    chalk_rho: float = 1.15
    chalk_eps: float = 1e-6
    chalk_max_iter: int = 100
    chalk_k: int = 1
    chalky_grain_min_ratio: float = 0.01
    seed: int = 0
    standards_path: str | None = None
    output_dir: str = "out"
    workers: int = 1
    branch_overrides: dict[str, str] = field(default_factory=dict)
    completeness_tokens: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_COMPLETENESS_TOKENS))

    def __post_init__(self):
        self.brightness_gains = tuple(float(g) for g in self.brightness_gains)
        self.validate()

    def validate(self) -> None:
        if not self.calibration_mm_per_px > 0:
            raise ConfigError("calibration_mm_per_px must be positive")
        try:
            VarietyCode(self.declared_variety)
        except ValueError:
            raise ConfigError(f"unknown variety {self.declared_variety!r}") from None
        if len(self.brightness_gains) < 1 or any(
                b < a for a, b in zip(self.brightness_gains, self.brightness_gains[1:])):
            raise ConfigError("brightness_gains must be a non-empty non-decreasing list")
        if not 1 <= self.brightness_level <= len(self.brightness_gains):
            raise ConfigError(f"brightness_level must be in 1..{len(self.brightness_gains)}")
        if self.binarize_threshold is not None and not 0 <= self.binarize_threshold <= 255:
            raise ConfigError("binarize_threshold must be in [0, 255]")
        if self.min_grain_area_px < 1:
            raise ConfigError("min_grain_area_px must be >= 1")
        if self.min_region_area_px is not None and self.min_region_area_px < 1:
            raise ConfigError("min_region_area_px must be >= 1")
        if self.median_window < 3 or self.median_window % 2 == 0:
            raise ConfigError("median_window must be odd and >= 3")
        if self.axis_method not in ("minrect", "pca"):
            raise ConfigError("axis_method must be 'minrect' or 'pca'")
        if self.chalk_rho < 0 or not self.chalk_eps > 0 or self.chalk_max_iter < 1 or self.chalk_k < 1:
            raise ConfigError("chalk parameters out of range")
        if not 0 <= self.chalky_grain_min_ratio <= 1:
            raise ConfigError("chalky_grain_min_ratio must be in [0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for code, branch in self.branch_overrides.items():
            try:
                VarietyCode(code), Branch(branch)
            except ValueError:
                raise ConfigError(f"bad branch override {code}:{branch}") from None

    @property
    def variety(self):
        return get_variety(self.declared_variety, self.branch_overrides)

    @property
    def expected_grain_area_mm2(self) -> float:
        return self.variety.expected_area_mm2

    def effective_workers(self) -> int:
        cap = os.environ.get(THREADS_ENV)
        if cap:
            try:
                return max(1, min(self.workers, int(cap)))
            except ValueError:
                raise ConfigError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
        return self.workers

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["brightness_gains"] = list(self.brightness_gains)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def replace(self, **changes) -> "PipelineConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes)

    def dumps(self) -> str:
        lines = ["# ricegrade pipeline configuration"]
        for f in dataclasses.fields(self):
            lines.append(f"{f.name} = {_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> "PipelineConfig":
        types = {f.name: f for f in dataclasses.fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            try:
                values[key] = _parse_value(key, value, types[key].default)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: {key}: {exc}") from None
        return cls(**values)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


_OPTIONAL_INT = {"binarize_threshold", "min_region_area_px"}
_OPTIONAL_STR = {"standards_path"}
_FLOAT = {"calibration_mm_per_px", "chalk_rho", "chalk_eps", "chalky_grain_min_ratio"}
_INT = {"brightness_level", "min_grain_area_px", "median_window", "chalk_max_iter", "chalk_k", "seed", "workers"}
_MAPPINGS = {"branch_overrides", "completeness_tokens"}


def _parse_value(key: str, value: str, default):
    if key in _OPTIONAL_INT:
        return int(value) if value else None
    if key in _OPTIONAL_STR:
        return value or None
    if key in _FLOAT:
        return float(value)
    if key in _INT:
        return int(value)
    if key == "brightness_gains":
        return tuple(float(v) for v in value.split(",") if v.strip())
    if key in _MAPPINGS:
        pairs = {}
        for item in filter(None, (s.strip() for s in value.split(","))):
            k, sep, v = item.partition(":")
            if not sep:
                raise ValueError(f"expected name:value pairs, got {item!r}")
            pairs[k.strip()] = v.strip()
        return pairs
    return value


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (tuple, list)):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, dict):
        return ", ".join(f"{k}:{v}" for k, v in value.items())
    if isinstance(value, float):
        return repr(value)
    return str(value)
