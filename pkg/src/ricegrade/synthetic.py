"""Synthetic grain images for demos and tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .varieties import VARIETIES, VarietyCode


@dataclass(frozen=True)
class GrainSpec:
    cx: float
    cy: float
    semi_long_px: float
    semi_short_px: float
    angle_deg: float = 0.0
    intensity: int = 150
    chalk_fraction: float = 0.0  # radius of the bright core as a fraction of the semi-axes
    chalk_intensity: int = 250


def ellipse_mask(shape, cx, cy, a, b, angle_deg=0.0) -> np.ndarray:
    rows, cols = np.indices(shape, dtype=np.float64)
    t = np.deg2rad(angle_deg)
    dx, dy = cols + 0.5 - cx, rows + 0.5 - cy
    u = dx * np.cos(t) + dy * np.sin(t)
    v = -dx * np.sin(t) + dy * np.cos(t)
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


def render(shape, grains, background: int = 20) -> np.ndarray:
    img = np.full(shape, background, dtype=np.uint8)
    for g in grains:
        img[ellipse_mask(shape, g.cx, g.cy, g.semi_long_px, g.semi_short_px, g.angle_deg)] = g.intensity
        if g.chalk_fraction > 0:
            core = ellipse_mask(shape, g.cx, g.cy, g.semi_long_px * g.chalk_fraction,
                                g.semi_short_px * g.chalk_fraction, g.angle_deg)
            img[core] = g.chalk_intensity
    return img


def variety_grain(code, cx, cy, calibration: float, length_scale: float = 1.0, **kwargs) -> GrainSpec:
    """Ellipse with a variety's mean length and width (length optionally scaled)."""
    v = VARIETIES[VarietyCode(code)]
    a = 0.5 * v.avg_length_mm * length_scale / calibration
    b = 0.5 * v.avg_width_mm / calibration
    return GrainSpec(cx, cy, max(a, b), min(a, b), **kwargs)


def batch_image(code="GD", calibration=0.05, n_whole=4, n_sizeable=1, n_tiny=1, chalk_fraction=0.0,
                seed=0, shape=(400, 640)) -> np.ndarray:
    """A grid of whole grains and fragments of one variety, randomly rotated."""
    rng = np.random.default_rng(seed)
    v = VARIETIES[VarietyCode(code)]
    specs = []
    cells = [(r, c) for r in range(shape[0] // 160) for c in range(shape[1] // 160)]
    kinds = ["whole"] * n_whole + ["sizeable"] * n_sizeable + ["tiny"] * n_tiny
    if len(kinds) > len(cells):
        raise ValueError(f"{len(kinds)} grains do not fit a {shape} image")
    for (r, c), kind in zip(cells, kinds):
        cx, cy = 160 * c + 80, 160 * r + 80
        angle = float(rng.uniform(0, 180))
        if kind == "whole":
            spec = variety_grain(code, cx, cy, calibration, angle_deg=angle, chalk_fraction=chalk_fraction)
        elif kind == "sizeable":
            spec = GrainSpec(cx, cy, 0.5 * 0.5 * v.avg_length_mm / calibration, 0.5 * 2.4 / calibration, angle)
        else:
            spec = GrainSpec(cx, cy, 0.5 * 1.8 / calibration, 0.5 * 1.5 / calibration, angle)
        specs.append(spec)
    return render(shape, specs)
