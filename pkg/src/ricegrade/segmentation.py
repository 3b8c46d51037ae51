"""Grain extraction and morphometry.

Grains are 8-connected foreground components. Long and short axes are the
sides of the minimum-area rectangle enclosing the component, where each pixel
counts as a unit square (so an axis-aligned 100 x 40 block measures exactly
100 x 40 px).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .imgproc import EIGHT_CONNECTED, BinaryImage, GrayImage, binarize, median_filter, remove_small_regions

DEFAULT_MIN_GRAIN_AREA_PX = 50
OVERLAP_FACTOR = 3.0


class GrainTooSmallError(ValueError):
    pass


@dataclass(eq=False)
class Grain:
    component_id: int
    bbox: tuple[int, int, int, int]  # x, y, w, h in pixels
    pixel_count: int
    long_axis_mm: float
    short_axis_mm: float
    area_mm2: float
    pixel_indices: np.ndarray = field(repr=False)  # flat row-major indices into the source image
    image_shape: tuple[int, int] = (0, 0)
    box_corners: np.ndarray | None = field(default=None, repr=False)  # (4, 2) x/y pixel coords
    overlap_suspect: bool = False

    @property
    def rows(self) -> np.ndarray:
        return self.pixel_indices // self.image_shape[1]

    @property
    def cols(self) -> np.ndarray:
        return self.pixel_indices % self.image_shape[1]

    def intensities(self, img: GrayImage) -> np.ndarray:
        if img.pixels.shape != tuple(self.image_shape):
            raise ValueError(f"grain belongs to a {self.image_shape} image, got {img.pixels.shape}")
        return img.pixels.ravel()[self.pixel_indices]

    def to_dict(self) -> dict:
        return {
            "component_id": self.component_id,
            "bbox": list(self.bbox),
            "pixel_count": self.pixel_count,
            "long_axis_mm": self.long_axis_mm,
            "short_axis_mm": self.short_axis_mm,
            "area_mm2": self.area_mm2,
            "overlap_suspect": self.overlap_suspect,
        }


def label_components(img: BinaryImage | np.ndarray) -> list[np.ndarray]:
    """Split the foreground into 8-connected components.

    Each component is a sorted array of flat pixel indices. Components are
    ordered by the (row, col) of their bounding-box top-left corner.
    """
    mask = img.pixels if isinstance(img, BinaryImage) else np.asarray(img, dtype=bool)
    labels, count = ndimage.label(mask, structure=EIGHT_CONNECTED)
    if count == 0:
        return []
    flat = labels.ravel()
    fg = np.flatnonzero(flat)
    order = np.argsort(flat[fg], kind="stable")
    groups = np.split(fg[order], np.cumsum(np.bincount(flat[fg], minlength=count + 1)[1:])[:-1])
    width = mask.shape[1]
    groups.sort(key=lambda idx: (int(idx[0] // width), int((idx % width).min()), int(idx[0])))
    return groups


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain. Returns hull vertices counter-clockwise, no repeats."""
    pts = sorted(set(map(tuple, np.asarray(points, dtype=np.float64).tolist())))
    if len(pts) <= 2:
        return np.array(pts, dtype=np.float64).reshape(-1, 2)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1], dtype=np.float64)


def min_area_rect(points: np.ndarray) -> tuple[float, float, np.ndarray]:
    """Minimum-area enclosing rectangle of a 2-D point set.

    One side of the optimal rectangle is collinear with a hull edge, so every
    edge direction of the hull is tried as a caliper orientation.
    Returns ``(long_side, short_side, corners)``.
    """
    hull = convex_hull(points)
    if len(hull) == 0:
        raise ValueError("empty point set")
    if len(hull) == 1:
        return 0.0, 0.0, np.repeat(hull, 4, axis=0)
    edges = np.roll(hull, -1, axis=0) - hull
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    edges = edges[lengths > 0] / lengths[lengths > 0, None]
    normals = np.stack([-edges[:, 1], edges[:, 0]], axis=1)
    along = hull @ edges.T
    across = hull @ normals.T
    span_a = along.max(axis=0) - along.min(axis=0)
    span_n = across.max(axis=0) - across.min(axis=0)
    best = int(np.argmin(span_a * span_n))
    u, v = edges[best], normals[best]
    a0, a1 = along[:, best].min(), along[:, best].max()
    n0, n1 = across[:, best].min(), across[:, best].max()
    corners = np.array([a0 * u + n0 * v, a1 * u + n0 * v, a1 * u + n1 * v, a0 * u + n1 * v])
    sides = sorted((float(span_a[best]), float(span_n[best])), reverse=True)
    return sides[0], sides[1], corners


def _outline_corners(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Pixel-square corners that can lie on the hull: extreme columns of each row."""
    order = np.lexsort((cols, rows))
    r, c = rows[order], cols[order]
    starts = np.flatnonzero(np.r_[True, r[1:] != r[:-1]])
    ends = np.r_[starts[1:], len(r)] - 1
    rr, left, right = r[starts], c[starts], c[ends] + 1
    xs = np.concatenate([left, left, right, right])
    ys = np.concatenate([rr, rr + 1, rr, rr + 1])
    return np.stack([xs, ys], axis=1).astype(np.float64)


def pca_axes(rows: np.ndarray, cols: np.ndarray) -> tuple[float, float]:
    """Equivalent-ellipse axes from second moments (each pixel a unit square)."""
    coords = np.stack([cols, rows], axis=1).astype(np.float64)
    cov = np.cov(coords, rowvar=False, bias=True) + np.eye(2) / 12.0
    eig = np.clip(np.linalg.eigvalsh(cov), 0.0, None)
    return 4.0 * float(np.sqrt(eig[1])), 4.0 * float(np.sqrt(eig[0]))


def measure_grain(component, calibration: float, image_shape: tuple[int, int] | None = None,
                  *, component_id: int = 0, min_area_px: int = DEFAULT_MIN_GRAIN_AREA_PX,
                  axis_method: str = "minrect") -> Grain:
    """Measure one component given as flat indices (with ``image_shape``) or an (N, 2) row/col array."""
    if not calibration > 0:
        raise ValueError("calibration must be positive")
    comp = np.asarray(component)
    if comp.ndim == 2:
        rows, cols = comp[:, 0].astype(np.int64), comp[:, 1].astype(np.int64)
        if image_shape is None:
            image_shape = (int(rows.max()) + 1, int(cols.max()) + 1)
        indices = np.unique(rows * image_shape[1] + cols)
        rows, cols = indices // image_shape[1], indices % image_shape[1]
    else:
        if image_shape is None:
            raise ValueError("image_shape is required for flat indices")
        indices = np.unique(comp.astype(np.int64))
        rows, cols = indices // image_shape[1], indices % image_shape[1]
    count = int(indices.size)
    if count == 0:
        raise ValueError("empty component")
    if count < min_area_px:
        raise GrainTooSmallError(f"component has {count} px, minimum is {min_area_px}")

    long_px, short_px, corners = min_area_rect(_outline_corners(rows, cols))
    if axis_method == "pca":
        long_px, short_px = pca_axes(rows, cols)
    elif axis_method != "minrect":
        raise ValueError(f"unknown axis method {axis_method!r}")

    x0, y0 = int(cols.min()), int(rows.min())
    return Grain(
        component_id=component_id,
        bbox=(x0, y0, int(cols.max()) - x0 + 1, int(rows.max()) - y0 + 1),
        pixel_count=count,
        long_axis_mm=long_px * calibration,
        short_axis_mm=short_px * calibration,
        area_mm2=count * calibration ** 2,
        pixel_indices=indices,
        image_shape=(int(image_shape[0]), int(image_shape[1])),
        box_corners=corners,
    )


@dataclass
class Detection:
    grains: list[Grain]
    threshold: int
    mask: BinaryImage


def detect(img: GrayImage, config=None) -> Detection:
    """Binarize, drop small regions, median-filter, label and measure.

    ``config`` is any object with the PipelineConfig detection attributes;
    defaults apply for missing ones.
    """
    threshold = getattr(config, "binarize_threshold", None)
    min_grain = getattr(config, "min_grain_area_px", DEFAULT_MIN_GRAIN_AREA_PX)
    min_region = getattr(config, "min_region_area_px", None) or min_grain
    window = getattr(config, "median_window", 3)
    axis_method = getattr(config, "axis_method", "minrect")
    expected_area = getattr(config, "expected_grain_area_mm2", None)

    binary, used = binarize(img, threshold)
    cleaned = median_filter(remove_small_regions(binary, min_region), window)
    grains = []
    for comp in label_components(cleaned):
        if comp.size < min_grain:
            continue
        grain = measure_grain(comp, img.calibration_mm_per_px, img.pixels.shape,
                              component_id=len(grains), min_area_px=min_grain, axis_method=axis_method)
        if expected_area and grain.area_mm2 > OVERLAP_FACTOR * expected_area:
            grain.overlap_suspect = True
        grains.append(grain)
    return Detection(grains, used, cleaned)


def detect_grains(img: GrayImage, config=None) -> list[Grain]:
    return detect(img, config).grains
