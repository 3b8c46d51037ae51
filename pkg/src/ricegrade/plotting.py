"""Image overlays (Pillow) and report figures (matplotlib, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from PIL import Image, ImageDraw  # noqa: E402

from .segmentation import convex_hull  # noqa: E402

CLASS_COLORS = {
    "Whole": (40, 200, 60),
    "SizeableBroken": (250, 170, 20),
    "TinyBroken": (230, 40, 40),
    "Excluded": (120, 120, 255),
}

# PNG metadata off so identical inputs give identical bytes
_PNG_META = {"Software": None}


def save_annotated(analysis, path: str | Path) -> Path:
    """Grayscale image with each grain's minimum-area box and id drawn on top."""
    base = Image.fromarray(analysis.image.pixels).convert("RGB")
    draw = ImageDraw.Draw(base)
    for grain, cls in zip(analysis.grains, analysis.classes):
        color = CLASS_COLORS[cls.value if cls else "Excluded"]
        corners = [tuple(map(float, c)) for c in grain.box_corners]
        draw.polygon(corners, outline=color)
        x, y, _, _ = grain.bbox
        draw.text((x, max(0, y - 11)), str(grain.component_id), fill=color)
    base.save(path, format="PNG")
    return Path(path)


def chalk_overlay(analysis, outline: bool = True) -> Image.Image:
    """Background gray, grain white, chalky pixels black; optional hull outline of the chalk."""
    img = analysis.image
    canvas = np.full(img.pixels.shape, 128, dtype=np.uint8)
    flat = canvas.ravel()
    for grain, mask in zip(analysis.grains, analysis.chalk):
        flat[grain.pixel_indices] = 255
        flat[grain.pixel_indices[mask.mask]] = 0
    out = Image.fromarray(canvas).convert("RGB")
    if outline:
        draw = ImageDraw.Draw(out)
        width = img.width
        for grain, mask in zip(analysis.grains, analysis.chalk):
            idx = grain.pixel_indices[mask.mask]
            if idx.size < 3:
                continue
            hull = convex_hull(np.stack([idx % width, idx // width], axis=1))
            if len(hull) >= 3:
                draw.polygon([tuple(p) for p in hull.tolist()], outline=(220, 30, 30))
    return out


def save_chalk_overlay(analysis, path: str | Path, outline: bool = True) -> Path:
    chalk_overlay(analysis, outline).save(path, format="PNG")
    return Path(path)


def save_grade_summary(report, table, path: str | Path) -> Path:
    """Measured rates against every level's limits for the report's branch."""
    rows = table.rows(report.branch)
    names = ["broken", "small broken", "chalk", "admixture"]
    measured = [report.broken_rate, report.small_broken_rate, report.chalkiness, report.admixture_rate]

    fig, (ax_counts, ax_rates) = plt.subplots(1, 2, figsize=(10, 4))
    labels = list(report.class_counts)
    ax_counts.bar(labels, [report.class_counts[k] for k in labels],
                  color=[np.array(CLASS_COLORS[k]) / 255 for k in labels])
    ax_counts.set_ylabel("grains")
    ax_counts.set_title(f"{report.declared_variety}: {report.n_grains} grains")

    xs = np.arange(len(names))
    ax_rates.bar(xs, [100 * m for m in measured], width=0.5, color="0.4", label="measured")
    for row in rows:
        limits = [row.max_broken_rate, row.max_small_broken_rate, row.max_chalk_rate, row.max_admixture_rate]
        for x, lim in zip(xs, limits):
            if lim is not None:
                ax_rates.hlines(100 * lim, x - 0.35, x + 0.35, linestyles="dashed", colors=f"C{row.level}")
        ax_rates.plot([], [], "--", color=f"C{row.level}", label=f"level {row.level}")
    ax_rates.set_xticks(xs)
    ax_rates.set_xticklabels(names)
    ax_rates.set_ylabel("%")
    ax_rates.set_title(f"grade: {report.grade}")
    ax_rates.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="png", dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return Path(path)


def save_sweep_plot(rows, path: str | Path, title: str = "") -> Path:
    levels = [lvl for lvl, _ in rows]
    ratios = [100 * r for _, r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(levels, ratios, "o-", color="k")
    ax.set_xticks(levels)
    ax.set_xlabel("brightness level")
    ax.set_ylabel("chalky area (%)")
    if title:
        ax.set_title(title)
    ax.set_ylim(bottom=0)
    fig.tight_layout()
    fig.savefig(path, format="png", dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return Path(path)
