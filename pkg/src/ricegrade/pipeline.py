"""Batch orchestration: per-image analysis, sample grading, brightness sweeps
and dataset cataloguing. Every function here is deterministic for a fixed
config; output ordering follows sorted input paths."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .chalk import ChalkMask, chalkiness, is_non_decreasing, luminance_sweep, segment_chalk
from .config import PipelineConfig
from .grading import (
    MASS_AREA_PROXY,
    SampleReport,
    admixture_rate,
    assign_grade,
    broken_rates,
    classify_completeness,
    classify_variety,
    compute_batch_avg_whole_length,
)
from .imgproc import GrayImage, adjust_brightness, contrast_stretch, load_gray
from .segmentation import Detection, Grain, detect
from .varieties import DEFAULT_STANDARDS, CompletenessClass, StandardsTable, VarietyCode

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".pgm", ".ppm", ".pnm", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}

EXIT_OK, EXIT_PARTIAL, EXIT_FAILURE = 0, 1, 2

EXCLUDED = "Excluded"


class PipelineError(Exception):
    """Failure that aborts a whole command (exit code 2)."""


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def list_images(target: str | Path) -> list[Path]:
    target = Path(target)
    if target.is_file():
        return [target]
    if not target.is_dir():
        raise PipelineError(f"no such file or directory: {target}")
    return sorted(p for p in target.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def prepare(img: GrayImage, config: PipelineConfig) -> GrayImage:
    """Contrast remap followed by the configured brightness level."""
    return adjust_brightness(contrast_stretch(img), config.brightness_level, config.brightness_gains)


def load_standards(config: PipelineConfig) -> StandardsTable:
    if config.standards_path:
        return StandardsTable.load(config.standards_path)
    return DEFAULT_STANDARDS


@dataclass
class ImageAnalysis:
    path: Path
    image: GrayImage  # after contrast remap and brightness
    detection: Detection
    chalk: list[ChalkMask]
    batch_avg_whole_length_mm: float | None
    classes: list[CompletenessClass | None]
    varieties: list[tuple[VarietyCode, float]]
    sha256: str = ""

    @property
    def grains(self) -> list[Grain]:
        return self.detection.grains


def _chalk_kwargs(config: PipelineConfig) -> dict:
    return {"rho": config.chalk_rho, "eps": config.chalk_eps, "max_iter": config.chalk_max_iter,
            "seed": config.seed}


def analyze_image(path: str | Path, config: PipelineConfig) -> ImageAnalysis:
    path = Path(path)
    raw = load_gray(path, config.calibration_mm_per_px)
    img = prepare(raw, config)
    det = detect(img, config)
    chalk = [segment_chalk(g, img, k=config.chalk_k, **_chalk_kwargs(config)) for g in det.grains]
    if det.grains:
        avg = compute_batch_avg_whole_length(det.grains, config.variety)
        classes = [classify_completeness(g, avg) for g in det.grains]
    else:
        avg, classes = None, []
    varieties = [classify_variety(g) for g in det.grains]
    return ImageAnalysis(path, img, det, chalk, avg, classes, varieties, sha256_file(path))


def image_report(a: ImageAnalysis, config: PipelineConfig) -> dict:
    grains = []
    for g, mask, cls, (code, dist) in zip(a.grains, a.chalk, a.classes, a.varieties):
        entry = g.to_dict()
        entry.update({
            "completeness": cls.value if cls else EXCLUDED,
            "chalk_ratio": mask.ratio,
            "chalk_threshold": mask.threshold,
            "chalky_px": mask.chalky_px,
            "variety": code.value,
            "variety_distance": dist,
        })
        grains.append(entry)
    return {
        "image": a.path.name,
        "sha256": a.sha256,
        "width": a.image.width,
        "height": a.image.height,
        "binarize_threshold": a.detection.threshold,
        "n_grains": len(a.grains),
        "batch_avg_whole_length_mm": a.batch_avg_whole_length_mm,
        "grains": grains,
        "config": config.to_dict(),
        "tool_version": __version__,
    }


@dataclass
class RunResult:
    exit_code: int
    manifest: dict = field(default_factory=dict)
    errors: list[dict] = field(default_factory=list)
    outputs: list[Path] = field(default_factory=list)
    report: dict | None = None


def _analyze_all(paths: list[Path], config: PipelineConfig):
    """Analyze images on a bounded worker pool; results come back in input order."""

    def one(path):
        try:
            return analyze_image(path, config), None
        except Exception as exc:  # per-file failures are reported, not raised
            log.warning("failed to analyze %s: %s", path, exc)
            return None, {"input": path.name, "error": f"{type(exc).__name__}: {exc}"}

    workers = config.effective_workers()
    if workers == 1 or len(paths) <= 1:
        return [one(p) for p in paths]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, paths))


def _exit_code(n_inputs: int, n_errors: int) -> int:
    if n_errors == 0:
        return EXIT_OK
    return EXIT_FAILURE if n_errors >= n_inputs else EXIT_PARTIAL


def _manifest(config, paths, results, report_paths, started) -> dict:
    inputs = []
    for p, (analysis, _) in zip(paths, results):
        digest = analysis.sha256 if analysis else (sha256_file(p) if p.is_file() else None)
        inputs.append({"path": str(p), "sha256": digest})
    return {
        "tool_version": __version__,
        "config": config.to_dict(),
        "inputs": inputs,
        "reports": [str(r) for r in report_paths],
        "elapsed_s": round(time.perf_counter() - started, 6),
    }


def cmd_analyze(target, config: PipelineConfig, out_dir=None, annotate: bool = True) -> RunResult:
    from . import plotting

    started = time.perf_counter()
    paths = list_images(target)
    if not paths:
        raise PipelineError(f"no images found in {target}")
    out = Path(out_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = _analyze_all(paths, config)

    outputs, errors, reports = [], [], []
    for path, (analysis, err) in zip(paths, results):
        if err:
            errors.append(err)
            continue
        report_path = out / f"{path.stem}.json"
        report_path.write_text(dumps_json(image_report(analysis, config)), encoding="utf-8")
        reports.append(report_path)
        outputs.append(report_path)
        if annotate:
            outputs.append(plotting.save_annotated(analysis, out / f"{path.stem}_annotated.png"))
            outputs.append(plotting.save_chalk_overlay(analysis, out / f"{path.stem}_chalk.png"))

    manifest = _manifest(config, paths, results, reports, started)
    manifest["errors"] = errors
    (out / "manifest.json").write_text(dumps_json(manifest), encoding="utf-8")
    return RunResult(_exit_code(len(paths), len(errors)), manifest, errors, outputs)


def grade_sample(analyses: list[ImageAnalysis], config: PipelineConfig, masses=None,
                 table: StandardsTable | None = None) -> SampleReport:
    """Pool the grains of several images into one graded sample."""
    grains: list[Grain] = []
    chalk: list[ChalkMask] = []
    for a in analyses:
        grains.extend(a.grains)
        chalk.extend(a.chalk)
    if not grains:
        raise PipelineError("no grains detected across the inputs")
    variety = config.variety
    avg = compute_batch_avg_whole_length(grains, variety)
    classes = [classify_completeness(g, avg) for g in grains]
    kept = [i for i, c in enumerate(classes) if c is not None]
    if not kept:
        raise PipelineError("every detected particle is below the 1.0 mm sieve")
    classified = [(grains[i], classes[i]) for i in kept]
    kept_masses = None if masses is None else [masses[i] for i in kept]
    x1, x2 = broken_rates(classified, kept_masses)

    whole = [i for i in kept if classes[i] is CompletenessClass.WHOLE]
    if whole:
        chalk_stats = chalkiness([chalk[i] for i in whole], config.chalky_grain_min_ratio)
        d = chalk_stats.chalkiness
        detail = chalk_stats.to_dict()
        admixture = admixture_rate([grains[i] for i in whole], variety.code)
    else:
        log.warning("no whole grains: chalkiness set to 0, admixture measured on broken grains")
        d, detail = 0.0, {"W_D": 0.0, "n1": 0, "n0": 0, "D": 0.0}
        admixture = admixture_rate([grains[i] for i in kept], variety.code)

    counts = {c.value: 0 for c in CompletenessClass}
    for i in kept:
        counts[classes[i].value] += 1
    grade = assign_grade(variety.branch, x1, x2, d, admixture, table)
    return SampleReport(
        declared_variety=variety.code.value,
        n_grains=len(kept),
        class_counts=counts,
        small_broken_rate=x1,
        broken_rate=x2,
        chalkiness=d,
        admixture_rate=admixture,
        grade=grade,
        mass_basis="MeasuredMass" if masses is not None else MASS_AREA_PROXY,
        branch=variety.branch.value,
        batch_avg_whole_length_mm=avg,
        chalk_detail=detail,
    )


def report_csv(report: SampleReport) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SampleReport.CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerow(report.csv_row())
    return buf.getvalue()


def cmd_grade(target, config: PipelineConfig, out_dir=None, figures: bool = True) -> RunResult:
    from . import plotting

    started = time.perf_counter()
    paths = list_images(target)
    if not paths:
        raise PipelineError(f"no images found in {target}")
    out = Path(out_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = _analyze_all(paths, config)
    errors = [err for _, err in results if err]
    analyses = [a for a, _ in results if a is not None]
    table = load_standards(config)
    report = grade_sample(analyses, config, table=table)

    payload = report.to_dict()
    payload["inputs"] = [{"image": a.path.name, "sha256": a.sha256, "n_detected": len(a.grains)}
                         for a in analyses]
    payload["n_excluded_fragments"] = sum(c is None for a in analyses for c in a.classes)
    payload["config"] = config.to_dict()
    payload["tool_version"] = __version__
    json_path = out / "sample_report.json"
    csv_path = out / "sample_report.csv"
    json_path.write_text(dumps_json(payload), encoding="utf-8")
    csv_path.write_text(report_csv(report), encoding="utf-8")
    outputs = [json_path, csv_path]
    if figures:
        outputs.append(plotting.save_grade_summary(report, table, out / "sample_summary.png"))

    manifest = _manifest(config, paths, results, [json_path], started)
    manifest["errors"] = errors
    (out / "manifest.json").write_text(dumps_json(manifest), encoding="utf-8")
    return RunResult(_exit_code(len(paths), len(errors)), manifest, errors, outputs, payload)


def cmd_sweep(image, grain_id: int, config: PipelineConfig, out_dir=None, figures: bool = True) -> RunResult:
    """Chalk ratio of one grain across all brightness levels, threshold frozen at level 1."""
    from . import plotting

    base_config = config.replace(brightness_level=1)
    analysis = analyze_image(image, base_config)
    matches = [g for g in analysis.grains if g.component_id == grain_id]
    if not matches:
        raise PipelineError(f"grain {grain_id} not found in {image} ({len(analysis.grains)} grains)")
    rows = luminance_sweep(analysis.image, matches[0], gains=config.brightness_gains, **_chalk_kwargs(config))
    monotone = is_non_decreasing(r for _, r in rows)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["level", "chalk_ratio"])
    for level, ratio in rows:
        writer.writerow([level, repr(ratio)])
    writer.writerow(["monotone", "yes" if monotone else "no"])

    out = Path(out_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{Path(image).stem}_grain{grain_id}_sweep"
    csv_path = out / f"{stem}.csv"
    csv_path.write_text(buf.getvalue(), encoding="utf-8")
    outputs = [csv_path]
    if figures:
        outputs.append(plotting.save_sweep_plot(rows, out / f"{stem}.png", title=f"{Path(image).name} grain {grain_id}"))
    return RunResult(EXIT_OK, outputs=outputs, report={"rows": rows, "monotone": monotone, "csv": buf.getvalue()})


@dataclass(frozen=True)
class CatalogEntry:
    path: str
    variety: str | None
    completeness: str | None


def completeness_from_name(name: str, tokens: dict[str, str]) -> str | None:
    parts = [p for p in Path(name).stem.lower().replace("-", "_").split("_") if p]
    for part in parts:
        if part in tokens:
            return tokens[part]
    return None


def ingest_dataset(root, config: PipelineConfig | None = None) -> list[CatalogEntry]:
    """Catalogue a variety-per-subdirectory image tree.

    Subdirectory names that are not known variety codes, and files directly
    under ``root``, are catalogued with no variety label.
    """
    config = config or PipelineConfig()
    root = Path(root)
    if not root.is_dir():
        raise PipelineError(f"dataset root not found: {root}")
    known = {c.value for c in VarietyCode}
    entries = []
    for path in sorted(p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES):
        rel = path.relative_to(root)
        label = rel.parts[0] if len(rel.parts) > 1 else None
        variety = label if label in known else None
        entries.append(CatalogEntry(rel.as_posix(), variety, completeness_from_name(path.name, config.completeness_tokens)))
    if not entries:
        log.warning("dataset root %s contains no images", root)
    return entries


def catalog_csv(entries: list[CatalogEntry]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["path", "variety", "completeness"])
    for e in entries:
        writer.writerow([e.path, e.variety or "", e.completeness or ""])
    return buf.getvalue()
