"""Command-line interface: ``ricegrade analyze|grade|sweep|attn|ingest``.

Exit codes: 0 when every input succeeded, 1 when some inputs failed, 2 when
the command could not produce its output at all.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click

from . import __version__
from .attention import (
    SIMAM_PARAMETER_COUNT,
    EcaParams,
    SimamParams,
    Tensor4,
    TensorFormatError,
    eca,
    eca_parameter_count,
    simam,
)
from .config import ConfigError, PipelineConfig
from .pipeline import (
    EXIT_FAILURE,
    PipelineError,
    catalog_csv,
    cmd_analyze,
    cmd_grade,
    cmd_sweep,
    dumps_json,
    ingest_dataset,
)


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_FAILURE)


def pipeline_options(func):
    @click.option("--config", "config_path", type=click.Path(dir_okay=False), help="key = value config file")
    @click.option("--calibration", type=float, help="millimetres per pixel")
    @click.option("--variety", help="declared variety code (GD, NM, WC, PJX, WN, YB)")
    @click.option("--seed", type=int, help="K-means seed")
    @click.option("--out", "out_dir", type=click.Path(file_okay=False), help="output directory")
    @functools.wraps(func)
    def wrapper(config_path, calibration, variety, seed, out_dir, **kwargs):
        try:
            config = PipelineConfig.load(config_path) if config_path else PipelineConfig()
            config = config.replace(calibration_mm_per_px=calibration, declared_variety=variety,
                                    seed=seed, output_dir=out_dir)
        except (OSError, ConfigError) as exc:
            _fail(str(exc))
        return func(config=config, **kwargs)

    return wrapper


@click.group()
@click.version_option(__version__, prog_name="ricegrade")
@click.option("-v", "--verbose", is_flag=True, help="log progress to stderr")
def main(verbose):
    """Rice grain image analysis and grading."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("target", type=click.Path())
@click.option("--annotate/--no-annotate", default=True, help="write box and chalk overlay PNGs")
@pipeline_options
def analyze(target, annotate, config):
    """Per-image grain reports for an image file or directory."""
    try:
        result = cmd_analyze(target, config, annotate=annotate)
    except PipelineError as exc:
        _fail(str(exc))
    for err in result.errors:
        click.echo(f"error: {err['input']}: {err['error']}", err=True)
    click.echo(f"{len(result.manifest['reports'])} report(s) written to {config.output_dir}")
    sys.exit(result.exit_code)


@main.command()
@click.argument("target", type=click.Path())
@click.option("--annotate/--no-annotate", default=True, help="write the summary figure")
@pipeline_options
def grade(target, annotate, config):
    """Pool all grains under TARGET into one graded sample."""
    try:
        result = cmd_grade(target, config, figures=annotate)
    except PipelineError as exc:
        _fail(str(exc))
    for err in result.errors:
        click.echo(f"error: {err['input']}: {err['error']}", err=True)
    r = result.report
    click.echo(f"{r['declared_variety']} ({r['branch']}): {r['n_grains']} grains, "
               f"broken {100 * r['broken_rate']:.2f}%, small broken {100 * r['small_broken_rate']:.2f}%, "
               f"chalkiness {100 * r['chalkiness']:.2f}%, admixture {100 * r['admixture_rate']:.2f}% "
               f"-> grade {r['grade']}")
    sys.exit(result.exit_code)


@main.command()
@click.argument("image", type=click.Path(exists=True, dir_okay=False))
@click.argument("grain_id", type=int)
@click.option("--annotate/--no-annotate", default=True, help="write the sweep figure")
@pipeline_options
def sweep(image, grain_id, annotate, config):
    """Chalk ratio of GRAIN_ID at each brightness level."""
    try:
        result = cmd_sweep(image, grain_id, config, figures=annotate)
    except PipelineError as exc:
        _fail(str(exc))
    click.echo(result.report["csv"], nl=False)
    sys.exit(result.exit_code)


@main.command()
@click.argument("kind", type=click.Choice(["simam", "eca"]))
@click.argument("tensor_file", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", type=click.Path(dir_okay=False), help="output tensor file")
@click.option("--lambda", "lam", type=float, default=1e-4, show_default=True, help="SimAM regulariser")
@click.option("--gamma", type=float, default=2.0, show_default=True, help="ECA kernel-size gamma")
@click.option("--b", "b", type=float, default=1.0, show_default=True, help="ECA kernel-size offset")
@click.option("--kernel", type=int, help="ECA kernel size override (odd)")
@click.option("--weights", help="ECA kernel weights, comma separated")
def attn(kind, tensor_file, output, lam, gamma, b, kernel, weights):
    """Run SimAM or ECA on a JSON tensor file {shape, data}."""
    try:
        x = Tensor4.load(tensor_file)
        if kind == "simam":
            y = simam(x, SimamParams(lam))
            added = SIMAM_PARAMETER_COUNT
        else:
            w = tuple(float(v) for v in weights.split(",")) if weights else None
            params = EcaParams(gamma, b, kernel, w)
            y = eca(x, params)
            added = eca_parameter_count(x.shape[1], params)
    except (TensorFormatError, ValueError) as exc:
        _fail(str(exc))
    output = output or str(Path(tensor_file).with_name(f"{Path(tensor_file).stem}_{kind}.json"))
    y.save(output)
    stats = {"kind": kind, "shape": list(y.shape), "added_parameters": added,
             "min": float(y.data.min()), "max": float(y.data.max()), "mean": float(y.data.mean()),
             "output": output}
    click.echo(json.dumps(stats, sort_keys=True))


@main.command()
@click.argument("root", type=click.Path())
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="key = value config file")
@click.option("--out", "out_file", type=click.Path(dir_okay=False), help="write the catalogue (.csv or .json)")
def ingest(root, config_path, out_file):
    """Catalogue a variety-per-subdirectory dataset tree."""
    try:
        config = PipelineConfig.load(config_path) if config_path else PipelineConfig()
        entries = ingest_dataset(root, config)
    except (OSError, ConfigError, PipelineError) as exc:
        _fail(str(exc))
    if not entries:
        click.echo(f"warning: no images under {root}", err=True)
    if out_file and out_file.endswith(".json"):
        text = dumps_json([e.__dict__ for e in entries])
    else:
        text = catalog_csv(entries)
    if out_file:
        Path(out_file).write_text(text, encoding="utf-8")
        labels = sorted({e.variety for e in entries if e.variety})
        click.echo(f"{len(entries)} entries, labels: {', '.join(labels) or 'none'}")
    else:
        click.echo(text, nl=False)


if __name__ == "__main__":
    main()
