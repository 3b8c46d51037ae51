import json

import numpy as np
import pytest
from click.testing import CliRunner

from ricegrade.attention import Tensor4
from ricegrade.cli import main
from ricegrade.config import PipelineConfig
from ricegrade.grading import OFF_GRADE, assign_grade
from ricegrade.imgproc import save_png
from ricegrade.pipeline import (
    PipelineError,
    analyze_image,
    cmd_analyze,
    cmd_grade,
    cmd_sweep,
    ingest_dataset,
)
from ricegrade.synthetic import batch_image


@pytest.fixture
def batch_dir(tmp_path):
    d = tmp_path / "imgs"
    d.mkdir()
    for i in range(3):
        save_png(batch_image("GD", n_whole=5, n_sizeable=1, n_tiny=1, chalk_fraction=0.35, seed=i), d / f"s{i}.png")
    return d


@pytest.fixture
def whole_dir(tmp_path):
    d = tmp_path / "whole"
    d.mkdir()
    for i in range(2):
        save_png(batch_image("GD", n_whole=8, n_sizeable=0, n_tiny=0, seed=10 + i), d / f"w{i}.png")
    return d


def test_analyze_outputs(batch_dir, config, tmp_path):
    res = cmd_analyze(batch_dir, config, tmp_path / "a")
    assert res.exit_code == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert [n for n in names if n.endswith(".json") and n != "manifest.json"] == ["s0.json", "s1.json", "s2.json"]
    assert sum(n.endswith("_annotated.png") for n in names) == 3
    assert sum(n.endswith("_chalk.png") for n in names) == 3
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert len(manifest["inputs"]) == 3 and all(len(i["sha256"]) == 64 for i in manifest["inputs"])
    report = json.loads((tmp_path / "a" / "s0.json").read_text())
    assert report["n_grains"] == 7
    assert report["config"] == config.to_dict()
    classes = [g["completeness"] for g in report["grains"]]
    assert classes.count("Whole") == 5 and classes.count("SizeableBroken") == 1 and classes.count("TinyBroken") == 1


def test_analyze_deterministic(batch_dir, config, tmp_path):
    cmd_analyze(batch_dir, config, tmp_path / "a")
    cmd_analyze(batch_dir, config, tmp_path / "b")
    for name in ("s0.json", "s1.json", "s2.json", "s0_chalk.png", "s0_annotated.png"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_worker_pool_does_not_change_results(batch_dir, config, tmp_path):
    cmd_analyze(batch_dir, config, tmp_path / "a")
    cmd_analyze(batch_dir, config.replace(workers=3), tmp_path / "b")
    for name in ("s0.json", "s1.json", "s2.json"):
        a = json.loads((tmp_path / "a" / name).read_text())
        b = json.loads((tmp_path / "b" / name).read_text())
        assert a["grains"] == b["grains"]


def test_zero_grain_image(tmp_path, config):
    save_png(np.full((60, 60), 20, dtype=np.uint8), tmp_path / "blank.png")
    res = cmd_analyze(tmp_path / "blank.png", config, tmp_path / "o")
    assert res.exit_code == 0
    assert json.loads((tmp_path / "o" / "blank.json").read_text())["n_grains"] == 0


def test_unreadable_file_is_partial(batch_dir, config, tmp_path):
    (batch_dir / "broken.png").write_bytes(b"not a png")
    res = cmd_analyze(batch_dir, config, tmp_path / "o")
    assert res.exit_code == 1
    assert [e["input"] for e in res.errors] == ["broken.png"]
    assert len(res.manifest["reports"]) == 3


def test_empty_directory(tmp_path, config):
    (tmp_path / "empty").mkdir()
    with pytest.raises(PipelineError):
        cmd_analyze(tmp_path / "empty", config)
    result = CliRunner().invoke(main, ["analyze", str(tmp_path / "empty"), "--out", str(tmp_path / "o")])
    assert result.exit_code == 2


def test_grade_pure_whole_batch_is_level_one(whole_dir, config, tmp_path):
    res = cmd_grade(whole_dir, config, tmp_path / "g")
    r = res.report
    assert r["class_counts"] == {"Whole": 16, "SizeableBroken": 0, "TinyBroken": 0}
    assert (r["small_broken_rate"], r["broken_rate"], r["chalkiness"], r["admixture_rate"]) == (0, 0, 0, 0)
    assert r["grade"] == 1
    assert (tmp_path / "g" / "sample_report.csv").read_text().startswith("declared_variety,")
    assert (tmp_path / "g" / "sample_summary.png").exists()


def test_grade_wrong_declared_variety_is_off_grade(whole_dir, config, tmp_path):
    r = cmd_grade(whole_dir, config.replace(declared_variety="PJX"), tmp_path / "g").report
    assert r["admixture_rate"] == 1.0 and r["grade"] == OFF_GRADE


def test_grade_consistent_with_table(batch_dir, config, tmp_path):
    r = cmd_grade(batch_dir, config, tmp_path / "g").report
    assert r["n_grains"] == sum(r["class_counts"].values()) == 21
    assert 0 < r["small_broken_rate"] < r["broken_rate"] < 1
    assert r["chalkiness"] > 0
    assert r["grade"] == assign_grade(r["branch"], r["small_broken_rate"], r["broken_rate"],
                                      r["chalkiness"], r["admixture_rate"])
    assert r["mass_basis"] == "AreaProxy"


def test_grade_no_grains(tmp_path, config):
    save_png(np.full((60, 60), 20, dtype=np.uint8), tmp_path / "blank.png")
    result = CliRunner().invoke(main, ["grade", str(tmp_path / "blank.png"), "--out", str(tmp_path / "o")])
    assert result.exit_code == 2 and "no grains" in result.output


def test_sweep(batch_dir, config, tmp_path):
    image = batch_dir / "s0.png"
    res = cmd_sweep(image, 0, config, tmp_path / "sw")
    rows = res.report["rows"]
    assert [lvl for lvl, _ in rows] == [1, 2, 3, 4, 5]
    analysis = analyze_image(image, config)
    assert rows[0][1] == analysis.chalk[0].ratio
    assert res.report["monotone"]
    assert (tmp_path / "sw" / "s0_grain0_sweep.png").exists()


def test_sweep_missing_grain(batch_dir, tmp_path):
    result = CliRunner().invoke(main, ["sweep", str(batch_dir / "s0.png"), "99", "--out", str(tmp_path / "o")])
    assert result.exit_code == 2 and "grain 99 not found" in result.output


def test_cli_analyze_and_grade(batch_dir, tmp_path):
    runner = CliRunner()
    cfg = tmp_path / "run.cfg"
    PipelineConfig(calibration_mm_per_px=0.05).save(cfg)
    r = runner.invoke(main, ["analyze", str(batch_dir), "--config", str(cfg), "--seed", "3",
                             "--out", str(tmp_path / "a"), "--no-annotate"])
    assert r.exit_code == 0, r.output
    assert not list((tmp_path / "a").glob("*.png"))
    r = runner.invoke(main, ["grade", str(batch_dir), "--variety", "GD", "--calibration", "0.05",
                             "--out", str(tmp_path / "g")])
    assert r.exit_code == 0, r.output
    assert "grade" in r.output


def test_cli_attn(tmp_path):
    runner = CliRunner()
    Tensor4(np.full((1, 2, 3, 3), 2.0)).save(tmp_path / "c.json")
    r = runner.invoke(main, ["attn", "simam", str(tmp_path / "c.json"), "-o", str(tmp_path / "c_out.json")])
    assert r.exit_code == 0, r.output
    out = Tensor4.load(tmp_path / "c_out.json")
    assert out.shape == (1, 2, 3, 3)
    assert np.allclose(out.data, 2.0 / (1.0 + np.exp(-0.5)), atol=1e-12)
    assert json.loads(r.output)["added_parameters"] == 0

    Tensor4(np.zeros((1, 8, 2, 2))).save(tmp_path / "z.json")
    r = runner.invoke(main, ["attn", "eca", str(tmp_path / "z.json")])
    assert r.exit_code == 0, r.output
    assert (Tensor4.load(tmp_path / "z_eca.json").data == 0).all()
    assert json.loads(r.output)["added_parameters"] == 3


@pytest.mark.parametrize("payload", ['{"shape": [1,1,2,2], "data": [1,2,3]}', '{"shape": [1,1,2,2], "data": [1,'])
def test_cli_attn_malformed(tmp_path, payload):
    (tmp_path / "bad.json").write_text(payload)
    r = CliRunner().invoke(main, ["attn", "simam", str(tmp_path / "bad.json")])
    assert r.exit_code == 2 and "error:" in r.output


def test_ingest(tmp_path):
    root = tmp_path / "ds"
    for sub in ("GD", "NM", "XX"):
        (root / sub).mkdir(parents=True)
        for name in ("a_whole.png", "b-tiny-03.png"):
            save_png(np.zeros((4, 4), dtype=np.uint8), root / sub / name)
    entries = ingest_dataset(root)
    assert len(entries) == 6
    assert sorted({e.variety for e in entries if e.variety}) == ["GD", "NM"]
    assert [e.variety for e in entries if e.path.startswith("XX/")] == [None, None]
    assert {e.completeness for e in entries} == {"Whole", "TinyBroken"}


def test_ingest_empty_and_missing(tmp_path):
    (tmp_path / "empty").mkdir()
    assert ingest_dataset(tmp_path / "empty") == []
    runner = CliRunner()
    r = runner.invoke(main, ["ingest", str(tmp_path / "empty")])
    assert r.exit_code == 0 and "warning" in r.output
    r = runner.invoke(main, ["ingest", str(tmp_path / "nope")])
    assert r.exit_code == 2


def test_ingest_cli_catalogue_file(tmp_path):
    root = tmp_path / "ds"
    for sub in ("GD", "NM"):
        (root / sub).mkdir(parents=True)
        for i in range(2):
            save_png(np.zeros((4, 4), dtype=np.uint8), root / sub / f"{i}.png")
    r = CliRunner().invoke(main, ["ingest", str(root), "--out", str(tmp_path / "cat.json")])
    assert r.exit_code == 0 and "4 entries, labels: GD, NM" in r.output
    assert len(json.loads((tmp_path / "cat.json").read_text())) == 4
