"""Command line pipeline: train, segment, analyze, classify, report."""

import filecmp
import json
import subprocess
import sys

import numpy as np
import pytest

from drt import load_volume, make_phantom, save_volume
from drt.cli import main


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """A small labeled sphere-pack dataset plus a fast pipeline config."""
    root = tmp_path_factory.mktemp("cli_data")
    gray, truth = make_phantom("sphere_pack", (24, 24, 24), seed=7,
                               n_spheres=10, radius_range=(3.0, 6.0),
                               noise_sigma=8.0)
    save_volume(gray, root / "gray.raw")
    save_volume(truth, root / "truth.raw")

    # balanced annotations in x,y,z,class_id order
    lines = ["x,y,z,class_id"]
    for class_id in (0, 1):
        zyx = np.argwhere(truth.data == class_id)
        step = max(1, len(zyx) // 80)
        for z, y, x in zyx[::step][:80]:
            lines.append(f"{x},{y},{z},{class_id}")
    (root / "labels.csv").write_text("\n".join(lines) + "\n")

    config = {
        "feature_bank": {"sigmas_vox": [1.0, 2.0]},
        "forest": {"n_trees": 8, "max_depth": 10},
        "segmentation": {"class_names": ["pore", "matrix"],
                         "pore_classes": [0]},
    }
    (root / "config.json").write_text(json.dumps(config))
    return root


@pytest.fixture(scope="module")
def trained(workdir):
    model = workdir / "model.json"
    rc = main(["train", "--volume", str(workdir / "gray.raw"),
               "--labels", str(workdir / "labels.csv"),
               "--config", str(workdir / "config.json"),
               "--out", str(model), "--seed", "0"])
    assert rc == 0
    return model


@pytest.fixture(scope="module")
def segmented(workdir, trained):
    seg = workdir / "seg.raw"
    rc = main(["segment", "--volume", str(workdir / "gray.raw"),
               "--model", str(trained), "--out", str(seg)])
    assert rc == 0
    return seg


@pytest.fixture(scope="module")
def analyzed(workdir, segmented):
    out = workdir / "analysis"
    rc = main(["analyze", "--labels", str(segmented),
               "--config", str(workdir / "config.json"), "--out", str(out)])
    assert rc == 0
    return out


class TestTrain:
    def test_writes_model(self, workdir, trained, capsys):
        doc = json.loads(trained.read_text())
        assert doc["version"] == 1
        assert doc["class_names"] == ["pore", "matrix"]
        assert len(doc["trees"]) == 8

    def test_prints_oob_and_path(self, workdir, capsys):
        out = workdir / "model_echo.json"
        main(["train", "--volume", str(workdir / "gray.raw"),
              "--labels", str(workdir / "labels.csv"),
              "--config", str(workdir / "config.json"),
              "--out", str(out)])
        printed = capsys.readouterr().out.splitlines()
        assert printed[0].startswith("oob_accuracy ")
        assert printed[1] == str(out)

    def test_same_seed_is_byte_identical(self, workdir, trained):
        again = workdir / "model_again.json"
        main(["train", "--volume", str(workdir / "gray.raw"),
              "--labels", str(workdir / "labels.csv"),
              "--config", str(workdir / "config.json"),
              "--out", str(again), "--seed", "0"])
        assert again.read_bytes() == trained.read_bytes()

    def test_seed_changes_model(self, workdir, trained):
        other = workdir / "model_seed1.json"
        main(["train", "--volume", str(workdir / "gray.raw"),
              "--labels", str(workdir / "labels.csv"),
              "--config", str(workdir / "config.json"),
              "--out", str(other), "--seed", "1"])
        assert other.read_bytes() != trained.read_bytes()

    def test_labels_beyond_named_classes(self, workdir, tmp_path):
        bad = tmp_path / "bad_labels.csv"
        bad.write_text("0,0,0,5\n1,0,0,5\n")
        rc = main(["train", "--volume", str(workdir / "gray.raw"),
                   "--labels", str(bad),
                   "--config", str(workdir / "config.json"),
                   "--out", str(tmp_path / "m.json")])
        assert rc == 2

    def test_missing_volume_is_io_error(self, workdir, tmp_path):
        rc = main(["train", "--volume", str(tmp_path / "nope.raw"),
                   "--labels", str(workdir / "labels.csv"),
                   "--out", str(tmp_path / "m.json")])
        assert rc == 4


class TestSegment:
    def test_outputs_and_accuracy(self, workdir, segmented):
        truth = load_volume(workdir / "truth.raw")
        seg = load_volume(segmented)
        assert seg.header.value_kind == "label"
        acc = float((seg.data == truth.data).mean())
        assert acc > 0.95

    def test_confidence_volume(self, workdir, segmented):
        conf = load_volume(workdir / "seg_confidence.raw")
        assert conf.header.value_kind == "grayscale"
        assert conf.data.min() >= 0.5 - 1e-6  # two classes
        assert conf.data.max() <= 1.0 + 1e-6

    def test_prints_class_counts(self, workdir, trained, capsys):
        out = workdir / "seg_echo.raw"
        main(["segment", "--volume", str(workdir / "gray.raw"),
              "--model", str(trained), "--out", str(out)])
        printed = capsys.readouterr().out.splitlines()
        assert printed[0].startswith("0 pore ")
        assert printed[1].startswith("1 matrix ")
        assert printed[2] == str(out)
        assert printed[3] == str(workdir / "seg_echo_confidence.raw")

    def test_deterministic(self, workdir, trained, segmented, tmp_path):
        again = tmp_path / "seg.raw"
        main(["segment", "--volume", str(workdir / "gray.raw"),
              "--model", str(trained), "--out", str(again)])
        assert again.read_bytes() == segmented.read_bytes()

    def test_bad_model_file(self, workdir, tmp_path):
        bad = tmp_path / "model.json"
        bad.write_text("{}")
        rc = main(["segment", "--volume", str(workdir / "gray.raw"),
                   "--model", str(bad), "--out", str(tmp_path / "s.raw")])
        assert rc == 2


class TestAnalyze:
    def test_artifacts(self, analyzed):
        for name in ("analysis.json", "throat_distribution.csv",
                     "throat_distribution.json", "pc_curve.json",
                     "pc_curve.csv"):
            assert (analyzed / name).is_file()

    def test_analysis_content(self, workdir, analyzed):
        a = json.loads((analyzed / "analysis.json").read_text())
        truth = load_volume(workdir / "seg.raw")
        assert a["source"] == "seg.raw"
        assert a["porosity"] == pytest.approx(float((truth.data == 0).mean()))
        assert a["n_components"] >= 1
        assert a["camo_class"] in ("connected", "non_connected", "micropore")
        assert a["permeability_md"] > 0
        assert a["p_cu_psi"] == pytest.approx(8.0 * a["p_cd_psi"])
        assert a["s_wi"] == 0.10
        assert a["rock_type"]["code"]
        assert a["modality"]["modality"] in ("Singular", "Dual", "Triple")

    def test_deterministic_across_directories(self, workdir, segmented, tmp_path):
        a_dir = tmp_path / "a"
        b_dir = tmp_path / "b"
        for out in (a_dir, b_dir):
            rc = main(["analyze", "--labels", str(segmented),
                       "--config", str(workdir / "config.json"),
                       "--out", str(out)])
            assert rc == 0
        match, mismatch, errors = filecmp.cmpfiles(
            a_dir, b_dir, [p.name for p in a_dir.iterdir()], shallow=False)
        assert not mismatch and not errors

    def test_no_pore_voxels_is_numeric_error(self, tmp_path):
        gray, truth = make_phantom("layered", (8, 8, 8),
                                   layer_thicknesses=(4, 4))
        solid = truth.with_data(np.ones((8, 8, 8), dtype=np.uint8))
        save_volume(solid, tmp_path / "solid.raw")
        rc = main(["analyze", "--labels", str(tmp_path / "solid.raw"),
                   "--out", str(tmp_path / "out")])
        assert rc == 3

    def test_throat_bins_follow_config(self, workdir, segmented, tmp_path):
        cfg = {"throat": {"n_bins": 5}}
        (tmp_path / "cfg.json").write_text(json.dumps(cfg))
        main(["analyze", "--labels", str(segmented),
              "--config", str(tmp_path / "cfg.json"),
              "--out", str(tmp_path / "out")])
        lines = (tmp_path / "out" / "throat_distribution.csv").read_text()
        assert len(lines.splitlines()) == 6  # header + one row per bin


class TestClassify:
    def test_direct_arguments(self, tmp_path, capsys):
        rc = main(["classify", "--k", "80", "--pcd", "50", "--pcu", "300",
                   "--swi", "0.10", "--out", str(tmp_path)])
        assert rc == 0
        printed = capsys.readouterr().out.splitlines()
        assert printed[0] == "L111"
        results = json.loads((tmp_path / "results.json").read_text())
        assert len(results) == 1
        assert results[0]["code"] == "L111"
        assert results[0]["rule_id"] == 0
        assert results[0]["decoded"]["perm_class"] == "1"

    def test_from_analysis(self, analyzed, tmp_path, capsys):
        rc = main(["classify", "--analysis", str(analyzed / "analysis.json"),
                   "--out", str(tmp_path)])
        assert rc == 0
        results = json.loads((tmp_path / "results.json").read_text())
        analysis = json.loads((analyzed / "analysis.json").read_text())
        assert results[0]["code"] == analysis["rock_type"]["code"]
        assert (tmp_path / "camo_chart.svg").is_file()
        assert (tmp_path / "camo_chart.csv").is_file()

    def test_samples_csv(self, tmp_path, capsys):
        samples = tmp_path / "samples.csv"
        samples.write_text(
            "k,p_cd,p_cu,s_wi,phi,class\n"
            "80,50,300,0.10,0.21,connected\n"
            "30,90,600,0.10,,\n"
            "0.05,50,300,0.10,0.04,micropore\n"
            "80,50,300,0.50,,\n")
        out = tmp_path / "out"
        rc = main(["classify", "--samples", str(samples), "--out", str(out)])
        assert rc == 0
        printed = capsys.readouterr().out.splitlines()
        assert printed[:4] == ["L111", "L231", "LD5", "UNCLASSIFIED"]
        results = json.loads((out / "results.json").read_text())
        assert len(results) == 4
        assert results[0]["camo"] is not None
        assert results[1]["camo"] is None
        assert results[3]["nearest_code"] == "L111"

    def test_empty_samples_file(self, tmp_path):
        samples = tmp_path / "samples.csv"
        samples.write_text("")
        rc = main(["classify", "--samples", str(samples),
                   "--out", str(tmp_path / "out")])
        assert rc == 0
        assert json.loads((tmp_path / "out" / "results.json").read_text()) == []

    def test_malformed_sample_row(self, tmp_path):
        samples = tmp_path / "samples.csv"
        samples.write_text("80,50,300,0.10\n80,50,300\n")
        rc = main(["classify", "--samples", str(samples),
                   "--out", str(tmp_path / "out")])
        assert rc == 2

    def test_requires_exactly_one_source(self, analyzed, tmp_path):
        rc = main(["classify", "--analysis", str(analyzed / "analysis.json"),
                   "--k", "80", "--pcd", "50", "--pcu", "300", "--swi", "0.1",
                   "--out", str(tmp_path)])
        assert rc == 2
        rc = main(["classify", "--out", str(tmp_path)])
        assert rc == 2

    def test_partial_direct_arguments(self, tmp_path):
        rc = main(["classify", "--k", "80", "--out", str(tmp_path)])
        assert rc == 2

    def test_custom_catalog(self, tmp_path):
        catalog = [{"code": "L199", "k_min": 1.0}]
        path = tmp_path / "catalog.json"
        path.write_text(json.dumps(catalog))
        rc = main(["classify", "--k", "80", "--pcd", "50", "--pcu", "300",
                   "--swi", "0.10", "--catalog", str(path),
                   "--out", str(tmp_path / "out")])
        assert rc == 0
        results = json.loads((tmp_path / "out" / "results.json").read_text())
        assert results[0]["code"] == "L199"


class TestReport:
    def test_writes_markdown(self, analyzed, capsys):
        rc = main(["report", "--run", str(analyzed)])
        assert rc == 0
        report = (analyzed / "report.md").read_text()
        analysis = json.loads((analyzed / "analysis.json").read_text())
        assert report.startswith("# Digital rock typing report")
        assert "Source: `seg.raw`" in report
        assert f"- Code: {analysis['rock_type']['code']}" in report
        assert "- P_cd:" in report and "- S_wi:" in report
        assert "- CAMO check:" in report

    def test_separate_output_directory(self, analyzed, tmp_path):
        rc = main(["report", "--run", str(analyzed), "--out", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "report.md").is_file()

    def test_missing_artifacts(self, tmp_path):
        rc = main(["report", "--run", str(tmp_path)])
        assert rc == 4


class TestCommonFlags:
    def test_threads_must_be_positive(self, workdir, tmp_path):
        rc = main(["analyze", "--labels", str(workdir / "truth.raw"),
                   "--out", str(tmp_path / "out"), "--threads", "0"])
        assert rc == 2

    def test_thread_count_does_not_change_output(self, workdir, segmented,
                                                 tmp_path):
        dirs = []
        for threads in ("1", "4"):
            out = tmp_path / f"t{threads}"
            main(["analyze", "--labels", str(segmented),
                  "--config", str(workdir / "config.json"),
                  "--out", str(out), "--threads", threads])
            dirs.append(out)
        names = [p.name for p in dirs[0].iterdir()]
        match, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], names,
                                                   shallow=False)
        assert not mismatch and not errors

    def test_unknown_config_section(self, workdir, tmp_path):
        (tmp_path / "cfg.json").write_text(json.dumps({"mystery": {}}))
        rc = main(["analyze", "--labels", str(workdir / "truth.raw"),
                   "--config", str(tmp_path / "cfg.json"),
                   "--out", str(tmp_path / "out")])
        assert rc == 2

    def test_unknown_config_key(self, workdir, tmp_path):
        cfg = {"throat": {"bins": 5}}
        (tmp_path / "cfg.json").write_text(json.dumps(cfg))
        rc = main(["analyze", "--labels", str(workdir / "truth.raw"),
                   "--config", str(tmp_path / "cfg.json"),
                   "--out", str(tmp_path / "out")])
        assert rc == 2

    def test_invalid_config_json(self, workdir, tmp_path):
        (tmp_path / "cfg.json").write_text("{oops")
        rc = main(["analyze", "--labels", str(workdir / "truth.raw"),
                   "--config", str(tmp_path / "cfg.json"),
                   "--out", str(tmp_path / "out")])
        assert rc == 2


class TestConsoleScript:
    def test_help_runs(self):
        proc = subprocess.run([sys.executable, "-m", "drt.cli", "--help"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "train" in proc.stdout
        assert "classify" in proc.stdout
