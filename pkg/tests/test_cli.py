import os
import json

import numba
import numpy as np
import pytest

from gsclosure.cli import main
from gsclosure.splat_io import write_splat_ply_file, read_splat_ply
from gsclosure.surface import SurfaceElements

from conftest import make_scene


@pytest.fixture
def scene_dir(tmp_path):
    out = str(tmp_path / "scene")
    assert main(["synth", "--objects", "2", "--fragments", "1",
                 "--elements-per-object", "500", "--seed", "3",
                 "--out", out, "--quiet"]) == 0
    return out


@pytest.fixture
def splat_file(tmp_path):
    path = str(tmp_path / "scene.ply")
    means = np.array([[0., 0., 0.], [1., 0., 0.], [0., 1., 0.]])
    write_splat_ply_file(make_scene(means, opacity_logits=[0., -3., 2.]),
                         path)
    return path


def test_unknown_subcommand(capsys):
    assert main(["transmogrify"]) == 1
    assert capsys.readouterr().err.startswith("error: 1 UsageError")


def test_missing_required_flag(capsys):
    assert main(["eval", "--dets", "x.json"]) == 1


def test_missing_file(tmp_path, capsys):
    code = main(["inspect", "--splat", str(tmp_path / "absent.ply")])
    assert code == 2
    assert "FileNotFoundError" in capsys.readouterr().err


def test_bad_data(tmp_path, capsys):
    path = tmp_path / "boxes.json"
    path.write_text("{")
    elements = tmp_path / "elements.csv"
    elements.write_text(SurfaceElements.empty().to_csv())

    code = main(["flux", "--elements", str(elements), "--boxes", str(path)])
    assert code == 3
    err = capsys.readouterr().err
    assert err.startswith("error: 3 SchemaError")
    assert len(err.strip().splitlines()) == 1


def test_bad_config_value(scene_dir):
    code = main(["score", "--elements",
                 os.path.join(scene_dir, "elements.csv"),
                 "--boxes", os.path.join(scene_dir, "gt_boxes.json"),
                 "--gamma", "3"])
    assert code == 1


@pytest.mark.parametrize("threads", ["0", "100000"])
def test_threads_out_of_range(scene_dir, capsys, threads):
    capsys.readouterr()
    code = main(["flux", "--elements",
                 os.path.join(scene_dir, "elements.csv"),
                 "--boxes", os.path.join(scene_dir, "gt_boxes.json"),
                 "--threads", threads])

    assert code == 1
    assert "--threads" in capsys.readouterr().err


def test_threads_in_range(scene_dir):
    try:
        assert main(["flux", "--elements",
                     os.path.join(scene_dir, "elements.csv"),
                     "--boxes", os.path.join(scene_dir, "gt_boxes.json"),
                     "--threads", "1", "--quiet"]) == 0
        assert numba.get_num_threads() == 1
    finally:
        numba.set_num_threads(numba.config.NUMBA_NUM_THREADS)


def test_synth_is_deterministic(tmp_path, scene_dir):
    again = str(tmp_path / "again")
    assert main(["synth", "--objects", "2", "--fragments", "1",
                 "--elements-per-object", "500", "--seed", "3",
                 "--out", again, "--quiet"]) == 0

    for name in sorted(os.listdir(scene_dir)):
        with open(os.path.join(scene_dir, name)) as a, \
                open(os.path.join(again, name)) as b:
            assert a.read() == b.read()


def test_flux_reports(scene_dir, capsys):
    capsys.readouterr()
    assert main(["flux", "--elements",
                 os.path.join(scene_dir, "elements.csv"),
                 "--boxes", os.path.join(scene_dir, "gt_boxes.json")]) == 0

    records = json.loads(capsys.readouterr().out)
    assert len(records) == 2
    for record in records:
        assert {"center", "size", "yaw", "flux", "normalized_flux",
                "closure_score", "enclosed_count"} <= set(record)
        assert record["normalized_flux"] < 0.05


def test_score_then_eval(scene_dir, tmp_path, capsys):
    dets = str(tmp_path / "dets.json")
    gt = os.path.join(scene_dir, "gt_boxes.json")
    assert main(["score", "--elements",
                 os.path.join(scene_dir, "elements.csv"), "--boxes", gt,
                 "--out", dets]) == 0
    capsys.readouterr()

    assert main(["eval", "--dets", dets, "--gt", gt]) == 0
    report = json.loads(capsys.readouterr().out)
    assert sorted(report) == ["ap_25", "ap_50", "ar_25", "ar_50",
                              "num_det", "num_gt"]
    assert report["num_gt"] == 2
    assert report["ap_50"] == 1.


def test_hist_csv(scene_dir, capsys):
    capsys.readouterr()
    assert main(["hist", "--elements",
                 os.path.join(scene_dir, "elements.csv"),
                 "--boxes", os.path.join(scene_dir, "distractors.json"),
                 "--bins", "4"]) == 0

    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "edge,count"
    assert sum(int(line.split(",")[1]) for line in lines[1:]) == 1


def test_inspect_and_filter(splat_file, tmp_path, capsys):
    assert main(["inspect", "--splat", splat_file]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["count"] == 3
    assert summary["opacity"]["below_threshold"] == 1

    out = str(tmp_path / "filtered.ply")
    assert main(["filter", "--splat", splat_file, "--out", out]) == 0
    assert len(read_splat_ply(out)) == 2

    assert main(["filter", "--splat", splat_file]) == 1


def test_surf_csv(splat_file, capsys):
    capsys.readouterr()
    assert main(["surf", "--splat", splat_file]) == 0
    elements = SurfaceElements.from_csv(capsys.readouterr().out)

    assert len(elements) == 2
    assert np.allclose(elements.areas, np.pi)
