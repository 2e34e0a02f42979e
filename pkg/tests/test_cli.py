import json
from pathlib import Path

import pytest

from immtrack.cli import EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, main
from immtrack.fileio import read_detections, read_tracks, read_truth

ROOT = Path(__file__).resolve().parents[1]
LEFT_TURN = str(ROOT / "scenarios" / "left_turn.yaml")
INTERSECTION = str(ROOT / "scenarios" / "intersection.yaml")


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--scenario", LEFT_TURN, "--out-dir", str(out)]) == EXIT_OK
    return out


def test_simulate_writes_streams(simulated):
    truth = read_truth(simulated / "truth.jsonl")
    dets = read_detections(simulated / "detections.jsonl")
    assert len(truth) == len(dets) > 0
    assert (simulated / "map.yaml").exists()


def test_track_then_eval(simulated, capsys):
    tracks = simulated / "tracks.jsonl"
    rc = main(["track", "--detections", str(simulated / "detections.jsonl"), "--map", str(simulated / "map.yaml"),
               "--config", str(ROOT / "configs" / "default.yaml"), "--out", str(tracks)])
    assert rc == EXIT_OK and read_tracks(tracks)
    capsys.readouterr()
    assert main(["eval", "--truth", str(simulated / "truth.jsonl"), "--tracks", str(tracks)]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["iou_threshold"] == 0.25
    assert report["IDS"] == 0 and report["MOTA"] > 80.0


@pytest.mark.parametrize("metric", ["kf-iou", "imm-iou"])
def test_track_with_baseline_metric(simulated, metric):
    out = simulated / f"{metric}.jsonl"
    assert main(["track", "--detections", str(simulated / "detections.jsonl"), "--metric", metric,
                 "--set", "confirm_hits=2", "--out", str(out)]) == EXIT_OK
    mu_sizes = {len(r.mu) for r in read_tracks(out)}
    assert mu_sizes == ({1} if metric == "kf-iou" else {5})


def test_compare_table_and_json_are_reproducible(capsys):
    args = ["compare", "--scenario", INTERSECTION, "--seeds", "1", "--set", "use_context=true"]
    assert main(args) == EXIT_OK
    table = capsys.readouterr().out
    assert "kf-iou" in table and "imm-posterior" in table and "IDS" in table
    assert main(args + ["--json", "--metrics", "imm-posterior"]) == EXIT_OK
    first = capsys.readouterr().out
    assert main(args + ["--json", "--metrics", "imm-posterior"]) == EXIT_OK
    assert capsys.readouterr().out == first
    assert list(json.loads(first)["reports"]) == ["imm-posterior"]


def test_invalid_inputs_exit_2(tmp_path, simulated, capsys):
    assert main(["simulate", "--scenario", str(tmp_path / "missing.yaml"), "--out-dir", str(tmp_path)]) == EXIT_INVALID
    bad = tmp_path / "bad.yaml"
    bad.write_text("generator: nowhere\n")
    assert main(["compare", "--scenario", str(bad), "--seeds", "1"]) == EXIT_INVALID
    assert main(["track", "--detections", str(simulated / "detections.jsonl"), "--set", "confirm_hits=0",
                 "--out", str(tmp_path / "t.jsonl")]) == EXIT_INVALID
    assert main(["track", "--detections", str(simulated / "detections.jsonl"), "--set", "oops",
                 "--out", str(tmp_path / "t.jsonl")]) == EXIT_INVALID
    assert main(["eval", "--truth", str(tmp_path / "none.jsonl"), "--tracks", str(tmp_path / "none.jsonl")]) == EXIT_INVALID
    assert "error" in capsys.readouterr().err


def test_numerical_failure_exits_3(simulated, tmp_path, capsys):
    rc = main(["track", "--detections", str(simulated / "detections.jsonl"), "--set", "init_velocity=.nan",
               "--out", str(tmp_path / "t.jsonl")])
    assert rc == EXIT_NUMERICAL
    assert "numerical error" in capsys.readouterr().err
