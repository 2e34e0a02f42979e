import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from immtrack.core_types import ValidationError
from immtrack.fileio import (
    TrackRecord, kitti_camera_to_tracker, load_config, load_map, load_scenario, read_detections,
    read_kitti_tracking, read_tracks, read_truth, scenario_factory, write_detections, write_tracks,
    write_truth,
)
from immtrack.pipeline import run_tracker
from immtrack.simulator import generate, intersection_scenario
from immtrack.track_manager import TrackerConfig

ROOT = Path(__file__).resolve().parents[1]
KITTI_LINE = "0 1 Car 0 0 -1.57 0 0 50 50 1.5 1.6 3.9 1.0 1.5 20.0 -1.57"


def test_kitti_example_line(tmp_path):
    p = tmp_path / "labels.txt"
    p.write_text(KITTI_LINE + "\n1 -1 DontCare -1 -1 -10 0 0 1 1 -1 -1 -1 -1000 -1000 -1000 -10\n")
    (row,) = read_kitti_tracking(p)
    assert (row.frame, row.track_id, row.type) == (0, 1, "Car")
    assert (row.box.l, row.box.w, row.box.h) == (3.9, 1.6, 1.5)
    # camera (x right, y down, z forward, bottom center) -> tracker (x forward, y left, z up, mid-height)
    assert (row.box.x, row.box.y, row.box.z) == pytest.approx((20.0, -1.0, -0.75))


@settings(max_examples=200, deadline=None)
@given(st.floats(-math.pi, math.pi))
def test_kitti_yaw_follows_devkit_heading(ry):
    # devkit: the object's forward axis in camera coordinates is (cos ry, 0, -sin ry)
    fx_cam, fz_cam = math.cos(ry), -math.sin(ry)
    expected = math.atan2(-fx_cam, fz_cam)        # tracker x = z_cam, tracker y = -x_cam
    yaw = kitti_camera_to_tracker(1.5, 1.6, 3.9, 0.0, 0.0, 10.0, ry).theta
    assert math.cos(yaw) == pytest.approx(math.cos(expected), abs=1e-12)
    assert math.sin(yaw) == pytest.approx(math.sin(expected), abs=1e-12)


def test_kitti_frames_and_empty_file(tmp_path):
    p = tmp_path / "dets.txt"
    p.write_text(KITTI_LINE + "\n" + KITTI_LINE.replace("0 1 Car", "2 4 Car", 1) + " 0.8\n")
    frames = read_detections(p)
    assert [len(f.detections) for f in frames] == [1, 0, 1]
    assert frames[2].time == pytest.approx(0.2) and frames[2].detections[0].score == 0.8
    truth = read_truth(p)
    assert [o.id for f in truth for o in f.objects] == [1, 4]
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    assert read_detections(empty) == [] and read_kitti_tracking(empty) == []


@pytest.mark.parametrize("bad", ["0 1 Car 0 0", KITTI_LINE.replace("20.0", "far"), KITTI_LINE.replace("1.5 1.6", "0 1.6")])
def test_kitti_malformed_line_reports_line_number(tmp_path, bad):
    p = tmp_path / "bad.txt"
    p.write_text(KITTI_LINE + "\n" + bad + "\n")
    with pytest.raises(ValidationError, match=":2:"):
        read_kitti_tracking(p)


def test_detection_and_truth_round_trip(tmp_path):
    truth, frames = generate(intersection_scenario(1, duration=5.0))
    write_detections(tmp_path / "d.jsonl", frames)
    write_truth(tmp_path / "t.jsonl", truth)
    assert read_detections(tmp_path / "d.jsonl") == frames
    assert read_truth(tmp_path / "t.jsonl") == truth


def test_track_round_trip_is_exact(tmp_path):
    sc = intersection_scenario(1, duration=5.0)
    _, frames = generate(sc)
    outputs, _ = run_tracker(frames, TrackerConfig(), sc.map)
    path = tmp_path / "tracks.jsonl"
    write_tracks(path, outputs)
    back = read_tracks(path)
    expected = [TrackRecord(s.frame, s.id, s.box, s.mu, s.status) for o in outputs for s in o.tracks]
    assert back and back == expected


def test_mu_written_with_full_precision(tmp_path):
    rec = TrackRecord(0, 1, np.arange(7, dtype=float), np.array([1 / 3, 1 / 7, 1 - 1 / 3 - 1 / 7]))
    path = tmp_path / "one.jsonl"
    write_tracks(path, [rec])
    text = path.read_text()
    assert "0.33333333333333331" in text
    assert read_tracks(path) == [rec]


def test_empty_track_stream(tmp_path):
    path = tmp_path / "none.jsonl"
    write_tracks(path, [])
    assert path.read_text() == ""
    assert read_tracks(path) == []


def test_bad_stream_records(tmp_path):
    p = tmp_path / "d.jsonl"
    p.write_text('{"frame": 0, "detections": []}\n{"frame": 1, "detections": [[1, 2]]}\n')
    with pytest.raises(ValidationError, match=":2:"):
        read_detections(p)
    p.write_text("{not json\n")
    with pytest.raises(ValidationError, match=":1:"):
        read_tracks(p)


def test_shipped_documents_load():
    cfg = load_config(ROOT / "configs/default.yaml")
    assert cfg == TrackerConfig()
    cmap = load_map(ROOT / "scenarios/left_turn_map.yaml")
    assert len(cmap) > 0
    sc = load_scenario(ROOT / "scenarios/left_turn.yaml")
    assert sc.map is not None and len(sc.vehicles) == 2
    make = scenario_factory(ROOT / "scenarios/intersection.yaml")
    assert make(3) == intersection_scenario(3)
    drift = scenario_factory(ROOT / "scenarios/intersection_drift.yaml")(0)
    assert drift.drift_events[0][1].x == 1.0


def test_bad_documents(tmp_path):
    p = tmp_path / "cfg.yaml"
    p.write_text("confirm_hits: [1, 2\n")
    with pytest.raises(ValidationError):
        load_config(p)
    with pytest.raises(ValidationError):
        load_config(tmp_path / "missing.yaml")
