"""Stream and document I/O: detections, truth, tracks, KITTI labels, configs, maps.

Streams are line-delimited JSON (one record per line):

* detections: ``{"frame", "time", "ego_pose": [x, y, heading], "detections": [[l, w, h, x, y, z, theta, score], ...]}``
* truth:      ``{"frame", "time", "objects": [{"id", "box": [7], "mode"}, ...]}``
* tracks:     ``{"frame", "id", "status", "box": [7], "mu": [m]}``

Numbers are written with 17 significant digits, so reads are bit-exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
import yaml

from .core_types import BoxMeasurement, InvalidArgumentError, Pose2D, ValidationError, wrap_angle
from .road_context import ContextMap
from .simulator import DetectionFrame, GroundTruthFrame, Scenario, TruthObject, generator_factory
from .track_manager import FrameOutput, TrackerConfig


def _num(v: float) -> str:
    v = float(v)
    if not math.isfinite(v):
        raise ValidationError(f"cannot serialize non-finite value {v}")
    return format(v, ".17g")


def _nums(values) -> str:
    return "[" + ", ".join(_num(v) for v in values) + "]"


def _read_jsonl(path) -> Iterable[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc


def load_document(path) -> dict:
    """Read a YAML or JSON document."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror}") from exc
    return data or {}


def load_config(path) -> TrackerConfig:
    return TrackerConfig.from_dict(load_document(path))


def load_map(path) -> ContextMap:
    return ContextMap.from_dict(load_document(path))


def scenario_factory(path):
    """``seed -> Scenario`` from a scenario file.

    A file naming a built-in ``generator`` (with optional ``params``) varies
    the routes with the seed; an explicit route list keeps the routes and the
    seed drives only the detection noise.
    """
    doc = load_document(path)
    if doc.get("generator") is not None:
        return generator_factory(str(doc["generator"]), doc.get("params"))
    cmap = None
    if isinstance(doc.get("map"), str):
        cmap = load_map(Path(path).parent / doc["map"])
    base = Scenario.from_dict(doc, cmap)
    return base.with_seed


def load_scenario(path) -> Scenario:
    doc = load_document(path)
    return scenario_factory(path)(int(doc.get("seed", 0)))


# ---------------------------------------------------------------------------
# detections / truth


def write_detections(path, frames: Iterable[DetectionFrame]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for f in frames:
            dets = ", ".join(_nums([*d.as_array(), d.score]) for d in f.detections)
            pose = _nums([f.ego_pose.x, f.ego_pose.y, f.ego_pose.heading])
            fh.write(f'{{"frame": {int(f.frame)}, "time": {_num(f.time)}, "ego_pose": {pose}, '
                     f'"detections": [{dets}]}}\n')


def read_detections(path) -> list[DetectionFrame]:
    """Read a detection stream; ``.txt`` files are parsed as KITTI tracking labels."""
    if str(path).endswith(".txt"):
        return kitti_to_detection_frames(read_kitti_tracking(path))
    out = []
    for lineno, rec in _read_jsonl(path):
        try:
            dets = tuple(BoxMeasurement.from_array(d[:7], score=float(d[7]) if len(d) > 7 else 1.0)
                         for d in rec.get("detections", []))
            pose = Pose2D(*rec.get("ego_pose", (0.0, 0.0, 0.0)))
            out.append(DetectionFrame(int(rec["frame"]), float(rec.get("time", rec["frame"])), dets, pose))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path}:{lineno}: bad detection record ({exc})") from exc
    return out


def write_truth(path, frames: Iterable[GroundTruthFrame]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for f in frames:
            objs = ", ".join(f'{{"id": {int(o.id)}, "box": {_nums(o.box.as_array())}, '
                             f'"mode": {json.dumps(o.mode)}}}' for o in f.objects)
            fh.write(f'{{"frame": {int(f.frame)}, "time": {_num(f.time)}, "objects": [{objs}]}}\n')


def read_truth(path) -> list[GroundTruthFrame]:
    """Read a truth stream; ``.txt`` files are parsed as KITTI tracking labels."""
    if str(path).endswith(".txt"):
        return kitti_to_truth_frames(read_kitti_tracking(path))
    out = []
    for lineno, rec in _read_jsonl(path):
        try:
            objs = tuple(TruthObject(int(o["id"]), BoxMeasurement.from_array(o["box"]), str(o.get("mode", "")))
                         for o in rec.get("objects", []))
            out.append(GroundTruthFrame(int(rec["frame"]), float(rec.get("time", rec["frame"])), objs))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path}:{lineno}: bad truth record ({exc})") from exc
    return out


# ---------------------------------------------------------------------------
# tracks


@dataclass(frozen=True, eq=False)
class TrackRecord:
    frame: int
    id: int
    box: np.ndarray
    mu: np.ndarray
    status: str = "Confirmed"

    def __eq__(self, other):
        if not isinstance(other, TrackRecord):
            return NotImplemented
        return (self.frame == other.frame and self.id == other.id and self.status == other.status
                and np.array_equal(self.box, other.box) and np.array_equal(self.mu, other.mu))


def track_records(outputs: Iterable[FrameOutput]) -> list[TrackRecord]:
    return [TrackRecord(s.frame, s.id, np.asarray(s.box, float), np.asarray(s.mu, float), s.status)
            for out in outputs for s in out.tracks]


def format_track_record(r: TrackRecord) -> str:
    return (f'{{"frame": {int(r.frame)}, "id": {int(r.id)}, "status": {json.dumps(r.status)}, '
            f'"box": {_nums(r.box)}, "mu": {_nums(r.mu)}}}')


def write_tracks(path, stream) -> None:
    """Write track records (or tracker ``FrameOutput`` objects), one line per track per frame."""
    stream = list(stream)
    if stream and isinstance(stream[0], FrameOutput):
        stream = track_records(stream)
    with open(path, "w", encoding="utf-8") as fh:
        for r in stream:
            fh.write(format_track_record(r) + "\n")


def read_tracks(path) -> list[TrackRecord]:
    out = []
    for lineno, rec in _read_jsonl(path):
        try:
            out.append(TrackRecord(int(rec["frame"]), int(rec["id"]), np.asarray(rec["box"], float),
                                   np.asarray(rec.get("mu", []), float), str(rec.get("status", "Confirmed"))))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path}:{lineno}: bad track record ({exc})") from exc
    return out


# ---------------------------------------------------------------------------
# KITTI tracking labels
#
# Camera frame: x right, y down, z forward; (x, y, z) is the bottom-face center
# and rotation_y turns about the camera y axis. Tracker frame: x forward,
# y left, z up with the box center at mid-height:
#   x_t = z_c,  y_t = -x_c,  z_t = -y_c + h / 2,  yaw = -rotation_y - pi / 2


@dataclass(frozen=True)
class KittiRow:
    frame: int
    track_id: int
    type: str
    box: BoxMeasurement


def kitti_camera_to_tracker(h, w, l, x, y, z, ry, score=1.0) -> BoxMeasurement:
    return BoxMeasurement(l, w, h, z, -x, -y + 0.5 * h, wrap_angle(-ry - 0.5 * math.pi), score=score)


def read_kitti_tracking(path, classes=("Car",)) -> list[KittiRow]:
    """Parse a KITTI tracking label/result file, keeping rows of the given types."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) not in (17, 18):
                raise ValidationError(f"{path}:{lineno}: expected 17 or 18 columns, got {len(parts)}")
            try:
                frame, tid = int(parts[0]), int(parts[1])
                kind = parts[2]
                h, w, l, x, y, z, ry = (float(v) for v in parts[10:17])
                score = float(parts[17]) if len(parts) == 18 else 1.0
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
            if kind not in classes:
                continue
            try:
                box = kitti_camera_to_tracker(h, w, l, x, y, z, ry, score)
            except InvalidArgumentError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
            rows.append(KittiRow(frame, tid, kind, box))
    return rows


def kitti_to_detection_frames(rows: list[KittiRow], rate: float = 10.0) -> list[DetectionFrame]:
    if not rows:
        return []
    last = max(r.frame for r in rows)
    by_frame: dict[int, list] = {f: [] for f in range(last + 1)}
    for r in rows:
        by_frame[r.frame].append(r.box)
    return [DetectionFrame(f, f / rate, tuple(by_frame[f])) for f in range(last + 1)]


def kitti_to_truth_frames(rows: list[KittiRow], rate: float = 10.0) -> list[GroundTruthFrame]:
    if not rows:
        return []
    last = max(r.frame for r in rows)
    by_frame: dict[int, list] = {f: [] for f in range(last + 1)}
    for r in rows:
        by_frame[r.frame].append(TruthObject(r.track_id, r.box, ""))
    return [GroundTruthFrame(f, f / rate, tuple(by_frame[f])) for f in range(last + 1)]


def report_json(report, **extra) -> str:
    data = dict(report.to_dict(), **extra)
    return json.dumps(data, indent=2, sort_keys=True)
