"""CLEAR-MOT evaluation with 3D IoU matching."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .association import INFEASIBLE, solve_assignment
from .core_types import ValidationError, iou_3d

MOSTLY_TRACKED = 0.8
MOSTLY_LOST = 0.2


@dataclass(frozen=True)
class MotReport:
    MOTA: float
    MOTP: float
    MT: float
    ML: float
    FP: int
    FN: int
    IDS: int
    FRAG: int
    num_gt: int = 0
    num_matches: int = 0
    num_trajectories: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _as_frame_dict(stream) -> dict[int, list[tuple[int, np.ndarray]]]:
    """Normalize a stream to ``{frame: [(id, box7), ...]}``.

    Accepts a mapping of that shape, ``GroundTruthFrame``-like records with
    ``objects``, or flat records with ``frame``, ``id`` and ``box``.
    """
    if isinstance(stream, Mapping):
        return {int(k): [(int(i), np.asarray(b, float)[:7]) for i, b in v] for k, v in stream.items()}
    out: dict[int, list] = defaultdict(list)
    for rec in stream:
        if hasattr(rec, "objects"):
            out[int(rec.frame)].extend(
                (int(o.id), o.box.as_array() if hasattr(o.box, "as_array") else np.asarray(o.box, float)[:7])
                for o in rec.objects)
            out.setdefault(int(rec.frame), [])
        elif hasattr(rec, "tracks"):
            out.setdefault(int(rec.frame), [])
            out[int(rec.frame)].extend((int(t.id), np.asarray(t.box, float)[:7]) for t in rec.tracks)
        else:
            box = rec.box.as_array() if hasattr(rec.box, "as_array") else np.asarray(rec.box, float)[:7]
            out[int(rec.frame)].append((int(rec.id), box))
    return dict(out)


def evaluate(truth, tracks, iou_threshold: float = 0.25) -> MotReport:
    """CLEAR-MOT metrics of ``tracks`` against ``truth``.

    Per frame, correspondences from the previous frame are kept while their
    IoU stays above threshold; the rest are matched by Hungarian on -IoU.
    """
    gt = _as_frame_dict(truth)
    hyp = _as_frame_dict(tracks)
    if gt:
        lo, hi = min(gt), max(gt)
    else:
        lo, hi = 0, -1
    outside = [f for f in hyp if hyp[f] and (f < lo or f > hi)]
    if outside:
        raise ValidationError(f"track frames {sorted(outside)[:5]} fall outside truth frames [{lo}, {hi}]")

    fp = fn = ids = frag = 0
    num_gt = num_matches = 0
    iou_sum = 0.0
    last_match: dict[int, int] = {}      # gt id -> last matched track id
    prev_pairs: dict[int, int] = {}      # gt id -> track id matched in the previous frame
    tracked_prev: dict[int, bool] = {}
    ever_tracked: set[int] = set()
    frames_present: dict[int, int] = defaultdict(int)
    frames_tracked: dict[int, int] = defaultdict(int)

    for f in range(lo, hi + 1):
        g = gt.get(f, [])
        h = hyp.get(f, [])
        num_gt += len(g)
        g_ids = [i for i, _ in g]
        h_ids = [i for i, _ in h]
        if len(set(h_ids)) != len(h_ids):
            raise ValidationError(f"frame {f}: duplicate track ids")
        h_index = {tid: j for j, tid in enumerate(h_ids)}
        iou = np.zeros((len(g), len(h)))
        for a, (_, gb) in enumerate(g):
            for b, (_, hb) in enumerate(h):
                iou[a, b] = iou_3d(gb, hb)

        pairs: list[tuple[int, int]] = []
        used_g, used_h = set(), set()
        for a, gid in enumerate(g_ids):
            tid = prev_pairs.get(gid)
            if tid is not None and tid in h_index:
                b = h_index[tid]
                if b not in used_h and iou[a, b] >= iou_threshold:
                    pairs.append((a, b))
                    used_g.add(a)
                    used_h.add(b)
        rest_g = [a for a in range(len(g)) if a not in used_g]
        rest_h = [b for b in range(len(h)) if b not in used_h]
        if rest_g and rest_h:
            sub = iou[np.ix_(rest_g, rest_h)]
            C = np.where(sub >= iou_threshold, -sub, INFEASIBLE)
            for p, q in solve_assignment(C).matches:
                pairs.append((rest_g[p], rest_h[q]))

        cur_pairs: dict[int, int] = {}
        matched_g = set()
        for a, b in pairs:
            gid, tid = g_ids[a], h_ids[b]
            if gid in last_match and last_match[gid] != tid:
                ids += 1
            last_match[gid] = tid
            cur_pairs[gid] = tid
            matched_g.add(gid)
            iou_sum += iou[a, b]
        num_matches += len(pairs)
        fp += len(h) - len(pairs)
        fn += len(g) - len(pairs)

        for gid in g_ids:
            frames_present[gid] += 1
            now = gid in matched_g
            if now:
                frames_tracked[gid] += 1
                if gid in ever_tracked and not tracked_prev.get(gid, False):
                    frag += 1
                ever_tracked.add(gid)
            tracked_prev[gid] = now
        prev_pairs = cur_pairs

    n_traj = len(frames_present)
    if n_traj:
        ratios = [frames_tracked[g] / frames_present[g] for g in frames_present]
        mt = 100.0 * sum(r >= MOSTLY_TRACKED for r in ratios) / n_traj
        ml = 100.0 * sum(r <= MOSTLY_LOST for r in ratios) / n_traj
    else:
        mt = ml = 0.0
    mota = 100.0 * (1.0 - (fp + fn + ids) / num_gt) if num_gt else float("nan")
    motp = 100.0 * iou_sum / num_matches if num_matches else 0.0
    return MotReport(MOTA=mota, MOTP=motp, MT=mt, ML=ml, FP=fp, FN=fn, IDS=ids, FRAG=frag,
                     num_gt=num_gt, num_matches=num_matches, num_trajectories=n_traj)


def sum_reports(reports: Sequence[MotReport]) -> dict:
    keys = ("FP", "FN", "IDS", "FRAG")
    return {k: int(sum(getattr(r, k) for r in reports)) for k in keys}


def mean_metric(reports: Iterable[MotReport], key: str) -> float:
    vals = [getattr(r, key) for r in reports]
    return float(np.mean(vals)) if vals else float("nan")
