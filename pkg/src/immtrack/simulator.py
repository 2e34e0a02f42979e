"""Seeded scenario generator: maneuvering vehicles, noisy detections, clutter, drift.

Routes are chains of maneuver segments integrated in closed form, so ground
truth is exact at every frame time:

* ``straight`` - constant speed for ``length`` m (or ``duration`` s)
* ``turn``     - constant speed arc of ``radius`` m sweeping ``angle`` deg (+ left)
* ``stop``     - constant deceleration to rest over ``duration`` s, then ``hold`` s at rest
* ``go``       - constant acceleration to ``speed`` m/s over ``duration`` s
* ``hold``     - stand still for ``duration`` s

A vehicle exists from its ``start_time`` until its route is exhausted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core_types import BoxMeasurement, Pose2D, ValidationError, wrap_angle
from .road_context import ContextMap


@dataclass(frozen=True)
class Segment:
    kind: str
    length: float | None = None
    duration: float | None = None
    radius: float | None = None
    angle: float | None = None   # degrees, positive = left
    speed: float | None = None
    hold: float = 0.0

    @classmethod
    def from_dict(cls, d: dict) -> "Segment":
        d = dict(d)
        kind = d.pop("kind", None) or d.pop("type", None)
        if kind is None:
            raise ValidationError(f"segment without kind: {d}")
        try:
            return cls(kind=str(kind), **{k: float(v) for k, v in d.items()})
        except TypeError as exc:
            raise ValidationError(f"bad segment {d}: {exc}") from exc

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for k in ("length", "duration", "radius", "angle", "speed"):
            v = getattr(self, k)
            if v is not None:
                out[k] = v
        if self.hold:
            out["hold"] = self.hold
        return out


@dataclass(frozen=True)
class VehicleRoute:
    id: int
    start: Pose2D
    speed: float
    segments: tuple[Segment, ...]
    start_time: float = 0.0
    dims: tuple[float, float, float] = (4.5, 1.8, 1.5)
    z: float = 0.75

    @classmethod
    def from_dict(cls, d: dict) -> "VehicleRoute":
        try:
            sx, sy, sh = (float(v) for v in d["start"])
            return cls(
                id=int(d["id"]),
                start=Pose2D(sx, sy, math.radians(sh) if d.get("degrees", True) else sh),
                speed=float(d.get("speed", 0.0)),
                segments=tuple(Segment.from_dict(s) for s in d["segments"]),
                start_time=float(d.get("start_time", 0.0)),
                dims=tuple(float(v) for v in d.get("dims", (4.5, 1.8, 1.5))),
                z=float(d.get("z", 0.75)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"bad vehicle route {d}: {exc}") from exc

    def to_dict(self) -> dict:
        return {"id": self.id, "start": [self.start.x, self.start.y, math.degrees(self.start.heading)],
                "speed": self.speed, "start_time": self.start_time, "dims": list(self.dims),
                "z": self.z, "segments": [s.to_dict() for s in self.segments]}


@dataclass(frozen=True)
class DetectionNoise:
    position: float = 0.1
    dims: float = 0.05
    yaw: float = 0.03


@dataclass(frozen=True)
class Scenario:
    seed: int = 0
    duration: float = 10.0
    rate: float = 10.0
    vehicles: tuple[VehicleRoute, ...] = ()
    map: ContextMap | None = field(default=None, compare=False)
    noise: DetectionNoise = field(default_factory=DetectionNoise)
    p_miss: float = 0.0
    clutter_rate: float = 0.0
    extent: tuple[float, float, float, float] = (-50.0, 50.0, -50.0, 50.0)
    drift_events: tuple[tuple[float, Pose2D], ...] = ()

    def __post_init__(self):
        if not self.rate > 0:
            raise ValidationError("rate must be positive")
        if not 0.0 <= self.p_miss <= 1.0:
            raise ValidationError("p_miss must lie in [0, 1]")
        if self.duration <= 0:
            raise ValidationError("duration must be positive")
        if self.clutter_rate < 0:
            raise ValidationError("clutter_rate must be >= 0")
        ids = [v.id for v in self.vehicles]
        if len(set(ids)) != len(ids):
            raise ValidationError("vehicle ids must be unique")

    @property
    def n_frames(self) -> int:
        return int(math.floor(self.duration * self.rate + 1e-9)) + 1

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=int(seed))

    @classmethod
    def from_dict(cls, d: dict, cmap: ContextMap | None = None) -> "Scenario":
        if not isinstance(d, dict):
            raise ValidationError("scenario document must be a mapping")
        try:
            noise = DetectionNoise(**(d.get("noise") or {}))
            drift = _drift_from_dicts(d.get("drift_events"))
            if cmap is None and isinstance(d.get("map"), dict):
                cmap = ContextMap.from_dict(d["map"])
            return cls(
                seed=int(d.get("seed", 0)),
                duration=float(d.get("duration", 10.0)),
                rate=float(d.get("rate", 10.0)),
                vehicles=tuple(VehicleRoute.from_dict(v) for v in d.get("vehicles") or ()),
                map=cmap,
                noise=noise,
                p_miss=float(d.get("p_miss", 0.0)),
                clutter_rate=float(d.get("clutter_rate", 0.0)),
                extent=tuple(float(v) for v in d.get("extent", (-50.0, 50.0, -50.0, 50.0))),
                drift_events=drift,
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"invalid scenario: {exc}") from exc

    def to_dict(self) -> dict:
        out = {
            "seed": self.seed, "duration": self.duration, "rate": self.rate,
            "p_miss": self.p_miss, "clutter_rate": self.clutter_rate, "extent": list(self.extent),
            "noise": {"position": self.noise.position, "dims": self.noise.dims, "yaw": self.noise.yaw},
            "drift_events": [{"time": t, "dx": p.x, "dy": p.y, "dheading": p.heading}
                             for t, p in self.drift_events],
            "vehicles": [v.to_dict() for v in self.vehicles],
        }
        if self.map is not None:
            out["map"] = self.map.to_dict()
        return out


@dataclass(frozen=True)
class TruthObject:
    id: int
    box: BoxMeasurement
    mode: str


@dataclass(frozen=True)
class GroundTruthFrame:
    frame: int
    time: float
    objects: tuple[TruthObject, ...]


@dataclass(frozen=True)
class DetectionFrame:
    frame: int
    time: float
    detections: tuple[BoxMeasurement, ...]
    ego_pose: Pose2D = Pose2D()


# ---------------------------------------------------------------------------
# route kinematics


@dataclass(frozen=True)
class _Piece:
    t0: float
    t1: float
    x0: float
    y0: float
    h0: float
    v0: float
    accel: float
    curvature: float
    mode: str

    def state(self, t: float) -> tuple[float, float, float, float]:
        tau = t - self.t0
        s = self.v0 * tau + 0.5 * self.accel * tau * tau
        k = self.curvature
        if k == 0.0:
            x = self.x0 + s * math.cos(self.h0)
            y = self.y0 + s * math.sin(self.h0)
            h = self.h0
        else:
            h = self.h0 + k * s
            x = self.x0 + (math.sin(h) - math.sin(self.h0)) / k
            y = self.y0 - (math.cos(h) - math.cos(self.h0)) / k
        return x, y, h, self.v0 + self.accel * tau

    @property
    def length(self) -> float:
        tau = self.t1 - self.t0
        return self.v0 * tau + 0.5 * self.accel * tau * tau


def build_pieces(route: VehicleRoute) -> list[_Piece]:
    pieces: list[_Piece] = []
    t = route.start_time
    x, y, h, v = route.start.x, route.start.y, route.start.heading, route.speed
    if v < 0:
        raise ValidationError(f"vehicle {route.id}: negative speed")

    def add(duration, accel, curvature, mode):
        nonlocal t, x, y, h, v
        p = _Piece(t, t + duration, x, y, h, v, accel, curvature, mode)
        pieces.append(p)
        x, y, h, v = p.state(p.t1)
        t = p.t1

    for i, seg in enumerate(route.segments):
        where = f"vehicle {route.id} segment {i} ({seg.kind})"
        if seg.kind == "straight":
            if seg.length is not None:
                if seg.length <= 0 or v <= 0:
                    raise ValidationError(f"{where}: zero-length segment or vehicle at rest")
                dur = seg.length / v
            elif seg.duration is not None and seg.duration > 0:
                dur = seg.duration
            else:
                raise ValidationError(f"{where}: needs a positive length or duration")
            add(dur, 0.0, 0.0, "CV")
        elif seg.kind == "turn":
            if not seg.radius or seg.radius <= 0 or not seg.angle or v <= 0:
                raise ValidationError(f"{where}: needs radius > 0, angle != 0 and a moving vehicle")
            ang = math.radians(seg.angle)
            add(seg.radius * abs(ang) / v, 0.0, math.copysign(1.0 / seg.radius, ang), "CT")
        elif seg.kind == "stop":
            if not seg.duration or seg.duration <= 0:
                raise ValidationError(f"{where}: needs a positive duration")
            if v > 0:
                add(seg.duration, -v / seg.duration, 0.0, "CA")
            v = 0.0  # exact rest despite rounding
            if seg.hold > 0:
                add(seg.hold, 0.0, 0.0, "CV")
        elif seg.kind == "go":
            if not seg.duration or seg.duration <= 0 or seg.speed is None or seg.speed < 0:
                raise ValidationError(f"{where}: needs a positive duration and a target speed")
            add(seg.duration, (seg.speed - v) / seg.duration, 0.0, "CA")
            v = seg.speed
        elif seg.kind == "hold":
            if not seg.duration or seg.duration <= 0:
                raise ValidationError(f"{where}: needs a positive duration")
            add(seg.duration, 0.0, 0.0, "CV")
        else:
            raise ValidationError(f"{where}: unknown segment kind")
    return pieces


def vehicle_state(pieces: Sequence[_Piece], t: float):
    """(x, y, heading, speed, mode) at time ``t`` or None outside the route."""
    if not pieces or t < pieces[0].t0 - 1e-9 or t > pieces[-1].t1 + 1e-9:
        return None
    for p in pieces:
        if t < p.t1 or p is pieces[-1]:
            return (*p.state(min(max(t, p.t0), p.t1)), p.mode)
    return None


def _drift_at(events, t: float) -> Pose2D | None:
    cur = None
    for te, pose in sorted(events, key=lambda e: e[0]):
        if te <= t + 1e-12:
            cur = pose
    return cur


def generate(scenario: Scenario) -> tuple[list[GroundTruthFrame], list[DetectionFrame]]:
    """Ground truth and detections for every frame of ``scenario``."""
    rng = np.random.default_rng(scenario.seed)
    routes = [(v, build_pieces(v)) for v in scenario.vehicles]
    noise = scenario.noise
    xmin, xmax, ymin, ymax = scenario.extent
    truth_frames, det_frames = [], []
    for k in range(scenario.n_frames):
        t = k / scenario.rate
        objs = []
        for route, pieces in routes:
            st = vehicle_state(pieces, t)
            if st is None:
                continue
            x, y, h, _, mode = st
            l, w, hh = route.dims
            objs.append(TruthObject(route.id, BoxMeasurement(l, w, hh, x, y, route.z, h), mode))
        drift = _drift_at(scenario.drift_events, t)
        dets = []
        for obj in objs:
            missed = rng.random() < scenario.p_miss
            e = rng.standard_normal(7)
            if missed:
                continue
            b = obj.box
            vals = [
                b.l + noise.dims * e[0], b.w + noise.dims * e[1], b.h + noise.dims * e[2],
                b.x + noise.position * e[3], b.y + noise.position * e[4], b.z + noise.position * e[5],
                b.theta + noise.yaw * e[6],
            ]
            vals[:3] = [max(v, 0.1) for v in vals[:3]]
            dets.append((vals, float(rng.uniform(0.6, 1.0))))
        n_clutter = int(rng.poisson(scenario.clutter_rate)) if scenario.clutter_rate > 0 else 0
        for _ in range(n_clutter):
            u = rng.random(5)
            vals = [4.0 + 1.0 * u[0], 1.6 + 0.4 * u[1], 1.5,
                    xmin + (xmax - xmin) * u[2], ymin + (ymax - ymin) * u[3], 0.75,
                    -math.pi + 2.0 * math.pi * u[4]]
            dets.append((vals, float(rng.uniform(0.3, 0.7))))
        if drift is not None:
            for vals, _ in dets:
                vals[3], vals[4], vals[6] = drift.transform(vals[3], vals[4], vals[6])
        order = rng.permutation(len(dets)) if dets else []
        boxes = tuple(BoxMeasurement(*dets[i][0], score=dets[i][1]) for i in order)
        truth_frames.append(GroundTruthFrame(k, t, tuple(objs)))
        det_frames.append(DetectionFrame(k, t, boxes))
    return truth_frames, det_frames


# ---------------------------------------------------------------------------
# built-in scenarios

STOP_LINE = 8.0
LANE = 1.75
RIGHT_RADIUS = STOP_LINE - LANE
LEFT_RADIUS = STOP_LINE + LANE

# per-approach heading (deg) for vehicles entering from W, S, E, N
_APPROACH_HEADING = {"W": 0.0, "S": 90.0, "E": 180.0, "N": 270.0}

# Context TPMs keep every self-transition high like the default and only shift
# which models are easy to enter, so mixing never drags a live mode back to CV.
CONTEXT_TPMS = {
    "straight": [
        [0.90, 0.05, 0.02, 0.02, 0.01],
        [0.08, 0.88, 0.01, 0.01, 0.02],
        [0.10, 0.05, 0.75, 0.05, 0.05],
        [0.10, 0.02, 0.05, 0.75, 0.08],
        [0.03, 0.10, 0.05, 0.07, 0.75],
    ],
    "turn": [
        [0.70, 0.05, 0.10, 0.10, 0.05],
        [0.05, 0.70, 0.05, 0.05, 0.15],
        [0.02, 0.02, 0.86, 0.05, 0.05],
        [0.02, 0.01, 0.05, 0.86, 0.06],
        [0.01, 0.02, 0.05, 0.06, 0.86],
    ],
    "stopgo": [
        [0.75, 0.20, 0.02, 0.02, 0.01],
        [0.05, 0.90, 0.01, 0.01, 0.03],
        [0.05, 0.10, 0.75, 0.05, 0.05],
        [0.05, 0.05, 0.05, 0.75, 0.10],
        [0.02, 0.10, 0.05, 0.08, 0.75],
    ],
}


def _rot(x: float, y: float, deg: float) -> tuple[float, float]:
    a = math.radians(deg)
    return math.cos(a) * x - math.sin(a) * y, math.sin(a) * x + math.cos(a) * y


def signal_schedule(axis: str, duration: float, cycle: float = 20.0, offset: float = 0.0):
    """Alternating go/stop toggles; the E-W axis is green first, N-S red first."""
    out = []
    green_first = axis == "EW"
    t, green = -offset, green_first
    while t < duration + cycle:
        out.append((max(t, 0.0), 1.0 if green else 0.0))
        t += cycle / 2.0
        green = not green
    return tuple(out)


def intersection_map(duration: float = 60.0, cycle: float = 20.0, approach: float = 60.0,
                     spacing: float = 5.0) -> ContextMap:
    """Four-way signalized intersection centered at the origin, right-hand traffic."""
    from .road_context import ContextVector

    vectors = []
    for name, hd in _APPROACH_HEADING.items():
        axis = "EW" if name in "WE" else "NS"
        sched = signal_schedule(axis, duration, cycle)
        # inbound lane (local frame: heading +x along y = -LANE)
        d = STOP_LINE + spacing
        while d <= approach:
            x, y = _rot(-d, -LANE, hd)
            vectors.append(ContextVector(Pose2D(x, y, math.radians(hd)), _rot(1.0, 0.0, hd), 1.0, "straight"))
            d += spacing
        x, y = _rot(-STOP_LINE, -LANE, hd)
        vectors.append(ContextVector(Pose2D(x, y, math.radians(hd)), _rot(1.0, 0.0, hd), 1.0, "stopgo",
                                     toggle_schedule=sched))
        # outbound lane on the opposite side, leaving the junction
        d = STOP_LINE
        while d <= approach:
            x, y = _rot(d, -LANE, hd)
            vectors.append(ContextVector(Pose2D(x, y, math.radians(hd)), _rot(1.0, 0.0, hd), 1.0, "straight"))
            d += spacing
        # turn guides inside the box, tangent to the turning paths
        for radius, sign in ((RIGHT_RADIUS, -1.0), (LEFT_RADIUS, 1.0)):
            for frac in (0.25, 0.5, 0.75):
                a = frac * math.pi / 2.0
                lx = -STOP_LINE + radius * math.sin(a)
                ly = -LANE + sign * radius * (1.0 - math.cos(a))
                x, y = _rot(lx, ly, hd)
                tang = _rot(math.cos(a), sign * math.sin(a), hd)
                vectors.append(ContextVector(Pose2D(x, y, math.atan2(tang[1], tang[0])), tang, 1.0, "turn"))
    return ContextMap(vectors=vectors, tpm_library=CONTEXT_TPMS,
                      models=("CV", "CA", "CT", "CTV", "CTA"))


def intersection_route(vid: int, approach: str, movement: str, start_time: float,
                       cruise: float, turn_speed: float, lead: float,
                       stop_hold: float | None = None, exit_length: float = 45.0) -> VehicleRoute:
    """Route entering from ``approach`` that goes ``straight``, ``left`` or ``right``."""
    hd = _APPROACH_HEADING[approach]
    sx, sy = _rot(-(STOP_LINE + lead), -LANE, hd)
    segs: list[Segment] = []
    through = turn_speed if movement != "straight" else cruise
    if stop_hold is not None:
        segs.append(Segment("straight", length=max(lead - 0.5 * cruise * 2.5, 1.0)))
        segs.append(Segment("stop", duration=2.5, hold=stop_hold))
        segs.append(Segment("go", duration=2.0, speed=through))
    else:
        decel = 1.5
        segs.append(Segment("straight", length=max(lead - 0.5 * (cruise + through) * decel, 1.0)))
        if abs(through - cruise) > 1e-9:
            segs.append(Segment("go", duration=decel, speed=through))
    if movement == "straight":
        segs.append(Segment("straight", length=2.0 * STOP_LINE))
    elif movement == "left":
        segs.append(Segment("turn", radius=LEFT_RADIUS, angle=90.0))
    elif movement == "right":
        segs.append(Segment("turn", radius=RIGHT_RADIUS, angle=-90.0))
    else:
        raise ValidationError(f"unknown movement {movement!r}")
    if abs(through - cruise) > 1e-9:
        segs.append(Segment("go", duration=2.0, speed=cruise))
    segs.append(Segment("straight", length=exit_length))
    return VehicleRoute(vid, Pose2D(sx, sy, math.radians(hd)), cruise, tuple(segs), start_time)


def _green(axis: str, t: float, cycle: float) -> bool:
    phase = (t % cycle) < cycle / 2.0
    return phase if axis == "EW" else not phase


MIN_GAP = 6.0  # m between centers of any two simulated vehicles


def _sample_centers(route: VehicleRoute, times: np.ndarray) -> np.ndarray:
    pieces = build_pieces(route)
    out = np.full((times.size, 2), np.nan)
    for k, t in enumerate(times):
        st = vehicle_state(pieces, float(t))
        if st is not None:
            out[k] = st[:2]
    return out


def intersection_scenario(seed: int, n_vehicles: int = 10, duration: float = 30.0, rate: float = 10.0,
                          p_miss: float = 0.1, clutter_rate: float = 1.0,
                          noise: DetectionNoise = DetectionNoise(),
                          drift: tuple[tuple[float, Pose2D], ...] = (),
                          cycle: float = 20.0) -> Scenario:
    """Turn- and signal-heavy junction traffic; routes are drawn from ``seed``.

    A vehicle reaching its stop line on red stops there and leaves on green.
    Entries are delayed in 1 s steps until a route keeps ``MIN_GAP`` from all
    earlier vehicles (a fresh route is drawn if no delay works), so truth boxes
    never overlap.
    """
    rng = np.random.default_rng(10_000 + seed)
    vehicles = []
    tracks: list[np.ndarray] = []   # accepted centers sampled on the frame grid (NaN = absent)
    times = np.arange(int(math.floor(duration * rate + 1e-9)) + 1) / rate
    approaches = list(_APPROACH_HEADING)
    for vid in range(1, n_vehicles + 1):
        for _ in range(100):
            approach = approaches[int(rng.integers(4))]
            movement = ("left", "right", "straight")[int(rng.choice(3, p=[0.4, 0.4, 0.2]))]
            start = float(rng.uniform(0.0, duration * 0.45))
            cruise = float(rng.uniform(9.0, 13.0))
            turn_speed = float(rng.uniform(6.0, 8.0))
            lead = float(rng.uniform(25.0, 45.0))
            axis = "EW" if approach in "WE" else "NS"
            # delay the entry until the path keeps clear of every accepted vehicle
            clear = False
            for _ in range(int(duration)):
                hold = None
                if not _green(axis, start + lead / cruise, cycle):
                    t_stop = start + (lead - 1.25 * cruise) / cruise + 2.5
                    t_green = (math.floor(t_stop / (cycle / 2.0)) + 1) * (cycle / 2.0)
                    hold = max(t_green - t_stop, 0.5)
                route = intersection_route(vid, approach, movement, start, cruise, turn_speed, lead, hold)
                centers = _sample_centers(route, times)
                clear = all(not np.any(np.hypot(*(centers - c).T) < MIN_GAP) for c in tracks)
                if clear:
                    break
                start += 1.0
            if clear:
                break
        else:
            raise ValidationError(f"no conflict-free route for vehicle {vid}; lower n_vehicles")
        tracks.append(centers)
        vehicles.append(route)
    return Scenario(seed=seed, duration=duration, rate=rate, vehicles=tuple(vehicles),
                    map=intersection_map(duration + cycle, cycle), noise=noise, p_miss=p_miss,
                    clutter_rate=clutter_rate, extent=(-60.0, 60.0, -60.0, 60.0), drift_events=drift)


def route_map(route: VehicleRoute, spacing: float = 5.0) -> ContextMap:
    """Context vectors laid along a route: ``turn`` TPMs on arcs, ``straight`` elsewhere."""
    from .road_context import ContextVector

    vectors = []
    for p in build_pieces(route):
        if p.v0 <= 0.0 and p.accel <= 0.0:
            continue
        n = max(int(p.length / spacing), 1)
        tpm_id = "turn" if p.mode == "CT" else "straight"
        for k in range(n):
            t = p.t0 + (k + 0.5) * (p.t1 - p.t0) / n
            x, y, h, _ = p.state(t)
            vectors.append(ContextVector(Pose2D(x, y, h), (math.cos(h), math.sin(h)), 1.0, tpm_id))
    return ContextMap(vectors=vectors, tpm_library=CONTEXT_TPMS, models=("CV", "CA", "CT", "CTV", "CTA"))


def cv_to_ct_scenario(seed: int, straight_time: float = 4.0, speed: float = 10.0,
                      radius: float = 15.0, angle: float = 90.0, rate: float = 10.0,
                      noise: DetectionNoise = DetectionNoise()) -> Scenario:
    """Single vehicle: straight cruise, then a constant-speed turn, on a road map tracing the route."""
    rng = np.random.default_rng(seed)
    heading = float(rng.uniform(-180.0, 180.0))
    sign = 1.0 if rng.random() < 0.5 else -1.0
    route = VehicleRoute(1, Pose2D(0.0, 0.0, math.radians(heading)), speed,
                         (Segment("straight", length=speed * straight_time),
                          Segment("turn", radius=radius, angle=sign * angle),
                          Segment("straight", length=speed * 1.0)))
    dur = straight_time + radius * math.radians(angle) / speed + 1.0
    return Scenario(seed=seed, duration=dur, rate=rate, vehicles=(route,), noise=noise,
                    map=route_map(route))


def multilane_scenario(seed: int, n_vehicles: int = 10, duration: float = 20.0, rate: float = 10.0,
                       clutter_rate: float = 5.0, p_miss: float = 0.0,
                       noise: DetectionNoise = DetectionNoise()) -> Scenario:
    """Dense multi-lane traffic with gentle lane-change arcs; all vehicles present throughout.

    With the defaults every frame carries 10 vehicles plus about 5 clutter boxes.
    """
    rng = np.random.default_rng(20_000 + seed)
    vehicles = []
    for vid in range(1, n_vehicles + 1):
        lane = (vid - 1) % 5
        row = (vid - 1) // 5
        speed = float(rng.uniform(8.0, 14.0))
        x0 = -45.0 + 18.0 * row + float(rng.uniform(-3.0, 3.0))
        y0 = -8.0 + 4.0 * lane
        side = 1.0 if rng.random() < 0.5 else -1.0
        arc = float(rng.uniform(8.0, 15.0))
        segs = (Segment("straight", duration=float(rng.uniform(3.0, 8.0))),
                Segment("turn", radius=60.0, angle=side * arc),
                Segment("turn", radius=60.0, angle=-side * arc),
                Segment("straight", duration=duration))
        vehicles.append(VehicleRoute(vid, Pose2D(x0, y0, 0.0), speed, segs))
    return Scenario(seed=seed, duration=duration, rate=rate, vehicles=tuple(vehicles), noise=noise,
                    p_miss=p_miss, clutter_rate=clutter_rate, extent=(-50.0, 250.0, -20.0, 20.0))


def _drift_from_dicts(events) -> tuple[tuple[float, Pose2D], ...]:
    return tuple((float(e["time"]), Pose2D(float(e.get("dx", 0.0)), float(e.get("dy", 0.0)),
                                           float(e.get("dheading", 0.0)))) for e in events or ())


GENERATORS = {
    "intersection": intersection_scenario,
    "cv_to_ct": cv_to_ct_scenario,
    "multilane": multilane_scenario,
}


def generator_factory(name: str, params: dict | None = None):
    """``seed -> Scenario`` for a built-in generator with keyword overrides.

    ``noise`` may be given as a mapping and ``drift`` as a list of
    ``{time, dx, dy, dheading}`` records, as in scenario files.
    """
    if name not in GENERATORS:
        raise ValidationError(f"unknown scenario generator {name!r}; known: {sorted(GENERATORS)}")
    kwargs = dict(params or {})
    if "noise" in kwargs:
        kwargs["noise"] = DetectionNoise(**kwargs["noise"])
    if "drift" in kwargs:
        kwargs["drift"] = _drift_from_dicts(kwargs["drift"])
    fn = GENERATORS[name]
    try:
        fn(0, **kwargs)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for generator {name!r}: {exc}") from exc

    def make(seed: int) -> Scenario:
        return fn(int(seed), **kwargs)

    return make
