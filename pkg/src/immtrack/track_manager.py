"""Multi-object tracking loop: predict, associate, update, and track lifespan."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .association import AssociationParams, Metric, cost_matrix, gate, solve_assignment
from .core_types import (
    MEAS_DIM, STATE_DIM, BoxMeasurement, Gaussian, OrderingError, Pose2D, ValidationError,
    state_from_box,
)
from .imm import (
    DEFAULT_MU0, DEFAULT_TPM, ImmPrediction, ImmState, check_simplex, check_tpm,
    imm_predict_many, imm_update_many, overall_estimate,
)
from .kalman import MeasurementModel
from .motion_models import DEFAULT_MODEL_ORDER, ModelKind, ProcessNoise, make_models
from .road_context import ContextMap, context_tpm, to_map_frame

log = logging.getLogger(__name__)

_MIN_DT = 1e-6


class TrackStatus(str, Enum):
    TENTATIVE = "Tentative"
    CONFIRMED = "Confirmed"
    COASTING = "Coasting"


@dataclass(frozen=True)
class TrackerConfig:
    confirm_hits: int = 3
    max_misses: int = 5
    metric: Metric = Metric.IMM_POSTERIOR
    association: AssociationParams = field(default_factory=AssociationParams)
    models: tuple[ModelKind, ...] = DEFAULT_MODEL_ORDER
    q_scale: ProcessNoise = field(default_factory=ProcessNoise)
    mu0: tuple[float, ...] | None = None
    tpm: tuple[tuple[float, ...], ...] | None = None
    # measurement noise std: dims, position, yaw
    r_dims: float = 0.1
    r_position: float = 0.35
    r_yaw: float = 0.05
    # initial std of unmeasured components
    init_velocity: float = 10.0
    init_vz: float = 0.5
    init_omega: float = 0.5
    init_accel: float = 2.0
    use_context: bool = True
    context_k: int = 3
    context_radius: float = 15.0
    context_min_speed: float = 1.0
    report_coasting: bool = False
    first_dt: float = 0.1

    def __post_init__(self):
        if self.confirm_hits < 1 or self.max_misses < 1:
            raise ValidationError("confirm_hits and max_misses must be >= 1")
        if self.context_k < 1:
            raise ValidationError("context_k must be >= 1")
        object.__setattr__(self, "metric", Metric(self.metric))
        kinds = tuple(ModelKind(k) for k in self.models)
        if not kinds:
            raise ValidationError("at least one motion model is required")
        object.__setattr__(self, "models", kinds)
        m = len(kinds)
        if self.mu0 is not None:
            mu = np.asarray(self.mu0, dtype=float)
            if mu.shape != (m,) or not check_simplex(mu):
                raise ValidationError("mu0 must be a probability vector over the models")
            object.__setattr__(self, "mu0", tuple(float(v) for v in mu))
        if self.tpm is not None:
            tpm = np.asarray(self.tpm, dtype=float)
            if tpm.shape != (m, m) or not check_tpm(tpm):
                raise ValidationError("tpm must be a row-stochastic matrix over the models")
            object.__setattr__(self, "tpm", tuple(tuple(float(v) for v in row) for row in tpm))

    # -- derived pieces ---------------------------------------------------

    @property
    def measurement_model(self) -> MeasurementModel:
        return MeasurementModel.from_sigmas(self.r_dims, self.r_position, self.r_yaw)

    def initial_mu(self) -> np.ndarray:
        if self.mu0 is not None:
            return np.array(self.mu0)
        m = len(self.models)
        return DEFAULT_MU0.copy() if m == 5 else np.full(m, 1.0 / m)

    def initial_tpm(self) -> np.ndarray:
        if self.tpm is not None:
            return np.array(self.tpm)
        m = len(self.models)
        if self.models == DEFAULT_MODEL_ORDER:
            return DEFAULT_TPM.copy()
        if m == 1:
            return np.ones((1, 1))
        return np.full((m, m), 0.1 / (m - 1)) + np.eye(m) * (0.9 - 0.1 / (m - 1))

    def initial_covariance(self) -> np.ndarray:
        sig = np.zeros(STATE_DIM)
        sig[:3] = self.r_dims
        sig[3:6] = self.r_position
        sig[6] = self.r_yaw
        sig[7:9] = self.init_velocity
        sig[9] = self.init_vz
        sig[10] = self.init_omega
        sig[11:13] = self.init_accel
        return np.diag(sig**2)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "association":
                v = asdict(v)
            elif f.name == "q_scale":
                v = asdict(v)
            elif f.name == "metric":
                v = v.value
            elif f.name == "models":
                v = [k.value for k in v]
            elif f.name in ("mu0", "tpm") and v is not None:
                v = [list(r) for r in v] if f.name == "tpm" else list(v)
            out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, data: dict | None) -> "TrackerConfig":
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        try:
            if "association" in data:
                data["association"] = AssociationParams(**(data["association"] or {}))
            if "q_scale" in data:
                data["q_scale"] = ProcessNoise(**(data["q_scale"] or {}))
            if "models" in data:
                data["models"] = tuple(data["models"])
            if data.get("mu0") is not None:
                data["mu0"] = tuple(data["mu0"])
            if data.get("tpm") is not None:
                data["tpm"] = tuple(tuple(r) for r in data["tpm"])
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"invalid tracker config: {exc}") from exc

    def for_metric(self, metric: Metric | str) -> "TrackerConfig":
        """Config variant used for one column of the baseline comparison."""
        metric = Metric(metric)
        if metric is Metric.KF_IOU:
            return replace(self, metric=metric, models=(ModelKind.CV,), mu0=None, tpm=None,
                           use_context=False)
        if metric is Metric.IMM_IOU:
            return replace(self, metric=metric, use_context=False)
        return replace(self, metric=metric)


@dataclass(eq=False)
class Track:
    id: int
    imm: ImmState
    status: TrackStatus = TrackStatus.TENTATIVE
    hits: int = 1
    misses: int = 0
    age: int = 0
    history: list = field(default_factory=list)
    prediction: ImmPrediction | None = None

    def box(self) -> np.ndarray:
        return overall_estimate(self.imm).mean[:MEAS_DIM]


@dataclass(frozen=True, eq=False)
class TrackSnapshot:
    frame: int
    id: int
    box: np.ndarray
    mu: np.ndarray
    status: str


@dataclass(eq=False)
class FrameOutput:
    frame: int
    time: float
    tracks: list[TrackSnapshot] = field(default_factory=list)


def initialize_track(detection: BoxMeasurement, config: TrackerConfig, track_id: int = 0,
                     dt: float | None = None) -> Track:
    """New tentative track seeded from one detection (zero velocity, wide velocity prior)."""
    models = make_models(config.models, dt or config.first_dt, config.q_scale)
    est = Gaussian(state_from_box(detection), config.initial_covariance())
    imm = ImmState.from_gaussian(est, models, config.initial_mu(), config.initial_tpm())
    status = TrackStatus.CONFIRMED if config.confirm_hits <= 1 else TrackStatus.TENTATIVE
    return Track(id=track_id, imm=imm, status=status)


class Tracker:
    """Online tracking-by-detection over a stream of detection frames."""

    def __init__(self, config: TrackerConfig = TrackerConfig(), context_map: ContextMap | None = None,
                 audit: bool = False):
        self.config = config
        self.context_map = context_map
        self.mm = config.measurement_model
        self.tracks: list[Track] = []
        self.next_id = 1
        self.frame = -1
        self.last_time: float | None = None
        self.audit = audit
        self.violations: list[str] = []
        if context_map is not None and context_map.default_tpm.shape[0] != len(config.models):
            if config.use_context:
                raise ValidationError("context map TPM size does not match the model bank")

    @property
    def context_active(self) -> bool:
        return self.config.use_context and self.context_map is not None

    def _check(self, what: str, ok: bool) -> None:
        if self.audit and not ok:
            self.violations.append(f"frame {self.frame}: {what}")

    def _refresh_tpm(self, track: Track, ego_pose: Pose2D, time: float) -> None:
        est = overall_estimate(track.imm)
        state_map = to_map_frame(est.mean, ego_pose)
        cfg = self.config
        tpm, _ = context_tpm(self.context_map, state_map, time, cfg.context_k,
                             cfg.context_radius, cfg.context_min_speed)
        self._check(f"track {track.id} tpm not row-stochastic", check_tpm(tpm))
        track.imm = track.imm.with_tpm(tpm)

    def step(self, detections: Sequence[BoxMeasurement], ego_pose: Pose2D = Pose2D(),
             time: float | None = None) -> FrameOutput:
        cfg = self.config
        if time is None:
            time = 0.0 if self.last_time is None else self.last_time + cfg.first_dt
        if self.last_time is not None and time < self.last_time:
            raise OrderingError(f"frame time {time} precedes previous frame time {self.last_time}")
        dt = cfg.first_dt if self.last_time is None else max(time - self.last_time, _MIN_DT)
        self.frame += 1
        self.last_time = time
        dets = [d if isinstance(d, BoxMeasurement) else BoxMeasurement.from_array(d) for d in detections]

        # road context steers the mode transitions of established tracks
        if self.context_active:
            for trk in self.tracks:
                if trk.status is not TrackStatus.TENTATIVE:
                    self._refresh_tpm(trk, ego_pose, time)

        for trk, pred in zip(self.tracks, imm_predict_many([t.imm for t in self.tracks], dt)):
            trk.prediction = pred

        mask = gate(dets, self.tracks, self.mm, cfg.association)
        costs = cost_matrix(dets, self.tracks, cfg.metric, self.mm, cfg.association, mask)
        result = solve_assignment(costs)

        if result.matches:
            zs = np.array([dets[p].as_array() for p, _ in result.matches])
            updated = imm_update_many([self.tracks[q].prediction for _, q in result.matches], zs, self.mm)
        for (p, q), imm in zip(result.matches, updated if result.matches else ()):
            trk = self.tracks[q]
            trk.imm = imm
            trk.hits += 1
            trk.misses = 0
            if trk.status is TrackStatus.COASTING or (
                    trk.status is TrackStatus.TENTATIVE and trk.hits >= cfg.confirm_hits):
                trk.status = TrackStatus.CONFIRMED

        dead: set[int] = set()
        for q in result.unmatched_tracks:
            trk = self.tracks[q]
            trk.imm = trk.prediction.coast()
            trk.misses += 1
            trk.hits = 0
            if trk.status is TrackStatus.TENTATIVE or trk.misses >= cfg.max_misses:
                dead.add(trk.id)
            else:
                trk.status = TrackStatus.COASTING

        survivors = []
        for trk in self.tracks:
            trk.prediction = None
            trk.age += 1
            if trk.id in dead:
                log.debug("frame %d: track %d terminated", self.frame, trk.id)
                continue
            survivors.append(trk)
        self.tracks = survivors

        for p in result.unmatched_detections:
            self.tracks.append(initialize_track(dets[p], cfg, self.next_id, dt))
            self.next_id += 1

        out = FrameOutput(self.frame, time)
        for trk in self.tracks:
            self._check(f"track {trk.id} mode vector off the simplex", check_simplex(trk.imm.mu))
            if trk.status is TrackStatus.TENTATIVE:
                continue
            if trk.status is TrackStatus.COASTING and not cfg.report_coasting:
                continue
            mean = overall_estimate(trk.imm).mean
            trk.history.append((self.frame, mean.copy(), trk.imm.mu.copy()))
            out.tracks.append(TrackSnapshot(self.frame, trk.id, mean[:MEAS_DIM].copy(), trk.imm.mu.copy(),
                                            trk.status.value))
        return out

    def run(self, frames) -> list[FrameOutput]:
        """Track a whole stream of ``DetectionFrame``-like records."""
        return [self.step(f.detections, f.ego_pose, f.time) for f in frames]
