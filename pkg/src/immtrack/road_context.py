"""Road-context map: directed context vectors and time-varying TPM blending.

Each context vector sits at a map position, points along the legal direction
of travel, carries a velocity toggle (0 stop, 0.5 slow, 1 go; optionally a
time schedule of toggles) and names a TPM from the map's library. A target
activates its nearest vectors; their TPMs are blended with weights given by
heading alignment times toggle.

Map file schema (YAML or JSON)::

    models: [CV, CA, CT, CTV, CTA]      # optional, must match the tracker
    default_tpm: [[...], ...]           # optional, defaults to the IMM default
    tpm_library:
      straight: [[...], ...]
      turn: [[...], ...]
    vectors:
      - {x: 0.0, y: 0.0, dir_x: 1.0, dir_y: 0.0, tpm_id: straight, toggle: 1.0}
      - {x: 5.0, y: 0.0, dir_x: 1.0, dir_y: 0.0, tpm_id: straight,
         schedule: [[0.0, 1.0], [12.0, 0.0], [20.0, 1.0]]}
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core_types import AX, AY, THETA, VX, VY, X, Y, Pose2D, ValidationError
from .imm import DEFAULT_TPM, check_tpm

TOGGLE_VALUES = (0.0, 0.5, 1.0)


@dataclass(frozen=True)
class ContextVector:
    position: Pose2D
    direction: tuple[float, float]
    toggle: float = 1.0
    tpm_id: str = "default"
    toggle_schedule: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        dx, dy = (float(v) for v in self.direction)
        n = math.hypot(dx, dy)
        if n == 0.0 or not math.isfinite(n):
            raise ValidationError("context vector direction must be a nonzero finite vector")
        object.__setattr__(self, "direction", (dx / n, dy / n))
        if self.toggle not in TOGGLE_VALUES:
            raise ValidationError(f"toggle must be one of {TOGGLE_VALUES}, got {self.toggle}")
        sched = tuple(sorted((float(t), float(v)) for t, v in self.toggle_schedule))
        for _, v in sched:
            if v not in TOGGLE_VALUES:
                raise ValidationError(f"scheduled toggle must be one of {TOGGLE_VALUES}, got {v}")
        object.__setattr__(self, "toggle_schedule", sched)

    def toggle_at(self, time: float) -> float:
        """Piecewise-constant toggle: the last scheduled value at or before ``time``."""
        tau = self.toggle
        for t, v in self.toggle_schedule:
            if t <= time:
                tau = v
            else:
                break
        return tau


@dataclass(eq=False)
class ContextMap:
    vectors: list[ContextVector] = field(default_factory=list)
    tpm_library: dict[str, np.ndarray] = field(default_factory=dict)
    default_tpm: np.ndarray = field(default_factory=lambda: DEFAULT_TPM.copy())
    models: tuple[str, ...] | None = None

    def __post_init__(self):
        self.default_tpm = np.asarray(self.default_tpm, dtype=float)
        if not check_tpm(self.default_tpm):
            raise ValidationError("default_tpm must be row-stochastic")
        m = self.default_tpm.shape[0]
        lib = {}
        for name, tpm in self.tpm_library.items():
            tpm = np.asarray(tpm, dtype=float)
            if tpm.shape != (m, m) or not check_tpm(tpm):
                raise ValidationError(f"tpm {name!r} must be a {m}x{m} row-stochastic matrix")
            lib[name] = tpm
        self.tpm_library = lib
        for v in self.vectors:
            if v.tpm_id != "default" and v.tpm_id not in lib:
                raise ValidationError(f"context vector references unknown tpm {v.tpm_id!r}")
        self._xy = np.array([[v.position.x, v.position.y] for v in self.vectors], dtype=float)
        self._xy = self._xy.reshape(-1, 2)

    def __len__(self) -> int:
        return len(self.vectors)

    def tpm(self, tpm_id: str) -> np.ndarray:
        if tpm_id == "default":
            return self.default_tpm
        return self.tpm_library[tpm_id]

    @classmethod
    def from_dict(cls, data: dict) -> "ContextMap":
        if not isinstance(data, dict):
            raise ValidationError("map document must be a mapping")
        try:
            vectors = []
            for i, rec in enumerate(data.get("vectors") or []):
                if "x" not in rec or "y" not in rec:
                    raise ValidationError(f"vector {i}: missing x/y")
                heading = math.atan2(float(rec.get("dir_y", 0.0)), float(rec.get("dir_x", 1.0)))
                vectors.append(ContextVector(
                    position=Pose2D(float(rec["x"]), float(rec["y"]), heading),
                    direction=(float(rec.get("dir_x", 1.0)), float(rec.get("dir_y", 0.0))),
                    toggle=float(rec.get("toggle", 1.0)),
                    tpm_id=str(rec.get("tpm_id", "default")),
                    toggle_schedule=tuple(tuple(p) for p in rec.get("schedule") or ()),
                ))
            kwargs = {"vectors": vectors,
                      "tpm_library": dict(data.get("tpm_library") or {}),
                      "models": tuple(data["models"]) if data.get("models") else None}
            if data.get("default_tpm") is not None:
                kwargs["default_tpm"] = np.asarray(data["default_tpm"], dtype=float)
            return cls(**kwargs)
        except (TypeError, KeyError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"invalid map document: {exc}") from exc

    def to_dict(self) -> dict:
        out = {
            "default_tpm": self.default_tpm.tolist(),
            "tpm_library": {k: v.tolist() for k, v in self.tpm_library.items()},
            "vectors": [],
        }
        if self.models:
            out["models"] = list(self.models)
        for v in self.vectors:
            rec = {"x": v.position.x, "y": v.position.y, "dir_x": v.direction[0],
                   "dir_y": v.direction[1], "tpm_id": v.tpm_id, "toggle": v.toggle}
            if v.toggle_schedule:
                rec["schedule"] = [list(p) for p in v.toggle_schedule]
            out["vectors"].append(rec)
        return out


def activate(cmap: ContextMap, target: Pose2D, k: int = 3, radius: float = 15.0) -> list[ContextVector]:
    """The ``k`` nearest vectors within ``radius`` (ties keep map order)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not cmap.vectors:
        return []
    d = np.hypot(cmap._xy[:, 0] - target.x, cmap._xy[:, 1] - target.y)
    order = np.argsort(d, kind="stable")
    return [cmap.vectors[i] for i in order[:k] if d[i] <= radius]


def target_heading(state: np.ndarray, min_speed: float = 1.0) -> float:
    """Direction of travel; the box yaw when the target is (nearly) stopped."""
    vx, vy = float(state[VX]), float(state[VY])
    if math.hypot(vx, vy) < min_speed:
        return float(state[THETA])
    return math.atan2(vy, vx)


def context_likelihood(target_state: np.ndarray, ctx: ContextVector, time: float = 0.0,
                       min_speed: float = 1.0) -> float:
    """Unnormalized weight: clipped cosine between heading and ``ctx.direction`` times toggle."""
    h = target_heading(target_state, min_speed)
    cos = math.cos(h) * ctx.direction[0] + math.sin(h) * ctx.direction[1]
    return max(0.0, cos) * ctx.toggle_at(time)


def blend_tpm(cmap: ContextMap, active: Sequence[ContextVector], weights: Sequence[float]) -> np.ndarray:
    """Convex blend of the active vectors' TPMs; the map default when there is nothing to blend."""
    w = np.asarray(weights, dtype=float)
    if len(active) == 0 or w.size == 0 or float(w.sum()) <= 0.0:
        return cmap.default_tpm.copy()
    live = [(v, wi) for v, wi in zip(active, w) if wi > 0.0]
    if len(live) == 1:
        return cmap.tpm(live[0][0].tpm_id).copy()
    out = np.zeros_like(cmap.default_tpm)
    for v, wi in zip(active, w):
        if wi > 0.0:
            out += wi * cmap.tpm(v.tpm_id)
    # re-project against rounding so rows stay on the simplex
    return out / out.sum(axis=1, keepdims=True)


def context_tpm(cmap: ContextMap, state_map_frame: np.ndarray, time: float,
                k: int = 3, radius: float = 15.0, min_speed: float = 1.0
                ) -> tuple[np.ndarray, list[ContextVector]]:
    """TPM for a target whose state is expressed in the map frame."""
    pose = Pose2D(float(state_map_frame[X]), float(state_map_frame[Y]), float(state_map_frame[THETA]))
    active = activate(cmap, pose, k, radius)
    raw = [context_likelihood(state_map_frame, v, time, min_speed) for v in active]
    total = sum(raw)
    if total <= 0.0:
        return cmap.default_tpm.copy(), active
    return blend_tpm(cmap, active, [r / total for r in raw]), active


def to_map_frame(state: np.ndarray, ego_pose: Pose2D) -> np.ndarray:
    """Express position, yaw and velocity of a tracker-frame state in the map frame."""
    out = np.array(state, dtype=float)
    c, s = math.cos(ego_pose.heading), math.sin(ego_pose.heading)
    out[X], out[Y], out[THETA] = ego_pose.transform(state[X], state[Y], state[THETA])
    out[VX] = c * state[VX] - s * state[VY]
    out[VY] = s * state[VX] + c * state[VY]
    out[AX] = c * state[AX] - s * state[AY]
    out[AY] = s * state[AX] + c * state[AY]
    return out
