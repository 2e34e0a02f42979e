"""Primitive motion models over the shared 13-dim state.

State layout: ``(l, w, h, x, y, z, theta, vx, vy, vz, omega, ax, ay)``.

* CV  - constant velocity; heading held, yaw rate and acceleration zeroed.
* CA  - constant acceleration (ax, ay); heading held, yaw rate zeroed.
* CT  - coordinated turn: the Cartesian velocity vector rotates at ``omega``,
        speed is not tied to the box yaw.
* CTV - constant turn rate and speed: speed is the velocity component along
        the yaw, the body moves along the turning yaw (no side-slip).
* CTA - CTV plus a longitudinal acceleration carried in the turning frame.

The turning models are nonlinear; their ``F`` is the Jacobian at the input
state, computed by complex-step differentiation of the kinematics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache

import numpy as np

from .core_types import (
    AX, AY, L, H, OMEGA, STATE_DIM, THETA, VX, VY, VZ, X, Y, Z, wrap_angle,
)

OMEGA_EPS = 1e-4
_CSTEP = 1e-20


class ModelKind(str, Enum):
    CV = "CV"
    CA = "CA"
    CT = "CT"
    CTV = "CTV"
    CTA = "CTA"

    @property
    def turning(self) -> bool:
        return self in (ModelKind.CT, ModelKind.CTV, ModelKind.CTA)

    @property
    def accelerating(self) -> bool:
        return self in (ModelKind.CA, ModelKind.CTA)


DEFAULT_MODEL_ORDER = (ModelKind.CV, ModelKind.CA, ModelKind.CT, ModelKind.CTV, ModelKind.CTA)


@dataclass(frozen=True)
class ProcessNoise:
    """Continuous white-noise intensities (standard deviations)."""

    accel: float = 0.5     # m/s^2, drives position for CV/CT/CTV
    jerk: float = 1.0      # m/s^3, drives acceleration for CA/CTA
    omega: float = 0.1     # rad/s^2, yaw-rate noise of the turning models
    heading: float = 0.02  # rad/sqrt(s), yaw random walk for CV/CA
    vz: float = 0.1        # m/s^2
    dims: float = 0.01     # m/sqrt(s), box-size random walk
    static: float = 1e-3   # floor on rows a model forces to zero

    def __post_init__(self):
        for name in ("accel", "jerk", "omega", "heading", "vz", "dims", "static"):
            if getattr(self, name) < 0:
                raise ValueError(f"process noise {name} must be >= 0")


@dataclass(frozen=True)
class MotionModel:
    kind: ModelKind
    dt: float = 0.1
    q_scale: ProcessNoise = field(default_factory=ProcessNoise)

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    def with_dt(self, dt: float) -> "MotionModel":
        if dt == self.dt:
            return self
        return replace(self, dt=float(dt))


def _turn_integrals(w, T):
    """Return (A1, B1, A2, B2) = integrals over [0, T] of cos(wt), sin(wt), t cos(wt), t sin(wt)."""
    u = w * T
    small = np.abs(np.real(w)) < OMEGA_EPS
    ws = np.where(small, 1.0, w)
    us = ws * T
    su = np.sin(us)
    half = np.sin(0.5 * us)
    one_minus_cos = 2.0 * half * half
    A1 = su / ws
    B1 = one_minus_cos / ws
    A2 = (T * su - B1) / ws
    B2 = (su / ws - T * np.cos(us)) / ws
    u2 = u * u
    A1t = T * (1.0 - u2 / 6.0 + u2 * u2 / 120.0)
    B1t = T * u * (0.5 - u2 / 24.0)
    A2t = T * T * (0.5 - u2 / 8.0 + u2 * u2 / 144.0)
    B2t = T * T * u * (1.0 / 3.0 - u2 / 30.0)
    return (np.where(small, A1t, A1), np.where(small, B1t, B1),
            np.where(small, A2t, A2), np.where(small, B2t, B2))


def _kinematics(kind: ModelKind, s: np.ndarray, T: float) -> np.ndarray:
    """Propagate states ``s`` (shape (..., 13), real or complex) by ``T`` seconds.

    Yaw is left unwrapped so the map stays analytic for complex-step use.
    """
    out = s.copy()
    out[..., Z] = s[..., Z] + s[..., VZ] * T
    if kind is ModelKind.CV:
        out[..., X] = s[..., X] + s[..., VX] * T
        out[..., Y] = s[..., Y] + s[..., VY] * T
        out[..., OMEGA] = 0.0
        out[..., AX] = 0.0
        out[..., AY] = 0.0
        return out
    if kind is ModelKind.CA:
        out[..., X] = s[..., X] + s[..., VX] * T + 0.5 * s[..., AX] * T * T
        out[..., Y] = s[..., Y] + s[..., VY] * T + 0.5 * s[..., AY] * T * T
        out[..., VX] = s[..., VX] + s[..., AX] * T
        out[..., VY] = s[..., VY] + s[..., AY] * T
        out[..., OMEGA] = 0.0
        return out

    w = s[..., OMEGA]
    th = s[..., THETA]
    A1, B1, A2, B2 = _turn_integrals(w, T)
    th1 = th + w * T
    out[..., THETA] = th1
    if kind is ModelKind.CT:
        vx, vy = s[..., VX], s[..., VY]
        out[..., X] = s[..., X] + A1 * vx - B1 * vy
        out[..., Y] = s[..., Y] + B1 * vx + A1 * vy
        cu, su = np.cos(w * T), np.sin(w * T)
        out[..., VX] = cu * vx - su * vy
        out[..., VY] = su * vx + cu * vy
        out[..., AX] = 0.0
        out[..., AY] = 0.0
        return out

    c, sn = np.cos(th), np.sin(th)
    v = s[..., VX] * c + s[..., VY] * sn
    if kind is ModelKind.CTV:
        a = 0.0
        lon, lat = v * A1, v * B1
    else:
        a = s[..., AX] * c + s[..., AY] * sn
        lon, lat = v * A1 + a * A2, v * B1 + a * B2
    out[..., X] = s[..., X] + lon * c - lat * sn
    out[..., Y] = s[..., Y] + lon * sn + lat * c
    c1, s1 = np.cos(th1), np.sin(th1)
    v1 = v + a * T
    out[..., VX] = v1 * c1
    out[..., VY] = v1 * s1
    if kind is ModelKind.CTV:
        out[..., AX] = 0.0
        out[..., AY] = 0.0
    else:
        out[..., AX] = a * c1
        out[..., AY] = a * s1
    return out


@lru_cache(maxsize=64)
def _linear_matrix(kind: ModelKind, dt: float) -> np.ndarray:
    F = np.eye(STATE_DIM)
    F[Z, VZ] = dt
    F[X, VX] = dt
    F[Y, VY] = dt
    F[OMEGA, OMEGA] = 0.0
    if kind is ModelKind.CV:
        F[AX, AX] = 0.0
        F[AY, AY] = 0.0
    else:
        F[X, AX] = 0.5 * dt * dt
        F[Y, AY] = 0.5 * dt * dt
        F[VX, AX] = dt
        F[VY, AY] = dt
    F.setflags(write=False)
    return F


def propagate(model: MotionModel, state: np.ndarray) -> np.ndarray:
    """Mean propagation only, yaw wrapped. Works on stacked states (..., 13)."""
    s = np.asarray(state, dtype=float)
    if model.kind.turning:
        out = _kinematics(model.kind, s, model.dt)
    else:
        out = s @ _linear_matrix(model.kind, model.dt).T
    out[..., THETA] = wrap_angle(out[..., THETA])
    return out


def transition(model: MotionModel, state: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(F, x_pred)``: exact matrix (CV, CA) or Jacobian at ``state``."""
    s = np.asarray(state, dtype=float)
    if not model.kind.turning:
        F = _linear_matrix(model.kind, model.dt)
        x = F @ s
        x[THETA] = wrap_angle(x[THETA])
        return F, x
    probe = s.astype(complex) + 1j * _CSTEP * np.eye(STATE_DIM)
    fx = _kinematics(model.kind, np.vstack([s.astype(complex), probe]), model.dt)
    x = fx[0].real.copy()
    F = fx[1:].imag.T / _CSTEP
    x[THETA] = wrap_angle(x[THETA])
    return F, x


def transition_many(model: MotionModel, states: np.ndarray,
                    others: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched ``transition`` over states (n, 13), plus propagated means of ``others`` (n, 13).

    Returns ``(F, x_pred, others_pred)``; ``F`` is (13, 13) for the linear
    models and (n, 13, 13) for the turning ones.
    """
    states = np.asarray(states, dtype=float)
    others = np.asarray(others, dtype=float)
    if not model.kind.turning:
        F = _linear_matrix(model.kind, model.dt)
        x = states @ F.T
        y = others @ F.T
        x[:, THETA] = wrap_angle(x[:, THETA])
        y[:, THETA] = wrap_angle(y[:, THETA])
        return F, x, y
    n = states.shape[0]
    stack = np.empty((n, STATE_DIM + 2, STATE_DIM), dtype=complex)
    stack[:, 0] = states
    stack[:, 1:STATE_DIM + 1] = states[:, None, :] + 1j * _CSTEP * np.eye(STATE_DIM)
    stack[:, -1] = others
    fx = _kinematics(model.kind, stack, model.dt)
    F = np.swapaxes(fx[:, 1:STATE_DIM + 1].imag, -1, -2) / _CSTEP
    x = fx[:, 0].real.copy()
    y = fx[:, -1].real.copy()
    x[:, THETA] = wrap_angle(x[:, THETA])
    y[:, THETA] = wrap_angle(y[:, THETA])
    return F, x, y


def _cwna(q: float, T: float) -> np.ndarray:
    return q * q * np.array([[T**3 / 3.0, T**2 / 2.0], [T**2 / 2.0, T]])


def _jerk(q: float, T: float) -> np.ndarray:
    return q * q * np.array([
        [T**5 / 20.0, T**4 / 8.0, T**3 / 6.0],
        [T**4 / 8.0, T**3 / 3.0, T**2 / 2.0],
        [T**3 / 6.0, T**2 / 2.0, T],
    ])


def _place(Q: np.ndarray, idx, block: np.ndarray) -> None:
    Q[np.ix_(idx, idx)] += block


@lru_cache(maxsize=256)
def _process_noise_cached(model: MotionModel) -> np.ndarray:
    T = model.dt
    q = model.q_scale
    Q = np.zeros((STATE_DIM, STATE_DIM))
    for i in (L, L + 1, H):
        Q[i, i] = q.dims**2 * T
    _place(Q, [Z, VZ], _cwna(q.vz, T))
    if model.kind.accelerating:
        _place(Q, [X, VX, AX], _jerk(q.jerk, T))
        _place(Q, [Y, VY, AY], _jerk(q.jerk, T))
    else:
        _place(Q, [X, VX], _cwna(q.accel, T))
        _place(Q, [Y, VY], _cwna(q.accel, T))
        Q[AX, AX] = Q[AY, AY] = q.static**2 * T
    if model.kind.turning:
        _place(Q, [THETA, OMEGA], _cwna(q.omega, T))
    else:
        Q[THETA, THETA] = q.heading**2 * T
        Q[OMEGA, OMEGA] = q.static**2 * T
    Q.setflags(write=False)
    return Q


def process_noise(model: MotionModel) -> np.ndarray:
    """Discretized process noise ``Q`` (13x13, PSD) for ``model``."""
    return _process_noise_cached(model)


def make_models(kinds=DEFAULT_MODEL_ORDER, dt: float = 0.1,
                q_scale: ProcessNoise | None = None) -> tuple[MotionModel, ...]:
    q_scale = q_scale or ProcessNoise()
    return tuple(MotionModel(ModelKind(k), dt, q_scale) for k in kinds)
