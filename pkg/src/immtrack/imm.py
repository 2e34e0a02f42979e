"""Interacting Multiple Model estimator over a bank of motion models.

The step is split into :func:`imm_predict` (mixing + per-model prediction,
independent of the measurement) and :func:`imm_update` (per-model update and
mode re-weighting). Association evaluates many hypothetical updates against a
single prediction, so keeping the two apart avoids redoing the mixing.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core_types import (
    MEAS_DIM, THETA, BoxMeasurement, Gaussian, NumericalStateError, NumericalWarning,
    symmetrize, wrap_angle,
)
from .kalman import MeasurementModel, loglik_many, update_batch
from .motion_models import ModelKind, MotionModel, process_noise, propagate, transition_many

LIKELIHOOD_FLOOR = 1e-30
_LOG_FLOOR = math.log(LIKELIHOOD_FLOOR)

# default mode prior and transition matrix, rows/cols ordered CV, CA, CT, CTV, CTA
DEFAULT_MU0 = np.full(5, 0.2)
DEFAULT_TPM = np.array([
    [0.85, 0.05, 0.05, 0.05, 0.00],
    [0.10, 0.85, 0.00, 0.00, 0.05],
    [0.05, 0.05, 0.80, 0.05, 0.05],
    [0.05, 0.00, 0.05, 0.80, 0.10],
    [0.00, 0.05, 0.05, 0.10, 0.80],
])


def check_tpm(tpm: np.ndarray, tol: float = 1e-9) -> bool:
    tpm = np.asarray(tpm, dtype=float)
    return (tpm.ndim == 2 and tpm.shape[0] == tpm.shape[1] and bool(np.all(tpm >= 0.0))
            and bool(np.all(np.abs(tpm.sum(axis=1) - 1.0) <= tol)))


def check_simplex(mu: np.ndarray, tol: float = 1e-9) -> bool:
    mu = np.asarray(mu, dtype=float)
    return bool(np.all(mu >= 0.0)) and abs(float(mu.sum()) - 1.0) <= tol


@dataclass(frozen=True, eq=False)
class ImmState:
    """Model-conditioned estimates, mode probabilities and the current TPM."""

    means: np.ndarray               # (m, 13)
    covs: np.ndarray                # (m, 13, 13)
    mu: np.ndarray                  # (m,)
    tpm: np.ndarray                 # (m, m), row j -> col i is Pr(i | j)
    models: tuple[MotionModel, ...]

    def __post_init__(self):
        m = len(self.models)
        if self.means.shape[0] != m or self.covs.shape[0] != m or self.mu.shape != (m,):
            raise ValueError("ImmState arrays do not match the model count")
        if self.tpm.shape != (m, m):
            raise ValueError(f"tpm must be {m}x{m}")

    @property
    def m(self) -> int:
        return len(self.models)

    @property
    def per_model(self) -> list[Gaussian]:
        return [Gaussian(self.means[i], self.covs[i]) for i in range(self.m)]

    @property
    def kinds(self) -> tuple[ModelKind, ...]:
        return tuple(md.kind for md in self.models)

    def with_tpm(self, tpm: np.ndarray) -> "ImmState":
        return replace(self, tpm=np.asarray(tpm, dtype=float))

    def with_dt(self, dt: float) -> "ImmState":
        return replace(self, models=tuple(md.with_dt(dt) for md in self.models))

    @classmethod
    def from_gaussian(cls, est: Gaussian, models: Sequence[MotionModel],
                      mu0: np.ndarray | None = None, tpm: np.ndarray | None = None) -> "ImmState":
        m = len(models)
        mu0 = np.full(m, 1.0 / m) if mu0 is None else np.asarray(mu0, dtype=float)
        tpm = np.eye(m) if tpm is None else np.asarray(tpm, dtype=float)
        means = np.repeat(est.mean[None, :], m, axis=0)
        covs = np.repeat(est.cov[None, :, :], m, axis=0)
        return cls(means, covs, mu0.copy(), tpm, tuple(models))


def weighted_state_means(means: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Stacked convex combinations: means (k, m, n), weights (k, m) -> (k, n)."""
    x = np.einsum("km,kmn->kn", weights, means)
    th = means[..., THETA]
    s = np.einsum("km,km->k", weights, np.sin(th))
    c = np.einsum("km,km->k", weights, np.cos(th))
    out = np.arctan2(s, c)
    # antipodal cancellation: fall back to the heaviest component
    flat = (s == 0.0) & (c == 0.0)
    if np.any(flat):
        k = np.flatnonzero(flat)
        out[k] = th[k, np.argmax(weights[k], axis=-1)]
    x[:, THETA] = wrap_angle(out)
    return x


def weighted_state_mean(means: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Convex combination of states; yaw combined as a circular mean."""
    x = weights @ means
    th = means[:, THETA]
    s = float(weights @ np.sin(th))
    c = float(weights @ np.cos(th))
    if s == 0.0 and c == 0.0:
        x[THETA] = wrap_angle(float(th[int(np.argmax(weights))]))
    else:
        x[THETA] = wrap_angle(math.atan2(s, c))
    return x


def moment_match(means: np.ndarray, covs: np.ndarray, weights: np.ndarray) -> Gaussian:
    """Single Gaussian with the mixture's first two moments (yaw spread wrapped)."""
    x = weighted_state_mean(means, weights)
    d = means - x
    d[:, THETA] = wrap_angle(d[:, THETA])
    P = np.einsum("j,jab->ab", weights, covs) + np.einsum("j,ja,jb->ab", weights, d, d)
    return Gaussian(x, symmetrize(P))


def _mixing_batch(tpm: np.ndarray, mu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stacked mixing matrices (n, m, m) and predicted mode probabilities (n, m)."""
    joint = tpm * mu[:, :, None]
    cbar = joint.sum(axis=1)
    dead = cbar <= 0.0
    if np.any(dead):
        warnings.warn("unreachable mode: uniform mixing column used", NumericalWarning, stacklevel=3)
        W = np.where(dead[:, None, :], 1.0 / mu.shape[1], joint / np.where(dead, 1.0, cbar)[:, None, :])
    else:
        W = joint / cbar[:, None, :]
    return W, cbar


def mixing_probabilities(state: ImmState) -> np.ndarray:
    """Mixing matrix ``W[j, i] = Pr_ji mu_j / sum_k Pr_ki mu_k``; columns sum to 1."""
    W, _ = _mixing_batch(state.tpm[None], state.mu[None])
    return W[0]


def _mix_batch(X: np.ndarray, P: np.ndarray, W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column-wise moment matching for stacked banks: X (n, m, 13), P (n, m, 13, 13)."""
    Wt = np.swapaxes(W, -1, -2)
    means = Wt @ X
    th = X[..., THETA]
    s = np.einsum("nji,nj->ni", W, np.sin(th))
    c = np.einsum("nji,nj->ni", W, np.cos(th))
    means[..., THETA] = wrap_angle(np.arctan2(s, c))
    d = X[:, None, :, :] - means[:, :, None, :]          # (n, i, j, k)
    d[..., THETA] = wrap_angle(d[..., THETA])
    wd = Wt[..., None] * d
    covs = np.einsum("nji,njab->niab", W, P) + np.swapaxes(wd, -1, -2) @ d
    return means, symmetrize(covs)


def _mix_arrays(state: ImmState, W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    means, covs = _mix_batch(state.means[None], state.covs[None], W[None])
    return means[0], covs[0]


def mix_estimates(state: ImmState, mix: np.ndarray) -> list[Gaussian]:
    """Mixed initial conditions for each model-conditioned filter."""
    means, covs = _mix_arrays(state, np.asarray(mix, dtype=float))
    return [Gaussian(means[i], covs[i]) for i in range(state.m)]


@dataclass(frozen=True, eq=False)
class ImmPrediction:
    """Everything the update and the association costs need for one frame."""

    prior: ImmState           # state at t-1 (models carry this frame's dt)
    means: np.ndarray         # mixed-and-predicted per-model means
    covs: np.ndarray
    cbar: np.ndarray          # predicted mode probabilities
    raw: np.ndarray           # F_i applied to the unmixed x_{t-1}^i

    @property
    def best(self) -> int:
        return int(np.argmax(self.cbar))

    def prior_hybrid(self) -> np.ndarray:
        """Prediction weighted by the previous mode probabilities."""
        return weighted_state_mean(self.raw, self.prior.mu)

    def overall(self) -> Gaussian:
        return moment_match(self.means, self.covs, self.cbar)

    def coast(self) -> ImmState:
        """State after a frame without a measurement."""
        return replace(self.prior, means=self.means, covs=self.covs, mu=self.cbar.copy())


def imm_predict_many(states: Sequence[ImmState], dt: float | None = None) -> list[ImmPrediction]:
    """:func:`imm_predict` for several states sharing one model bank, vectorized across them."""
    if not states:
        return []
    if dt is not None:
        states = [st.with_dt(dt) for st in states]
    models = states[0].models
    if any(st.models != models for st in states):
        raise ValueError("imm_predict_many needs a common model bank")
    X = np.stack([st.means for st in states])
    P = np.stack([st.covs for st in states])
    mu = np.stack([st.mu for st in states])
    tpm = np.stack([st.tpm for st in states])
    W, cbar = _mixing_batch(tpm, mu)
    mixed_m, mixed_P = _mix_batch(X, P, W)
    means = np.empty_like(X)
    covs = np.empty_like(P)
    raw = np.empty_like(X)
    for i, md in enumerate(models):
        F, means[:, i], raw[:, i] = transition_many(md, mixed_m[:, i], X[:, i])
        covs[:, i] = F @ mixed_P[:, i] @ np.swapaxes(F, -1, -2) + process_noise(md)
    if not np.all(np.isfinite(covs)):
        raise NumericalStateError("non-finite covariance after prediction")
    covs = symmetrize(covs)
    tot = cbar.sum(axis=1, keepdims=True)
    cbar = np.where(tot > 0, cbar / np.where(tot > 0, tot, 1.0), 1.0 / len(models))
    return [ImmPrediction(st, means[k], covs[k], cbar[k], raw[k]) for k, st in enumerate(states)]


def imm_predict(state: ImmState, dt: float | None = None) -> ImmPrediction:
    return imm_predict_many([state], dt)[0]


def mode_posterior_many(cbar: np.ndarray, loglik: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise :func:`mode_posterior` for stacked (k, m) inputs."""
    ll = np.maximum(loglik, _LOG_FLOOR)
    all_floored = np.all(loglik <= _LOG_FLOOR, axis=-1)
    with np.errstate(divide="ignore"):
        logw = ll + np.log(cbar)
    mu = np.exp(logw - logw.max(axis=-1, keepdims=True))
    mu /= mu.sum(axis=-1, keepdims=True)
    return mu, all_floored


def mode_posterior(cbar: np.ndarray, loglik: np.ndarray) -> tuple[np.ndarray, bool]:
    """Normalized mode posterior from log-likelihoods; True if every model underflowed."""
    mu, all_floored = mode_posterior_many(cbar[None], np.asarray(loglik, dtype=float)[None])
    return mu[0], bool(all_floored[0])


def imm_update_many(preds: Sequence[ImmPrediction], zs: np.ndarray,
                    mm: MeasurementModel) -> list[ImmState]:
    """Update each prediction with its own measurement ``zs[k]`` (vectorized across them)."""
    if not preds:
        return []
    zs = np.atleast_2d(np.asarray(zs, dtype=float))[:, :MEAS_DIM]
    K, m = len(preds), preds[0].prior.m
    means = np.concatenate([p.means for p in preds])
    covs = np.concatenate([p.covs for p in preds])
    out = update_batch(means, covs, np.repeat(zs, m, axis=0), mm.R)
    cbar = np.stack([p.cbar for p in preds])
    mu, all_floored = mode_posterior_many(cbar, out.loglik.reshape(K, m))
    if np.any(all_floored):
        warnings.warn("all model likelihoods underflowed; keeping predicted mode probabilities",
                      NumericalWarning, stacklevel=2)
        mu[all_floored] = cbar[all_floored]
    new_m = out.means.reshape(K, m, -1)
    new_P = out.covs.reshape(K, m, *out.covs.shape[1:])
    return [replace(p.prior, means=new_m[k], covs=new_P[k], mu=mu[k]) for k, p in enumerate(preds)]


def imm_update(pred: ImmPrediction, z: BoxMeasurement | np.ndarray,
               mm: MeasurementModel) -> tuple[ImmState, Gaussian]:
    zv = z.as_array() if isinstance(z, BoxMeasurement) else np.asarray(z, dtype=float)
    new = imm_update_many([pred], zv, mm)[0]
    return new, moment_match(new.means, new.covs, new.mu)


def posterior_mode_probabilities(pred: ImmPrediction, z: np.ndarray, mm: MeasurementModel) -> np.ndarray:
    """Mode probabilities a hypothetical update with ``z`` would produce (no state built)."""
    out = update_batch(pred.means, pred.covs, z, mm.R)
    mu, all_floored = mode_posterior(pred.cbar, out.loglik)
    return pred.cbar.copy() if all_floored else mu


def posterior_mode_probabilities_many(pred: ImmPrediction, Z: np.ndarray,
                                     mm: MeasurementModel) -> np.ndarray:
    """Row ``k``: mode probabilities a hypothetical update with ``Z[k]`` would produce."""
    ll = loglik_many(pred.means, pred.covs, Z, mm.R)       # (D, m)
    cbar = np.broadcast_to(pred.cbar, ll.shape)
    mu, all_floored = mode_posterior_many(cbar, ll)
    mu[all_floored] = pred.cbar
    return mu


def imm_step(state: ImmState, z: BoxMeasurement | np.ndarray, mm: MeasurementModel,
             dt: float | None = None) -> tuple[ImmState, Gaussian]:
    """One full cycle: mixing, per-model predict/update, mode update, mixture output."""
    return imm_update(imm_predict(state, dt), z, mm)


def overall_estimate(state: ImmState) -> Gaussian:
    return moment_match(state.means, state.covs, state.mu)


def hybrid_prediction(raw: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return weighted_state_mean(raw, np.asarray(weights, dtype=float))


def posterior_hybrid_prediction(state_after: ImmState, state_before: ImmState) -> np.ndarray:
    """Per-model one-step predictions of the previous posteriors, weighted by the new modes."""
    raw = np.stack([propagate(md, state_before.means[i])
                    for i, md in enumerate(state_before.models)])
    return hybrid_prediction(raw, state_after.mu)
