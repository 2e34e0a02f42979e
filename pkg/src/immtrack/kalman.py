"""Kalman predict/update over the shared state, Gaussian densities, and KL."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core_types import (
    MEAS_DIM, STATE_DIM, THETA, BoxMeasurement, Gaussian, NumericalStateError,
    NumericalWarning, symmetrize, wrap_angle,
)
from .motion_models import MotionModel, process_noise, transition

S_JITTER = 1e-9
_LOG_2PI = math.log(2.0 * math.pi)

# the measured components are the leading seven state entries
H_MATRIX = np.hstack([np.eye(MEAS_DIM), np.zeros((MEAS_DIM, STATE_DIM - MEAS_DIM))])
H_MATRIX.setflags(write=False)


def _default_R() -> np.ndarray:
    return np.diag(np.array([0.1, 0.1, 0.1, 0.2, 0.2, 0.2, 0.05]) ** 2)


@dataclass(frozen=True, eq=False)
class MeasurementModel:
    """Box measurement model: ``H`` selects (l, w, h, x, y, z, theta); ``R`` is 7x7."""

    R: np.ndarray = field(default_factory=_default_R)

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        if R.shape != (MEAS_DIM, MEAS_DIM):
            raise ValueError(f"R must be {MEAS_DIM}x{MEAS_DIM}, got {R.shape}")
        if not np.allclose(R, R.T, atol=1e-12) or np.linalg.eigvalsh(R).min() < -1e-12:
            raise ValueError("R must be symmetric positive semidefinite")
        R = R.copy()
        R.setflags(write=False)
        object.__setattr__(self, "R", R)

    @property
    def H(self) -> np.ndarray:
        return H_MATRIX

    @classmethod
    def from_sigmas(cls, dims: float = 0.1, position: float = 0.2, yaw: float = 0.05,
                    z: float | None = None) -> "MeasurementModel":
        z = position if z is None else z
        return cls(np.diag(np.array([dims, dims, dims, position, position, z, yaw]) ** 2))


def _check_psd(P: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(P)):
        raise NumericalStateError(f"{what} contains non-finite entries")
    scale = max(1.0, float(np.max(np.abs(np.diagonal(P, axis1=-2, axis2=-1)))))
    try:
        np.linalg.cholesky(P + (1e-9 * scale) * np.eye(P.shape[-1]))
    except np.linalg.LinAlgError as exc:
        raise NumericalStateError(f"{what} is not positive semidefinite") from exc


def predict(est: Gaussian, model: MotionModel) -> Gaussian:
    """Propagate ``est`` one step through ``model``: F P F^T + Q."""
    _check_psd(est.cov, "input covariance")
    F, x = transition(model, est.mean)
    P = symmetrize(F @ est.cov @ F.T + process_noise(model))
    return Gaussian(x, P)


def innovation(z: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Measurement residual ``z - Hx`` (stacked OK) with the yaw component wrapped."""
    y = np.asarray(z, dtype=float) - x[..., :MEAS_DIM]
    y[..., THETA] = wrap_angle(y[..., THETA])
    return y


def _chol(S: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    """Cholesky of a stack of S matrices, jittering any that fail."""
    try:
        return np.linalg.cholesky(S), S, False
    except np.linalg.LinAlgError:
        pass
    if not np.all(np.isfinite(S)):
        raise NumericalStateError("innovation covariance contains non-finite entries")
    S = S + S_JITTER * np.eye(S.shape[-1])
    try:
        Lc = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise NumericalStateError("innovation covariance is not positive semidefinite") from exc
    warnings.warn("singular innovation covariance regularized", NumericalWarning, stacklevel=3)
    return Lc, S, True


@dataclass(frozen=True, eq=False)
class UpdateBatch:
    """Stacked KF update output for several model-conditioned priors."""

    means: np.ndarray        # (m, 13)
    covs: np.ndarray         # (m, 13, 13)
    innovations: np.ndarray  # (m, 7)
    S: np.ndarray            # (m, 7, 7)
    loglik: np.ndarray       # (m,)


def update_batch(means: np.ndarray, covs: np.ndarray, z: np.ndarray, R: np.ndarray) -> UpdateBatch:
    """Vectorized KF update of ``m`` priors against one measurement ``z`` (7,)."""
    y = innovation(z, means)
    PHt = covs[:, :, :MEAS_DIM]
    S = symmetrize(covs[:, :MEAS_DIM, :MEAS_DIM] + R)
    Lc, S, _ = _chol(S)
    # K = P H^T S^-1 from the Cholesky inverse
    Linv = np.linalg.inv(Lc)
    Sinv = np.swapaxes(Linv, -1, -2) @ Linv
    K = PHt @ Sinv
    new_means = means + np.einsum("mij,mj->mi", K, y)
    new_means[:, THETA] = wrap_angle(new_means[:, THETA])
    new_covs = symmetrize(covs - K @ np.swapaxes(PHt, -1, -2))
    w = np.einsum("mij,mj->mi", Linv, y)
    maha = np.einsum("mi,mi->m", w, w)
    logdet = 2.0 * np.log(np.diagonal(Lc, axis1=-2, axis2=-1)).sum(axis=-1)
    loglik = -0.5 * (maha + logdet + MEAS_DIM * _LOG_2PI)
    return UpdateBatch(new_means, new_covs, y, S, loglik)


def loglik_many(means: np.ndarray, covs: np.ndarray, Z: np.ndarray, R: np.ndarray,
                paired: bool = False) -> np.ndarray:
    """Measurement log-likelihoods of ``D`` measurements under ``m`` predicted priors.

    Returns (D, m) for every measurement against every prior, or (m,) with
    ``paired=True`` where ``Z[k]`` is scored against prior ``k`` only.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))[:, :MEAS_DIM]
    Lc, _, _ = _chol(symmetrize(covs[:, :MEAS_DIM, :MEAS_DIM] + R))
    Linv = np.linalg.inv(Lc)
    logdet = 2.0 * np.log(np.diagonal(Lc, axis1=-2, axis2=-1)).sum(axis=-1)
    if paired:
        y = Z - means[:, :MEAS_DIM]
        y[:, THETA] = wrap_angle(y[:, THETA])
        w = np.einsum("mij,mj->mi", Linv, y)
        return -0.5 * (np.einsum("mi,mi->m", w, w) + logdet + MEAS_DIM * _LOG_2PI)
    y = Z[:, None, :] - means[None, :, :MEAS_DIM]
    y[..., THETA] = wrap_angle(y[..., THETA])
    w = np.einsum("mij,dmj->dmi", Linv, y)
    return -0.5 * (np.einsum("dmi,dmi->dm", w, w) + logdet + MEAS_DIM * _LOG_2PI)


def update(est: Gaussian, z: BoxMeasurement | np.ndarray,
           mm: MeasurementModel) -> tuple[Gaussian, np.ndarray, np.ndarray]:
    """KF update; returns ``(posterior, innovation, S)``."""
    zv = z.as_array() if isinstance(z, BoxMeasurement) else np.asarray(z, dtype=float)
    out = update_batch(est.mean[None], est.cov[None], zv, mm.R)
    return Gaussian(out.means[0], out.covs[0]), out.innovations[0], out.S[0]


def gaussian_loglikelihood(innovation: np.ndarray, S: np.ndarray) -> float:
    y = np.asarray(innovation, dtype=float)
    S = np.asarray(S, dtype=float)
    if not np.all(np.isfinite(S)):
        raise NumericalStateError("S contains non-finite entries")
    try:
        Lc = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise NumericalStateError("S is not positive definite") from exc
    w = np.linalg.solve(Lc, y)
    logdet = 2.0 * float(np.log(np.diag(Lc)).sum())
    return -0.5 * (float(w @ w) + logdet + y.shape[0] * _LOG_2PI)


def gaussian_likelihood(innovation: np.ndarray, S: np.ndarray) -> float:
    """Multivariate normal density of ``innovation`` under N(0, S)."""
    return math.exp(gaussian_loglikelihood(innovation, S))


def kl_divergence(prior: Gaussian, posterior: Gaussian, angle_index: int | None = None) -> float:
    """KL(prior || posterior) for Gaussians, in nats.

    ``angle_index`` marks a component whose mean difference is wrapped.
    """
    P0, P1 = np.asarray(prior.cov, float), np.asarray(posterior.cov, float)
    n = P0.shape[0]
    try:
        L1 = np.linalg.cholesky(P1)
    except np.linalg.LinAlgError as exc:
        raise NumericalStateError("posterior covariance is singular") from exc
    sign0, logdet0 = np.linalg.slogdet(P0)
    if sign0 <= 0:
        raise NumericalStateError("prior covariance is singular")
    logdet1 = 2.0 * float(np.log(np.diag(L1)).sum())
    d = np.asarray(posterior.mean, float) - np.asarray(prior.mean, float)
    if angle_index is not None:
        d = d.copy()
        d[angle_index] = wrap_angle(d[angle_index])
    L1inv = np.linalg.inv(L1)
    trace = float(np.trace(L1inv.T @ L1inv @ P0))
    w = L1inv @ d
    return 0.5 * (logdet1 - logdet0 - n + trace + float(w @ w))
