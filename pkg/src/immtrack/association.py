"""Gating, association costs and optimal bipartite assignment.

Cost matrices are laid out detections x tracks. A track here is anything with
a ``prediction`` attribute holding the frame's :class:`ImmPrediction`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import chi2

from .core_types import MEAS_DIM, THETA, X, Z, BoxMeasurement, iou_3d, wrap_angle
from .imm import (
    hybrid_prediction, mode_posterior_many, posterior_mode_probabilities, weighted_state_means,
)
from .kalman import MeasurementModel, loglik_many

INFEASIBLE = 1e9
CHI2_GATE_3DOF = float(chi2.ppf(0.997, 3))


class Metric(str, Enum):
    KF_IOU = "kf-iou"
    IMM_IOU = "imm-iou"
    IMM_POSTERIOR = "imm-posterior"
    IMM_PRIOR = "imm-prior"  # prior-weighted residual, diagnostic baseline

    @property
    def uses_iou(self) -> bool:
        return self in (Metric.KF_IOU, Metric.IMM_IOU)


@dataclass(frozen=True)
class AssociationParams:
    gate_radius: float = 10.0
    gate_chi2: float = CHI2_GATE_3DOF
    angle_weight: float = 2.0  # m per rad in the residual norm
    iou_min: float = 0.01      # IoU costs below this overlap are infeasible


@dataclass
class AssociationResult:
    matches: list[tuple[int, int]] = field(default_factory=list)
    unmatched_detections: list[int] = field(default_factory=list)
    unmatched_tracks: list[int] = field(default_factory=list)


def _det_array(det) -> np.ndarray:
    return det.as_array() if isinstance(det, BoxMeasurement) else np.asarray(det, dtype=float)[:MEAS_DIM]


def _stack_predictions(tracks: Sequence):
    preds = [t.prediction for t in tracks]
    return (np.stack([p.means for p in preds]), np.stack([p.covs for p in preds]),
            np.array([p.best for p in preds]))


def gate(detections: Sequence, tracks: Sequence, mm: MeasurementModel,
         params: AssociationParams = AssociationParams()) -> np.ndarray:
    """Feasibility mask (M x N): BEV radius and position Mahalanobis under each track's top model."""
    M, N = len(detections), len(tracks)
    if M == 0 or N == 0:
        return np.zeros((M, N), dtype=bool)
    pos = np.array([_det_array(d)[X:Z + 1] for d in detections])
    means, covs, best = _stack_predictions(tracks)
    q = np.arange(N)
    center = means[q, best, X:Z + 1]
    S = covs[q, best, X:Z + 1, X:Z + 1] + mm.R[X:Z + 1, X:Z + 1]
    d = pos[:, None, :] - center[None, :, :]                  # (M, N, 3)
    near = np.hypot(d[..., 0], d[..., 1]) <= params.gate_radius
    maha = np.einsum("pqi,qij,pqj->pq", d, np.linalg.inv(S), d)
    return near & (maha <= params.gate_chi2)


def weighted_residual(z: np.ndarray, x: np.ndarray, angle_weight: float) -> float:
    r = z[:MEAS_DIM] - x[:MEAS_DIM]
    r[THETA] = angle_weight * wrap_angle(r[THETA])
    return float(math.sqrt(r @ r))


def posterior_residual_cost(detection, track, mm: MeasurementModel,
                            params: AssociationParams = AssociationParams()) -> float:
    """Residual to the hybrid prediction weighted by the candidate's posterior modes.

    The track is not modified: the hypothetical update only yields mode weights.
    """
    z = _det_array(detection)
    pred = track.prediction
    mu_post = posterior_mode_probabilities(pred, z, mm)
    return weighted_residual(z, hybrid_prediction(pred.raw, mu_post), params.angle_weight)


def _posterior_costs(zs: np.ndarray, preds: Sequence, mm: MeasurementModel,
                     params: AssociationParams) -> np.ndarray:
    """Vectorized :func:`posterior_residual_cost` over (detection, prediction) pairs."""
    means = np.stack([p.means for p in preds])              # (P, m, 13)
    covs = np.stack([p.covs for p in preds])
    cbar = np.stack([p.cbar for p in preds])
    raw = np.stack([p.raw for p in preds])
    P, m = cbar.shape
    ll = loglik_many(means.reshape(P * m, -1), covs.reshape(P * m, *covs.shape[2:]),
                     np.repeat(zs, m, axis=0), mm.R, paired=True).reshape(P, m)
    mu, all_floored = mode_posterior_many(cbar, ll)
    mu[all_floored] = cbar[all_floored]
    x = weighted_state_means(raw, mu)
    r = zs[:, :MEAS_DIM] - x[:, :MEAS_DIM]
    r[:, THETA] = params.angle_weight * wrap_angle(r[:, THETA])
    return np.sqrt(np.einsum("pi,pi->p", r, r))


def prior_residual_cost(detection, track, params: AssociationParams = AssociationParams()) -> float:
    z = _det_array(detection)
    return weighted_residual(z, track.prediction.prior_hybrid(), params.angle_weight)


def iou_cost(detection, track) -> float:
    """1 - IoU against the prior prediction (mode weights from the previous frame)."""
    box = track.prediction.prior_hybrid()[:MEAS_DIM]
    return 1.0 - iou_3d(_det_array(detection), box)


def cost_matrix(detections: Sequence, tracks: Sequence, metric: Metric | str, mm: MeasurementModel,
                params: AssociationParams = AssociationParams(),
                mask: np.ndarray | None = None) -> np.ndarray:
    """Detections x tracks cost matrix; pairs failing the gate hold ``INFEASIBLE``."""
    metric = Metric(metric)
    if mask is None:
        mask = gate(detections, tracks, mm, params)
    C = np.full(mask.shape, INFEASIBLE)
    if metric is Metric.IMM_POSTERIOR:
        p_idx, q_idx = np.nonzero(mask)
        if p_idx.size:
            zs = np.array([_det_array(detections[p]) for p in p_idx])
            C[p_idx, q_idx] = _posterior_costs(zs, [tracks[q].prediction for q in q_idx], mm, params)
        return C
    for p, q in zip(*np.nonzero(mask)):
        det, trk = detections[p], tracks[q]
        if metric.uses_iou:
            c = iou_cost(det, trk)
            if 1.0 - c < params.iou_min:
                continue
        else:
            c = prior_residual_cost(det, trk, params)
        C[p, q] = c
    return C


def solve_assignment(costs) -> AssociationResult:
    """Minimum-cost matching that never uses an infeasible entry.

    ``costs`` is M x N; entries that are non-finite or >= ``INFEASIBLE`` are
    forbidden. Among matchings, the number of feasible pairs is maximized first.
    """
    C = np.array(costs, dtype=float, copy=True)
    if C.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    M, N = C.shape
    feasible = np.isfinite(C) & (C < INFEASIBLE)
    C[~feasible] = INFEASIBLE
    rows = np.flatnonzero(feasible.any(axis=1))
    cols = np.flatnonzero(feasible.any(axis=0))
    matches: list[tuple[int, int]] = []
    if rows.size and cols.size:
        sub = C[np.ix_(rows, cols)]
        r, c = linear_sum_assignment(sub)
        for i, j in zip(r, c):
            if feasible[rows[i], cols[j]]:
                matches.append((int(rows[i]), int(cols[j])))
    matches.sort()
    md = {p for p, _ in matches}
    mt = {q for _, q in matches}
    return AssociationResult(
        matches=matches,
        unmatched_detections=[p for p in range(M) if p not in md],
        unmatched_tracks=[q for q in range(N) if q not in mt],
    )


def assignment_cost(costs, result: AssociationResult) -> float:
    C = np.asarray(costs, dtype=float)
    return float(sum(C[p, q] for p, q in result.matches))
