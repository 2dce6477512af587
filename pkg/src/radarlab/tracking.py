"""Per-target EKF tracks, the dwell-dependent tracking cost, and 3-of-4
track initialization with global-nearest-neighbor association.

Dwell time buys measurement quality: R(tau) = (tau_ref / tau) * R0, so a
dwell equal to tau_ref reproduces the baseline noise and longer dwells beat
it. A zero dwell means no measurement at all (predict only).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .scenario import (
    Measurement,
    MotionModel,
    measurement_function,
    measurement_jacobian,
    wrap_angle,
)

PROJECTION = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])

# Pairing cost assigned to gate-infeasible pairs; large enough that any
# assignment avoids them whenever a feasible alternative exists.
_INFEASIBLE = 1e12


class TrackStatus(enum.Enum):
    INITIALIZING = "initializing"
    CONFIRMED = "confirmed"
    DROPPED = "dropped"


@dataclass
class Track:
    """EKF state estimate for one target."""

    target_id: int
    mean: np.ndarray
    covariance: np.ndarray
    status: TrackStatus = TrackStatus.CONFIRMED
    slot: int = 0
    misses: int = 0

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.covariance = np.asarray(self.covariance, dtype=float)


@dataclass(frozen=True)
class DwellNoiseModel:
    """Measurement covariance as a function of dwell time."""

    baseline_cov: np.ndarray
    reference_dwell: float

    def effective_cov(self, dwell: float) -> np.ndarray:
        if dwell <= 0:
            raise ValueError(f"dwell must be positive for a measurement, got {dwell}")
        return (self.reference_dwell / dwell) * np.asarray(self.baseline_cov, dtype=float)


class RadarObservation:
    """Range/azimuth observation model with azimuth innovation wrapping."""

    @staticmethod
    def h(state):
        return measurement_function(state)

    @staticmethod
    def jacobian(state):
        return measurement_jacobian(state)

    @staticmethod
    def innovation(z_vec, predicted):
        nu = z_vec - predicted
        nu[1] = wrap_angle(nu[1])
        return nu


class LinearPositionObservation:
    """Direct (x, y) observation; used to cross-check the EKF against the
    closed-form linear Kalman update."""

    @staticmethod
    def h(state):
        return PROJECTION @ np.asarray(state, dtype=float)

    @staticmethod
    def jacobian(state):
        return PROJECTION.copy()

    @staticmethod
    def innovation(z_vec, predicted):
        return z_vec - predicted


def ekf_predict(track: Track, model: MotionModel) -> Track:
    """Time update: mean' = F mean, P' = F P F^T + Q (symmetrized)."""
    if track.status is TrackStatus.DROPPED:
        raise ValueError("cannot predict a dropped track")
    f = model.transition_matrix
    p = f @ track.covariance @ f.T + model.process_noise_cov
    return replace(track, mean=f @ track.mean, covariance=0.5 * (p + p.T))


def ekf_update(
    track: Track,
    z: Measurement,
    noise: DwellNoiseModel,
    dwell: float,
    observation=RadarObservation,
) -> Track:
    """Measurement update with dwell-scaled noise and Joseph-form covariance."""
    if track.status is TrackStatus.DROPPED:
        raise ValueError("cannot update a dropped track")
    r = noise.effective_cov(dwell)
    h = observation.jacobian(track.mean)
    nu = observation.innovation(z.vector, observation.h(track.mean))
    p = track.covariance
    s = h @ p @ h.T + r
    # K = P H^T S^-1 via a solve against the symmetric innovation covariance.
    k = np.linalg.solve(s, h @ p).T
    mean = track.mean + k @ nu
    ikh = np.eye(4) - k @ h
    post = ikh @ p @ ikh.T + k @ r @ k.T
    return replace(track, mean=mean, covariance=0.5 * (post + post.T), misses=0)


def tracking_cost(track: Track) -> float:
    """Position-block covariance trace: trace(E P E^T) = P[0,0] + P[1,1]."""
    return float(track.covariance[0, 0] + track.covariance[1, 1])


def gnn_associate(detections, buffers, threshold: float = 500.0):
    """Globally-nearest pairing of detections to init buffers.

    Minimizes total Cartesian distance over all pairings that keep every
    matched pair inside the gate, preferring more matches over fewer (the
    standard assignment-problem formulation of GNN). Returns sorted
    (detection_index, buffer_index) pairs.
    """
    if not detections or not buffers:
        return []
    cost = np.empty((len(detections), len(buffers)))
    for i, det in enumerate(detections):
        dp = det.position()
        for j, buf in enumerate(buffers):
            d = float(np.hypot(*(dp - buf.last_position)))
            cost[i, j] = d if d <= threshold else _INFEASIBLE
    rows, cols = linear_sum_assignment(cost)
    return sorted(
        (int(i), int(j)) for i, j in zip(rows, cols) if cost[i, j] < _INFEASIBLE
    )


@dataclass
class InitBuffer:
    """Tentative track: hit/miss history over up to 4 successive scans."""

    last_position: np.ndarray
    threshold: float = 500.0
    hits: int = 0
    scans: int = 0
    source_id: int | None = None
    slot: int = -1

    def __post_init__(self):
        self.last_position = np.asarray(self.last_position, dtype=float)


def update_init_logic(buffer: InitBuffer, scan_outcome) -> str:
    """Advance the 3-of-4 logic one scan.

    `scan_outcome` is the associated Measurement for a hit or None for a miss.
    Returns "confirmed" once 3 hits accumulate within the 4-scan window,
    "discarded" as soon as 3 hits become unreachable, else "pending".
    """
    buffer.scans += 1
    if scan_outcome is not None:
        buffer.hits += 1
        buffer.last_position = scan_outcome.position()
        buffer.source_id = scan_outcome.source_id
    if buffer.hits >= 3:
        return "confirmed"
    if buffer.hits + (4 - buffer.scans) < 3:
        return "discarded"
    return "pending"


def seed_track(
    buffer: InitBuffer,
    init_cov: np.ndarray,
    slot: int | None = None,
) -> Track:
    """Confirmed buffer -> new track at the last detection, zero velocity."""
    mean = np.array([buffer.last_position[0], buffer.last_position[1], 0.0, 0.0])
    return Track(
        target_id=buffer.source_id if buffer.source_id is not None else -1,
        mean=mean,
        covariance=np.asarray(init_cov, dtype=float).copy(),
        status=TrackStatus.CONFIRMED,
        slot=buffer.slot if slot is None else slot,
    )


DEFAULT_INIT_COV = np.diag([64.0, 64.0, 25.0, 25.0])


class TrackInitiator:
    """Runs GNN association plus 3-of-4 logic over successive scans."""

    def __init__(self, threshold: float = 500.0, init_cov=DEFAULT_INIT_COV):
        self.threshold = threshold
        self.init_cov = np.asarray(init_cov, dtype=float)
        self.buffers: list[InitBuffer] = []

    def process_scan(self, detections) -> list[Track]:
        """Feed one scan's detections; returns tracks confirmed this scan."""
        pairs = gnn_associate(detections, self.buffers, self.threshold)
        matched_dets = {i for i, _ in pairs}
        outcome_by_buffer = {j: detections[i] for i, j in pairs}

        confirmed, survivors = [], []
        for j, buf in enumerate(self.buffers):
            verdict = update_init_logic(buf, outcome_by_buffer.get(j))
            if verdict == "confirmed":
                confirmed.append(seed_track(buf, self.init_cov))
            elif verdict == "pending":
                survivors.append(buf)
        self.buffers = survivors

        for i, det in enumerate(detections):
            if i in matched_dets:
                continue
            buf = InitBuffer(
                last_position=det.position(),
                threshold=self.threshold,
                source_id=det.source_id,
            )
            update_init_logic(buf, det)
            self.buffers.append(buf)
        return confirmed
