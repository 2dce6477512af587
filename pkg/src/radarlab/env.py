"""Constrained MDP over the radar time budget.

Each decision slot the agent hands out dwell times for up to N target
slots; whatever the dwells leave of the cycle becomes scan time. Utility
trades total tracking cost against beta-weighted coverage, the time-budget
constraint sum(tau)/T0 <= theta_max enters the reward through a Lagrangian
penalty, and the dual variable climbs on violation after every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scanning import DetectionSpec, RadarParams, detect_new_targets, gamma
from .scenario import MotionModel, Scenario, ScenarioConfig, measure
from .tracking import (
    DEFAULT_INIT_COV,
    DwellNoiseModel,
    TrackInitiator,
    TrackStatus,
    ekf_predict,
    ekf_update,
    tracking_cost,
)


@dataclass
class EnvParams:
    """Reward shaping and constraint constants."""

    beta: float = 0.0
    lambda0: float = 5000.0
    alpha_lambda: float = 15000.0
    theta_max: float = 0.9
    beta_scale: float = 1e5
    cost_ceiling: float = 1e6
    gate: float = 500.0
    reference_dwell: float | None = None  # default T0 * theta_max / N
    baseline_range_var: float = 16.0
    baseline_azimuth_var: float = 1e-6

    def baseline_cov(self) -> np.ndarray:
        return np.diag([self.baseline_range_var, self.baseline_azimuth_var])


@dataclass
class Allocation:
    """Per-cycle dwell times plus the implied (or explicit) scan time."""

    dwells: np.ndarray
    t0: float
    scan_time: float | None = None

    def __post_init__(self):
        self.dwells = np.asarray(self.dwells, dtype=float)

    @property
    def scan(self) -> float:
        if self.scan_time is not None:
            return float(self.scan_time)
        return max(0.0, self.t0 - float(self.dwells.sum()))


@dataclass
class RewardBreakdown:
    """One step's reward accounting; reward = utility - penalty exactly."""

    utility: float
    tracking_term: float
    scanning_term: float
    penalty: float
    violation: float
    gamma: float

    @property
    def reward(self) -> float:
        return self.utility - self.penalty


@dataclass
class EpisodeHistory:
    """Per-slot records accumulated over one episode."""

    n_slots: int
    t0: float = 0.0
    dwells: list = field(default_factory=list)
    scan_times: list = field(default_factory=list)
    gammas: list = field(default_factory=list)
    costs: list = field(default_factory=list)
    utilities: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    lambdas: list = field(default_factory=list)
    track_rows: list = field(default_factory=list)  # (slot, id, cost, trace_P, dwell)

    def __len__(self):
        return len(self.rewards)

    def step_rows(self):
        """CSV rows: slot,sum_dwell_frac,lambda,utility,reward,gamma,cost_1..N."""
        for t in range(len(self.rewards)):
            frac = float(np.sum(self.dwells[t])) / self.t0 if self.t0 else 0.0
            yield (
                t,
                frac,
                self.lambdas[t],
                self.utilities[t],
                self.rewards[t],
                self.gammas[t],
                *self.costs[t],
            )


def episode_objectives(history: EpisodeHistory) -> tuple[float, float]:
    """Time-averaged (-sum of costs, Gamma) over a completed episode."""
    if len(history) == 0:
        raise ValueError("cannot compute objectives of an empty episode history")
    total_cost = np.asarray(history.costs).sum(axis=1)
    return float(-total_cost.mean()), float(np.mean(history.gammas))


def equal_allocation_policy(
    active_slots, max_targets: int, t0: float = 2.5, theta_max: float = 0.9
) -> Allocation:
    """Split the full tracking budget evenly over the active target slots."""
    dwells = np.zeros(max_targets)
    if len(active_slots):
        share = theta_max * t0 / len(active_slots)
        for slot in active_slots:
            dwells[slot] = share
    return Allocation(dwells=dwells, t0=t0)


class CdrlEnv:
    """Sequential environment tying simulation, tracking, and scanning
    together under the Lagrangian reward."""

    def __init__(
        self,
        scenario_config: ScenarioConfig,
        radar: RadarParams,
        detection: DetectionSpec,
        params: EnvParams,
    ):
        self.config = scenario_config
        self.radar = radar
        self.detection = detection
        self.params = params
        n = scenario_config.max_targets
        t0 = scenario_config.cycle_duration
        ref = params.reference_dwell
        self.noise = DwellNoiseModel(
            baseline_cov=params.baseline_cov(),
            reference_dwell=ref if ref is not None else t0 * params.theta_max / n,
        )
        self.motion = MotionModel.constant_velocity(t0, scenario_config.maneuver_intensity)
        self.obs_dim = 2 * n + 2
        self.action_dim = n
        self.scenario: Scenario | None = None
        self.done = True

    # -- lifecycle ---------------------------------------------------------

    def reset(self, seed_offset: int = 0) -> np.ndarray:
        self.scenario = Scenario(self.config, seed_offset)
        self.initiator = TrackInitiator(threshold=self.params.gate, init_cov=DEFAULT_INIT_COV)
        self.tracks = {}
        self.lam = self.params.lambda0
        self.slot = 0
        self.clipped_actions = 0
        self.done = False
        self.history = EpisodeHistory(
            n_slots=self.config.max_targets, t0=self.config.cycle_duration
        )
        return self._observation(
            np.zeros(self.config.max_targets), np.zeros(self.config.max_targets)
        )

    def confirmed_slots(self) -> list[int]:
        return sorted(self.tracks.keys())

    def _observation(self, costs, dwells) -> np.ndarray:
        lam_scale = self.params.lambda0 if self.params.lambda0 > 0 else 1.0
        return np.concatenate(
            [costs, dwells, [self.lam / lam_scale, self.params.beta / self.params.beta_scale]]
        )

    # -- dynamics ----------------------------------------------------------

    def step(self, action) -> tuple[np.ndarray, RewardBreakdown, bool]:
        if self.done:
            raise RuntimeError("step() called on a finished episode; reset() first")
        if not isinstance(action, Allocation):
            action = Allocation(dwells=action, t0=self.config.cycle_duration)
        t = self.slot
        n = self.config.max_targets
        t0 = self.config.cycle_duration

        requested = np.asarray(action.dwells, dtype=float)
        clipped = np.clip(requested, 0.0, t0)
        if np.any(clipped != requested):
            self.clipped_actions += 1

        truths = {tr.slot: tr for tr in self.scenario.truth_at(t)}

        # Dwells only apply to slots holding a confirmed track.
        eff = np.zeros(n)
        for slot in self.tracks:
            eff[slot] = clipped[slot]

        costs = np.zeros(n)
        drops = []
        for slot, track in self.tracks.items():
            track = ekf_predict(track, self.motion)
            truth = truths.get(slot)
            dwell = eff[slot]
            if dwell > 0.0:
                if truth is not None and truth.id == track.target_id:
                    z = measure(
                        truth.state,
                        self.noise.effective_cov(dwell),
                        unit=self.scenario.meas_units[t, slot],
                        source_id=truth.id,
                        slot=t,
                    )
                    track = ekf_update(track, z, self.noise, dwell)
                else:
                    track.misses += 1
            cost = tracking_cost(track)
            costs[slot] = cost
            self.history.track_rows.append(
                (t, track.target_id, cost, float(np.trace(track.covariance)), dwell)
            )
            if cost > self.params.cost_ceiling or track.misses >= 4:
                track.status = TrackStatus.DROPPED
                drops.append(slot)
            else:
                self.tracks[slot] = track
        for slot in drops:
            del self.tracks[slot]

        # Scanning with whatever the dwells left of the cycle (or an explicit
        # scan time when the action carries one; the remainder idles).
        if action.scan_time is not None:
            requested_scan = min(max(0.0, float(action.scan_time)), t0)
            tau_s = min(requested_scan, max(0.0, t0 - float(eff.sum())))
        else:
            tau_s = max(0.0, t0 - float(eff.sum()))
        tracked_ids = {tr.target_id for tr in self.tracks.values()}
        detections = detect_new_targets(
            truths.values(),
            tracked_ids,
            self.radar,
            self.detection,
            tau_s,
            baseline_cov=self.noise.baseline_cov,
            detect_draws=self.scenario.detect_uniforms[t],
            meas_units=self.scenario.meas_units[t],
            slot_index=t,
        )
        for new_track in self.initiator.process_scan([m for _, m in detections]):
            slot = self.scenario.record_slots[new_track.target_id]
            new_track.slot = slot
            self.tracks[slot] = new_track  # evicts a stale track on slot reuse

        g = gamma(self.radar, self.detection, tau_s)
        tracking_term = -float(costs.sum())
        scanning_term = self.params.beta * g
        violation = float(eff.sum()) / t0 - self.params.theta_max
        breakdown = RewardBreakdown(
            utility=tracking_term + scanning_term,
            tracking_term=tracking_term,
            scanning_term=scanning_term,
            penalty=self.lam * violation,
            violation=violation,
            gamma=g,
        )
        self.lam = max(0.0, self.lam + self.params.alpha_lambda * violation)

        h = self.history
        h.dwells.append(eff)
        h.scan_times.append(tau_s)
        h.gammas.append(g)
        h.costs.append(costs)
        h.utilities.append(breakdown.utility)
        h.rewards.append(breakdown.reward)
        h.violations.append(violation)
        h.lambdas.append(self.lam)

        self.slot += 1
        self.done = self.slot >= self.config.episode_length
        return self._observation(costs, eff), breakdown, self.done


def run_episode(env: CdrlEnv, policy, seed_offset: int = 0) -> EpisodeHistory:
    """Roll one full episode under `policy(obs, env) -> Allocation | array`."""
    obs = env.reset(seed_offset)
    done = False
    while not done:
        obs, _, done = env.step(policy(obs, env))
    return env.history
