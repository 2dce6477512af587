"""Ground-truth target simulation and the radar measurement model.

Targets follow a constant-velocity model driven by white-noise acceleration.
The radar observes range and azimuth. Everything is seeded: a scenario built
twice from the same (config, seed_offset) produces byte-identical truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(theta):
    """Wrap an angle (radians, scalar or array) into (-pi, pi]."""
    return np.pi - np.mod(np.pi - theta, TWO_PI)


def build_transition(dt: float) -> np.ndarray:
    """Constant-velocity transition matrix for state [x, y, vx, vy]."""
    f = np.eye(4)
    f[0, 2] = dt
    f[1, 3] = dt
    return f


def build_noise_gain(dt: float) -> np.ndarray:
    """Gain mapping a 2-vector of axis accelerations to a state increment."""
    return np.array(
        [
            [0.5 * dt * dt, 0.0],
            [0.0, 0.5 * dt * dt],
            [dt, 0.0],
            [0.0, dt],
        ]
    )


def build_process_noise(dt: float, q: float) -> np.ndarray:
    """White-noise-acceleration process covariance for a CV model.

    Equals q * G @ G.T with G the acceleration gain, hence symmetric PSD by
    construction; the zero matrix when dt = 0 or q = 0.
    """
    if dt < 0 or q < 0:
        raise ValueError(f"dt and q must be non-negative, got dt={dt}, q={q}")
    g = build_noise_gain(dt)
    return q * (g @ g.T)


@dataclass(frozen=True)
class MotionModel:
    """Discrete-time CV motion model with maneuver intensity q (m/s^2)^2."""

    dt: float
    maneuver_intensity: float
    transition_matrix: np.ndarray
    process_noise_cov: np.ndarray
    noise_gain: np.ndarray

    @classmethod
    def constant_velocity(cls, dt: float, q: float) -> "MotionModel":
        return cls(
            dt=dt,
            maneuver_intensity=q,
            transition_matrix=build_transition(dt),
            process_noise_cov=build_process_noise(dt, q),
            noise_gain=build_noise_gain(dt),
        )


@dataclass
class TargetTruth:
    """Ground-truth kinematics of one target.

    `id` is unique over the episode; `slot` is the observation/action slot the
    target occupies (slots may be reused by later targets after despawn).
    """

    id: int
    spawn_time: int
    despawn_time: int
    state: np.ndarray
    slot: int = 0

    def __post_init__(self):
        if self.spawn_time >= self.despawn_time:
            raise ValueError(
                f"spawn_time {self.spawn_time} must precede despawn_time {self.despawn_time}"
            )
        self.state = np.asarray(self.state, dtype=float)
        if self.state.shape != (4,) or not np.all(np.isfinite(self.state)):
            raise ValueError("state must be a finite 4-vector [x, y, vx, vy]")


def step_truth(target: TargetTruth, model: MotionModel, rng=None, *, impulse=None) -> TargetTruth:
    """Advance one target one cycle: x' = F x + G a, a ~ N(0, q I).

    `impulse`, when given, supplies the acceleration draw in standard-normal
    units (scaled by sqrt(q) here); otherwise `rng` is consulted. With both
    omitted the propagation is noise-free.
    """
    x = model.transition_matrix @ target.state
    q = model.maneuver_intensity
    if q > 0.0:
        if impulse is None and rng is not None:
            impulse = rng.standard_normal(2)
        if impulse is not None:
            x = x + model.noise_gain @ (math.sqrt(q) * np.asarray(impulse, dtype=float))
    return replace(target, state=x)


@dataclass
class Measurement:
    """One range/azimuth observation (or a generic 2-vector for linear tests)."""

    range_m: float
    azimuth: float
    noise_cov: np.ndarray
    source_id: int | None = None
    slot: int = -1

    def __post_init__(self):
        self.noise_cov = np.asarray(self.noise_cov, dtype=float)
        if self.noise_cov.shape != (2, 2) or np.any(np.diag(self.noise_cov) <= 0):
            raise ValueError("noise_cov must be 2x2 with strictly positive diagonal")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.range_m, self.azimuth])

    def position(self) -> np.ndarray:
        """Cartesian (x, y) implied by the measurement."""
        return np.array(
            [self.range_m * math.cos(self.azimuth), self.range_m * math.sin(self.azimuth)]
        )


def measurement_function(state) -> np.ndarray:
    """h(x) = [range, azimuth] of the position components."""
    x, y = float(state[0]), float(state[1])
    if x == 0.0 and y == 0.0:
        raise ValueError("measurement undefined for a target at the radar origin")
    return np.array([math.hypot(x, y), math.atan2(y, x)])


def measurement_jacobian(state) -> np.ndarray:
    """Jacobian of h at `state`: rows d(range)/dx and d(azimuth)/dx."""
    x, y = float(state[0]), float(state[1])
    if x == 0.0 and y == 0.0:
        raise ValueError("measurement Jacobian undefined at the radar origin")
    r2 = x * x + y * y
    r = math.sqrt(r2)
    return np.array(
        [
            [x / r, y / r, 0.0, 0.0],
            [-y / r2, x / r2, 0.0, 0.0],
        ]
    )


def measure(state, noise_cov, rng=None, *, unit=None, source_id=None, slot=-1) -> Measurement:
    """Observe a state through h with additive N(0, noise_cov) noise.

    `unit`, when given, supplies the two noise draws in standard-normal units
    (common-random-number evaluation); otherwise `rng` is consulted. Azimuth is
    wrapped into (-pi, pi]; range is floored at zero.
    """
    z = measurement_function(state)
    cov = np.asarray(noise_cov, dtype=float)
    if unit is None and rng is not None:
        unit = rng.standard_normal(2)
    if unit is not None:
        z = z + np.sqrt(np.diag(cov)) * np.asarray(unit, dtype=float)
    return Measurement(
        range_m=max(0.0, float(z[0])),
        azimuth=float(wrap_angle(z[1])),
        noise_cov=cov,
        source_id=source_id,
        slot=slot,
    )


@dataclass(frozen=True)
class SpawnRecord:
    """Scripted lifetime of one target: [spawn, despawn) with initial state."""

    spawn: int
    despawn: int
    x: float
    y: float
    vx: float
    vy: float


@dataclass
class ScenarioConfig:
    """Scenario shape: slot count, episode length, and spawn generation.

    When `schedule` is provided it is used verbatim (slots assigned greedily);
    otherwise `n_spawns` records are drawn from the radius/speed/lifetime
    ranges. Targets also despawn on leaving `arena_radius`.
    """

    max_targets: int = 3
    episode_length: int = 2000
    cycle_duration: float = 2.5
    maneuver_intensity: float = 16.0
    arena_radius: float = 50e3
    rng_seed: int = 0
    schedule: tuple[SpawnRecord, ...] | None = None
    n_spawns: int = 6
    radius_range: tuple[float, float] = (3e3, 9e3)
    speed_range: tuple[float, float] = (5.0, 60.0)
    spawn_time_range: tuple[int, int] = (0, 1200)
    lifetime_range: tuple[int, int] = (300, 600)

    def __post_init__(self):
        if self.episode_length <= 0:
            raise ValueError("episode_length must be positive")
        if self.cycle_duration <= 0:
            raise ValueError("cycle_duration must be positive")
        if self.max_targets < 1:
            raise ValueError("max_targets must be >= 1")
        if self.schedule is not None:
            self.schedule = tuple(
                rec if isinstance(rec, SpawnRecord) else SpawnRecord(*rec) for rec in self.schedule
            )


def _random_schedule(config: ScenarioConfig, rng) -> tuple[SpawnRecord, ...]:
    records = []
    for _ in range(config.n_spawns):
        spawn = int(rng.integers(config.spawn_time_range[0], config.spawn_time_range[1] + 1))
        life = int(rng.integers(config.lifetime_range[0], config.lifetime_range[1] + 1))
        despawn = min(spawn + life, config.episode_length)
        if despawn <= spawn:
            continue
        radius = rng.uniform(*config.radius_range)
        bearing = rng.uniform(-math.pi, math.pi)
        speed = rng.uniform(*config.speed_range)
        heading = rng.uniform(-math.pi, math.pi)
        records.append(
            SpawnRecord(
                spawn=spawn,
                despawn=despawn,
                x=radius * math.cos(bearing),
                y=radius * math.sin(bearing),
                vx=speed * math.cos(heading),
                vy=speed * math.sin(heading),
            )
        )
    return tuple(sorted(records, key=lambda r: (r.spawn, r.despawn, r.x)))


class Scenario:
    """Precomputed ground truth for one episode.

    All randomness is drawn up front in a fixed (slot-indexed) layout, so the
    truth stream never depends on how a policy interleaves its queries.
    """

    def __init__(self, config: ScenarioConfig, seed_offset: int = 0):
        self.config = config
        self.seed_offset = seed_offset
        root = np.random.SeedSequence(entropy=config.rng_seed, spawn_key=(seed_offset,))
        schedule_ss, impulse_ss, meas_ss, detect_ss = root.spawn(4)
        if config.schedule is not None:
            schedule = config.schedule
        else:
            schedule = _random_schedule(config, np.random.default_rng(schedule_ss))
        self.records, self.record_slots = self._assign_slots(schedule)
        self._generate(np.random.default_rng(impulse_ss))
        # Exogenous measurement randomness, indexed (slot, target-slot) so that
        # draws never depend on how a policy interleaves queries. A time slot
        # uses a target's measurement units either for a tracking dwell or for
        # a scan detection, never both.
        shape = (config.episode_length, config.max_targets)
        self.meas_units = np.random.default_rng(meas_ss).standard_normal(shape + (2,))
        self.detect_uniforms = np.random.default_rng(detect_ss).uniform(size=shape)

    def _assign_slots(self, schedule):
        # Greedy slot assignment; records that find no free slot are dropped.
        free_at = [0] * self.config.max_targets
        records, slots = [], []
        for rec in schedule:
            for slot in range(self.config.max_targets):
                if free_at[slot] <= rec.spawn:
                    free_at[slot] = rec.despawn
                    records.append(rec)
                    slots.append(slot)
                    break
        return tuple(records), tuple(slots)

    def _generate(self, rng):
        cfg = self.config
        length, n = cfg.episode_length, cfg.max_targets
        model = MotionModel.constant_velocity(cfg.cycle_duration, cfg.maneuver_intensity)
        sq = math.sqrt(cfg.maneuver_intensity)
        impulses = rng.standard_normal((length, n, 2))
        self.states = np.zeros((length, n, 4))
        self.active = np.zeros((length, n), dtype=bool)
        self.ids = np.full((length, n), -1, dtype=int)
        f, g = model.transition_matrix, model.noise_gain
        for tid, (rec, slot) in enumerate(zip(self.records, self.record_slots)):
            x = np.array([rec.x, rec.y, rec.vx, rec.vy], dtype=float)
            for t in range(rec.spawn, min(rec.despawn, length)):
                if t > rec.spawn:
                    x = f @ x + g @ (sq * impulses[t, slot])
                if math.hypot(x[0], x[1]) > cfg.arena_radius:
                    break
                self.states[t, slot] = x
                self.active[t, slot] = True
                self.ids[t, slot] = tid

    def truth_at(self, slot_index: int) -> list[TargetTruth]:
        """Active targets at one time slot."""
        if not 0 <= slot_index < self.config.episode_length:
            raise IndexError(f"slot {slot_index} outside episode of length {self.config.episode_length}")
        out = []
        for slot in np.flatnonzero(self.active[slot_index]):
            tid = int(self.ids[slot_index, slot])
            rec = self.records[tid]
            out.append(
                TargetTruth(
                    id=tid,
                    spawn_time=rec.spawn,
                    despawn_time=rec.despawn,
                    state=self.states[slot_index, slot].copy(),
                    slot=int(slot),
                )
            )
        return out

    def truth_rows(self):
        """CSV rows (slot, id, x, y, vx, vy) over the whole episode."""
        for t in range(self.config.episode_length):
            for slot in np.flatnonzero(self.active[t]):
                x = self.states[t, slot]
                yield (t, int(self.ids[t, slot]), x[0], x[1], x[2], x[3])


def advance_scenario(scenario: Scenario, slot: int) -> list[TargetTruth]:
    """Spawn/despawn per schedule and return all targets active at `slot`."""
    return scenario.truth_at(slot)
