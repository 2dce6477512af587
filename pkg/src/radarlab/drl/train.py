"""Online training loop shared by both agents, plus evaluation rollouts and
parameter checkpoints."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..env import CdrlEnv, episode_objectives, run_episode
from ..scanning import gamma
from .ddpg import DdpgAgent
from .replay import EnvTransition, ReplayBuffer
from .sac import SacAgent

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainSchedule:
    """Step counts and sampling sizes for one training run."""

    steps: int = 12000
    warmup: int = 1000
    batch_size: int = 128
    buffer_capacity: int = 100_000
    noise_final: float = 0.01  # deterministic-actor exploration floor (fraction of t0)
    reward_clip: float = 100.0  # applied after scaling, on stored transitions only

    def __post_init__(self):
        if self.steps < 0 or self.warmup < 0 or self.batch_size <= 0:
            raise ValueError("schedule requires steps >= 0, warmup >= 0, batch_size > 0")


@dataclass
class TrainingResult:
    curves: dict = field(default_factory=dict)
    episodes: int = 0
    reward_scale: float = 1.0

    def curve_rows(self):
        """CSV rows: step,reward,violation,lambda,critic_loss,actor_loss."""
        c = self.curves
        for i in range(len(c["step"])):
            yield (
                int(c["step"][i]),
                c["reward"][i],
                c["violation"][i],
                c["lambda"][i],
                c["critic_loss"][i],
                c["actor_loss"][i],
            )


def reward_scale_for(env: CdrlEnv) -> float:
    """Normalization applied to rewards before they enter the replay buffer.

    The scanning term grows linearly in the weight beta while tracking costs
    do not, so runs are normalized by the best attainable scanning payoff
    (beta times the full-cycle search gain), floored so beta=0 runs still
    divide by a cost-sized constant.
    """
    g_max = gamma(env.radar, env.detection, env.config.cycle_duration)
    return max(1000.0, env.params.beta * g_max)


def build_agent(kind: str, env: CdrlEnv, seed: int = 0, **kwargs):
    t0 = env.config.cycle_duration
    if kind == "sac":
        return SacAgent(env.obs_dim, env.action_dim, t0, seed, **kwargs)
    if kind == "ddpg":
        return DdpgAgent(env.obs_dim, env.action_dim, t0, seed, **kwargs)
    raise ValueError(f"unknown agent kind {kind!r}")


def train(agent, env: CdrlEnv, schedule: TrainSchedule, seed: int = 0) -> TrainingResult:
    """Interleave environment steps, replay writes, and agent updates.

    Episode resets walk through scenario offsets 1, 2, ... so that offset 0
    stays untouched for evaluation. Rewards are stored scaled and clipped;
    the returned curves keep the raw (unscaled) rewards.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(17,)))
    buffer = ReplayBuffer(schedule.buffer_capacity, env.obs_dim, env.action_dim)
    scale = reward_scale_for(env)
    t0 = env.config.cycle_duration

    n = schedule.steps
    curves = {
        "step": np.arange(n),
        "reward": np.zeros(n),
        "violation": np.zeros(n),
        "lambda": np.zeros(n),
        "critic_loss": np.zeros(n),
        "actor_loss": np.zeros(n),
    }
    noise_initial = getattr(agent, "noise_std", None)

    episode = 0
    obs = env.reset(1 + episode)
    for step in range(n):
        if noise_initial is not None and n > 1:
            frac = step / (n - 1)
            agent.noise_std = noise_initial + frac * (schedule.noise_final - noise_initial)
        if step < schedule.warmup:
            action = rng.uniform(0.0, t0, env.action_dim)
        else:
            action = agent.act(obs, explore=True)
        next_obs, breakdown, done = env.step(action)
        stored = float(np.clip(breakdown.reward / scale, -schedule.reward_clip, schedule.reward_clip))
        buffer.push(EnvTransition(obs, action, stored, next_obs, breakdown.violation))

        curves["reward"][step] = breakdown.reward
        curves["violation"][step] = breakdown.violation
        curves["lambda"][step] = env.lam
        if step >= schedule.warmup and len(buffer) >= schedule.batch_size:
            stats = agent.update(buffer.sample(rng, schedule.batch_size))
            curves["critic_loss"][step] = stats.critic_loss
            curves["actor_loss"][step] = stats.actor_loss

        obs = next_obs
        if done:
            episode += 1
            obs = env.reset(1 + episode)
    return TrainingResult(curves=curves, episodes=episode, reward_scale=scale)


def evaluate(agent, env: CdrlEnv, seed_offset: int = 0):
    """Roll one greedy episode; returns (obj_t, obj_s, history)."""
    history = run_episode(env, lambda obs, _env: agent.act(obs, explore=False), seed_offset)
    obj_t, obj_s = episode_objectives(history)
    return obj_t, obj_s, history


# -- checkpoints ---------------------------------------------------------------


def save_checkpoint(path, agent, config_hash: str = "") -> None:
    """Versioned parameter dump: one array per layer plus a JSON header."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "kind": agent.kind,
        "obs_dim": agent.obs_dim,
        "action_dim": agent.action_dim,
        "t0": agent.t0,
        "discount": agent.discount,
        "rho": agent.rho,
        "config_hash": config_hash,
    }
    if agent.kind == "sac":
        meta["alpha"] = agent.alpha
    else:
        meta["noise_std"] = agent.noise_std
    arrays = {}
    for net_name, state in agent.get_state().items():
        for i, arr in enumerate(state):
            arrays[f"{net_name}.{i}"] = arr
    np.savez_compressed(path, meta=json.dumps(meta, sort_keys=True), **arrays)


def load_checkpoint(path):
    """Rebuild an agent from `save_checkpoint` output."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        if meta["kind"] == "sac":
            agent = SacAgent(
                meta["obs_dim"],
                meta["action_dim"],
                meta["t0"],
                alpha=meta["alpha"],
                discount=meta["discount"],
                rho=meta["rho"],
            )
        else:
            agent = DdpgAgent(
                meta["obs_dim"],
                meta["action_dim"],
                meta["t0"],
                discount=meta["discount"],
                rho=meta["rho"],
                noise_std=meta["noise_std"],
            )
        state = {}
        for key in data.files:
            if key == "meta":
                continue
            net_name, idx = key.rsplit(".", 1)
            state.setdefault(net_name, {})[int(idx)] = data[key]
    agent.set_state(
        {name: [layers[i] for i in sorted(layers)] for name, layers in state.items()}
    )
    return agent, meta
