"""Deterministic-policy gradient over the dwell-allocation box [0, t0]^n.

Deterministic actor with a sigmoid output layer scaled to the box,
single critic, target networks for both, and additive Gaussian
exploration noise whose scale the training loop decays over time.
"""

from __future__ import annotations

import numpy as np

from .nets import Adam, Mlp, soft_update
from .sac import UpdateStats, featurize


class DdpgAgent:
    """Off-policy deterministic actor-critic."""

    kind = "ddpg"

    def __init__(
        self,
        obs_dim: int,
        action_dim: int,
        t0: float,
        seed: int = 0,
        *,
        discount: float = 0.9,
        lr: float = 1e-4,
        rho: float = 0.005,
        noise_std: float = 0.1,
        actor_hidden: tuple = (256, 128),
        critic_hidden: tuple = (100, 100),
    ):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.n_slots = (obs_dim - 2) // 2
        self.t0 = float(t0)
        self.discount = float(discount)
        self.rho = float(rho)
        self.noise_std = float(noise_std)  # as a fraction of t0
        ss = np.random.SeedSequence(seed)
        init_ss, policy_ss = ss.spawn(2)
        init_rng = np.random.default_rng(init_ss)
        self.policy_rng = np.random.default_rng(policy_ss)

        self.actor = Mlp([obs_dim, *actor_hidden, action_dim], init_rng, head="sigmoid")
        self.critic = Mlp([obs_dim + action_dim, *critic_hidden, 1], init_rng)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.actor_opt = Adam(self.actor.parameters(), lr=lr)
        self.critic_opt = Adam(self.critic.parameters(), lr=lr)

    # -- policy --------------------------------------------------------------

    def act(self, obs: np.ndarray, explore: bool = True) -> np.ndarray:
        feats = featurize(obs, self.n_slots, self.t0)
        a = self.actor.forward(feats) * self.t0
        if explore and self.noise_std > 0:
            a = a + self.noise_std * self.t0 * self.policy_rng.standard_normal(a.shape)
        return np.clip(a, 0.0, self.t0)

    # -- learning ------------------------------------------------------------

    def update(self, batch: dict) -> UpdateStats:
        feats = featurize(batch["obs"], self.n_slots, self.t0)
        next_feats = featurize(batch["next_obs"], self.n_slots, self.t0)
        rewards = batch["rewards"][:, None]
        actions = batch["actions"]
        b = feats.shape[0]

        a_n = self.actor_target.forward(next_feats) * self.t0
        x_n = np.concatenate([next_feats, a_n], axis=1)
        y = rewards + self.discount * self.critic_target.forward(x_n)

        x = np.concatenate([feats, actions], axis=1)
        pred, cache = self.critic.forward_cache(x)
        err = pred - y
        critic_loss = float(np.mean(err**2))
        grads, _ = self.critic.backward(cache, 2.0 * err / b)
        self.critic_opt.step(self.critic.parameters(), grads)

        actor_loss, a_grads = self.actor_objective_grads(feats)
        self.actor_opt.step(self.actor.parameters(), a_grads)

        soft_update(self.actor_target, self.actor, self.rho)
        soft_update(self.critic_target, self.critic, self.rho)

        return UpdateStats(critic_loss, actor_loss, 0.0)

    def actor_objective_grads(self, feats: np.ndarray):
        """Loss -mean Q(s, pi(s)) with its exact actor-parameter gradient.

        Chains -dQ/da through the t0 scaling; the sigmoid layer's own
        derivative is handled inside Mlp.backward. The critic is held fixed.
        """
        b = feats.shape[0]
        a_pi, actor_cache = self.actor.forward_cache(feats)
        xa = np.concatenate([feats, a_pi * self.t0], axis=1)
        q_pi, critic_cache = self.critic.forward_cache(xa)
        _, gx = self.critic.backward(critic_cache, np.ones_like(q_pi))
        dq_da = gx[:, self.obs_dim :]
        upstream = -dq_da * self.t0 / b
        grads, _ = self.actor.backward(actor_cache, upstream)
        return float(-np.mean(q_pi)), grads

    # -- persistence -----------------------------------------------------------

    def get_state(self) -> dict:
        return {
            "actor": self.actor.get_state(),
            "critic": self.critic.get_state(),
            "actor_target": self.actor_target.get_state(),
            "critic_target": self.critic_target.get_state(),
        }

    def set_state(self, state: dict) -> None:
        self.actor.set_state(state["actor"])
        self.critic.set_state(state["critic"])
        self.actor_target.set_state(state["actor_target"])
        self.critic_target.set_state(state["critic_target"])
