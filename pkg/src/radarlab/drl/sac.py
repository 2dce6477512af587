"""Soft actor-critic over the dwell-allocation action box [0, t0]^n.

The stochastic policy is a diagonal Gaussian squashed through tanh and
affinely mapped onto the action box; twin critics with target networks
provide the value estimate. All gradients are computed analytically with
the hand-rolled backprop in `nets` (the tanh-change-of-variables terms are
written in softplus form for numerical stability at large |u|).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nets import Adam, Mlp, soft_update, softplus

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class UpdateStats:
    critic_loss: float
    actor_loss: float
    entropy: float


def featurize(obs: np.ndarray, n_slots: int, t0: float) -> np.ndarray:
    """Compress raw observations onto O(1) scales for the networks.

    Raw layout: [costs (n), dwells (n), scaled multiplier, scaled weight].
    Costs span 0..1e6 so they are log-compressed; dwells are expressed as
    fractions of the cycle.
    """
    obs = np.asarray(obs, dtype=float)
    squeeze = obs.ndim == 1
    o = obs[None, :] if squeeze else obs
    f = np.empty_like(o)
    f[:, :n_slots] = np.log1p(np.maximum(o[:, :n_slots], 0.0)) / 10.0
    f[:, n_slots : 2 * n_slots] = o[:, n_slots : 2 * n_slots] / t0
    f[:, 2 * n_slots] = np.log1p(np.maximum(o[:, 2 * n_slots], 0.0))
    f[:, 2 * n_slots + 1] = o[:, 2 * n_slots + 1]
    return f[0] if squeeze else f


def squash(u: np.ndarray, t0: float) -> np.ndarray:
    """Map unbounded pre-actions onto the dwell box [0, t0]."""
    return (np.tanh(u) + 1.0) * (0.5 * t0)


def squashed_log_prob(u: np.ndarray, mu: np.ndarray, log_std: np.ndarray, t0: float):
    """log-density of a = squash(u) where u ~ N(mu, exp(log_std)^2).

    Uses log(1 - tanh(u)^2) = 2*(log 2 - u - softplus(-2u)) to stay finite
    for |u| up to overflow. Sums over the action dimensions (last axis).
    """
    std = np.exp(log_std)
    eps = (u - mu) / std
    gauss = -log_std - 0.5 * eps**2 - 0.5 * _LOG_2PI
    correction = np.log(t0 / 2.0) + 2.0 * (np.log(2.0) - u - softplus(-2.0 * u))
    return np.sum(gauss - correction, axis=-1)


class SacAgent:
    """Maximum-entropy off-policy learner with a fixed temperature."""

    kind = "sac"

    def __init__(
        self,
        obs_dim: int,
        action_dim: int,
        t0: float,
        seed: int = 0,
        *,
        alpha: float = 0.025,
        discount: float = 0.9,
        lr: float = 1e-4,
        rho: float = 0.005,
        actor_hidden: tuple = (128, 128),
        critic_hidden: tuple = (100, 100),
    ):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.n_slots = (obs_dim - 2) // 2
        self.t0 = float(t0)
        self.alpha = float(alpha)
        self.discount = float(discount)
        self.rho = float(rho)
        ss = np.random.SeedSequence(seed)
        init_ss, policy_ss = ss.spawn(2)
        init_rng = np.random.default_rng(init_ss)
        self.policy_rng = np.random.default_rng(policy_ss)

        self.actor = Mlp([obs_dim, *actor_hidden, 2 * action_dim], init_rng)
        self.q1 = Mlp([obs_dim + action_dim, *critic_hidden, 1], init_rng)
        self.q2 = Mlp([obs_dim + action_dim, *critic_hidden, 1], init_rng)
        self.q1_target = self.q1.copy()
        self.q2_target = self.q2.copy()
        self.actor_opt = Adam(self.actor.parameters(), lr=lr)
        self.q1_opt = Adam(self.q1.parameters(), lr=lr)
        self.q2_opt = Adam(self.q2.parameters(), lr=lr)

    # -- policy --------------------------------------------------------------

    def _policy_stats(self, feats):
        out = self.actor.forward(feats)
        mu = out[..., : self.action_dim]
        log_std_raw = out[..., self.action_dim :]
        return mu, np.clip(log_std_raw, LOG_STD_MIN, LOG_STD_MAX), log_std_raw

    def act(self, obs: np.ndarray, explore: bool = True) -> np.ndarray:
        feats = featurize(obs, self.n_slots, self.t0)
        mu, log_std, _ = self._policy_stats(feats)
        if explore:
            u = mu + np.exp(log_std) * self.policy_rng.standard_normal(mu.shape)
        else:
            u = mu
        return squash(u, self.t0)

    # -- learning ------------------------------------------------------------

    def update(self, batch: dict) -> UpdateStats:
        feats = featurize(batch["obs"], self.n_slots, self.t0)
        next_feats = featurize(batch["next_obs"], self.n_slots, self.t0)
        rewards = batch["rewards"][:, None]
        actions = batch["actions"]
        b = feats.shape[0]

        # Targets from the next-state policy sample (reparametrized draw).
        mu_n, log_std_n, _ = self._policy_stats(next_feats)
        u_n = mu_n + np.exp(log_std_n) * self.policy_rng.standard_normal(mu_n.shape)
        a_n = squash(u_n, self.t0)
        logp_n = squashed_log_prob(u_n, mu_n, log_std_n, self.t0)[:, None]
        x_n = np.concatenate([next_feats, a_n], axis=1)
        tq = np.minimum(self.q1_target.forward(x_n), self.q2_target.forward(x_n))
        y = rewards + self.discount * (tq - self.alpha * logp_n)

        # Critic regression toward the soft Bellman target.
        x = np.concatenate([feats, actions], axis=1)
        critic_loss = 0.0
        for q, opt in ((self.q1, self.q1_opt), (self.q2, self.q2_opt)):
            pred, cache = q.forward_cache(x)
            err = pred - y
            critic_loss += float(np.mean(err**2))
            grads, _ = q.backward(cache, 2.0 * err / b)
            opt.step(q.parameters(), grads)
        critic_loss /= 2.0

        noise = self.policy_rng.standard_normal((b, self.action_dim))
        actor_loss, mean_logp, grads = self.actor_objective_grads(feats, noise)
        self.actor_opt.step(self.actor.parameters(), grads)

        soft_update(self.q1_target, self.q1, self.rho)
        soft_update(self.q2_target, self.q2, self.rho)

        return UpdateStats(critic_loss, actor_loss, -mean_logp)

    def actor_objective_grads(self, feats: np.ndarray, noise: np.ndarray):
        """Loss mean(alpha * log pi - min Q) at fixed reparametrization noise,
        with its exact gradient w.r.t. the actor parameters.

        The minimum over the twin critics routes each sample's action
        gradient through whichever critic attains it; the critics themselves
        are held fixed. Returns (loss, mean log-prob, parameter gradients).
        """
        b = feats.shape[0]
        out, actor_cache = self.actor.forward_cache(feats)
        mu = out[:, : self.action_dim]
        log_std_raw = out[:, self.action_dim :]
        log_std = np.clip(log_std_raw, LOG_STD_MIN, LOG_STD_MAX)
        std = np.exp(log_std)
        u = mu + std * noise
        t = np.tanh(u)
        a = (t + 1.0) * (0.5 * self.t0)
        logp = squashed_log_prob(u, mu, log_std, self.t0)

        xa = np.concatenate([feats, a], axis=1)
        p1, c1 = self.q1.forward_cache(xa)
        p2, c2 = self.q2.forward_cache(xa)
        qmin = np.minimum(p1, p2)
        pick1 = (p1 <= p2).astype(float)
        _, gx1 = self.q1.backward(c1, pick1)
        _, gx2 = self.q2.backward(c2, 1.0 - pick1)
        dq_da = (gx1 + gx2)[:, self.obs_dim :]

        # d(loss)/du: the entropy term contributes alpha * 2*tanh(u); the
        # value term chains -dQ/da through da/du = t0/2 * (1 - tanh(u)^2).
        du = (self.alpha * 2.0 * t - dq_da * (0.5 * self.t0) * (1.0 - t**2)) / b
        dmu = du
        # The direct -1 from d(-log_std)/d(log_std) plus the path through u;
        # clamped log-std entries pass no gradient.
        dls = du * std * noise - self.alpha / b
        dls = np.where((log_std_raw > LOG_STD_MIN) & (log_std_raw < LOG_STD_MAX), dls, 0.0)
        grads, _ = self.actor.backward(actor_cache, np.concatenate([dmu, dls], axis=1))
        loss = float(np.mean(self.alpha * logp - qmin[:, 0]))
        return loss, float(np.mean(logp)), grads

    # -- persistence -----------------------------------------------------------

    def get_state(self) -> dict:
        return {
            "actor": self.actor.get_state(),
            "q1": self.q1.get_state(),
            "q2": self.q2.get_state(),
            "q1_target": self.q1_target.get_state(),
            "q2_target": self.q2_target.get_state(),
        }

    def set_state(self, state: dict) -> None:
        self.actor.set_state(state["actor"])
        self.q1.set_state(state["q1"])
        self.q2.set_state(state["q2"])
        self.q1_target.set_state(state["q1_target"])
        self.q2_target.set_state(state["q2_target"])
