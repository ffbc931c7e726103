"""
Soft Actor-Critic with twin critics, Polyak targets and a fixed temperature.
"""

import json
import logging
import os
from dataclasses import dataclass, replace
from typing import Any, Dict, Optional, Tuple

import numpy as np

from cylinder_afc.agent.network import (
    AdamState,
    ForwardCache,
    Mlp,
    SquashedSample,
    adam_step,
    backward,
    forward,
    gaussian_head_sample,
    load_checkpoint,
    polyak_update,
    save_checkpoint,
)
from cylinder_afc.agent.replay import Batch
from cylinder_afc.utils.config import ConfigurationError, to_plain

logger = logging.getLogger(__name__)

NETWORK_FILES = ("actor", "critic1", "critic2", "critic1_target", "critic2_target")


@dataclass(frozen=True)
class SacConfig:
    gamma: float = 0.97
    alpha: float = 0.2
    actor_lr: float = 3e-4
    critic_lr: float = 2e-4
    tau: float = 0.005
    batch_size: int = 64
    update_every: int = 50
    gradient_steps: int = 50
    hidden_sizes: Tuple[int, ...] = (512, 512)
    buffer_capacity: int = 1_000_000
    action_scale: float = 1.5
    log_std_bounds: Tuple[float, float] = (-20.0, 2.0)

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigurationError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.alpha < 0:
            raise ConfigurationError(f"alpha must be non-negative, got {self.alpha}")
        if self.update_every < 1 or self.gradient_steps < 1 or self.batch_size < 1:
            raise ConfigurationError("update_every, gradient_steps and batch_size must be at least 1")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigurationError(f"tau must lie in (0, 1], got {self.tau}")
        if self.log_std_bounds[0] >= self.log_std_bounds[1]:
            raise ConfigurationError(f"Invalid log_std bounds {self.log_std_bounds}")


@dataclass(frozen=True)
class UpdateLosses:
    critic1: float
    critic2: float
    actor: float
    entropy: float


def _as_observation(state) -> np.ndarray:
    return np.asarray(getattr(state, "matrix", state), dtype=float).reshape(-1)


class SacAgent:
    """
    Actor and twin critics over flattened lifted states.

    The actor outputs (mean, log_std) per action dimension; critics take the
    observation concatenated with the action.
    """

    def __init__(self, obs_dim: int, act_dim: int, config: SacConfig = SacConfig(), seed: int = 0):
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.config = config
        self.rng = np.random.default_rng(seed)

        hidden = tuple(config.hidden_sizes)
        self.actor = Mlp.create((obs_dim,) + hidden + (2 * act_dim,), self.rng)
        self.critic1 = Mlp.create((obs_dim + act_dim,) + hidden + (1,), self.rng)
        self.critic2 = Mlp.create((obs_dim + act_dim,) + hidden + (1,), self.rng)
        self.critic1_target = self.critic1.copy()
        self.critic2_target = self.critic2.copy()

        self.actor_adam = AdamState.create(self.actor, config.actor_lr)
        self.critic1_adam = AdamState.create(self.critic1, config.critic_lr)
        self.critic2_adam = AdamState.create(self.critic2, config.critic_lr)
        self.updates = 0

    def _policy(self, obs: np.ndarray, noise: Optional[np.ndarray] = None) -> Tuple[SquashedSample, ForwardCache]:
        out, cache = forward(self.actor, obs)
        mean, log_std = out[..., :self.act_dim], out[..., self.act_dim:]
        if noise is None:
            noise = self.rng.standard_normal(mean.shape)
        sample = gaussian_head_sample(
            mean, log_std, noise, self.config.action_scale, self.config.log_std_bounds
        )
        return sample, cache

    def select_action(self, state, mode: str = "stochastic") -> np.ndarray:
        """
        Action for one lifted state.

        Args:
            state: LiftedState or flat observation vector
            mode: "stochastic" samples the policy; "deterministic" returns scale * tanh(mean)

        Returns:
            Action vector of length act_dim within the actuator bound
        """
        obs = _as_observation(state)
        if mode == "deterministic":
            out, _ = forward(self.actor, obs)
            return self.config.action_scale * np.tanh(out[:self.act_dim])
        if mode == "stochastic":
            sample, _ = self._policy(obs)
            return sample.action
        raise ValueError(f"Unknown action mode '{mode}'")

    @staticmethod
    def _q(net: Mlp, states: np.ndarray, actions: np.ndarray) -> Tuple[np.ndarray, ForwardCache]:
        out, cache = forward(net, np.concatenate([states, actions], axis=1))
        return out[:, 0], cache

    def compute_critic_target(self, batch: Batch) -> np.ndarray:
        """r + gamma * (1 - done) * (min target Q(s', a') - alpha * log pi(a'|s'))."""
        cfg = self.config
        next_states = batch.next_states.reshape(len(batch), -1)
        sample, _ = self._policy(next_states)
        q1, _ = self._q(self.critic1_target, next_states, sample.action)
        q2, _ = self._q(self.critic2_target, next_states, sample.action)
        soft_value = np.minimum(q1, q2) - cfg.alpha * sample.log_prob
        return batch.rewards + cfg.gamma * (1.0 - batch.terminals.astype(float)) * soft_value

    def _critic_step(self, net: Mlp, adam: AdamState, states, actions, target) -> float:
        q, cache = self._q(net, states, actions)
        err = q - target
        grads = backward(net, cache, (2.0 * err / len(err))[:, None])
        adam_step(net, grads, adam)
        return float(np.mean(err ** 2))

    def update(self, batch: Batch) -> UpdateLosses:
        """One gradient step on both critics and the actor, then the target update."""
        cfg = self.config
        states = batch.states.reshape(len(batch), -1)
        actions = batch.actions.reshape(len(batch), -1)
        n = len(batch)

        target = self.compute_critic_target(batch)
        loss1 = self._critic_step(self.critic1, self.critic1_adam, states, actions, target)
        loss2 = self._critic_step(self.critic2, self.critic2_adam, states, actions, target)

        sample, actor_cache = self._policy(states)
        q1, cache1 = self._q(self.critic1, states, sample.action)
        q2, cache2 = self._q(self.critic2, states, sample.action)
        use_first = (q1 <= q2).astype(float)
        q_min = np.minimum(q1, q2)
        actor_loss = float(np.mean(cfg.alpha * sample.log_prob - q_min))

        # dL/da through the smaller critic of each row
        g1 = backward(self.critic1, cache1, (-use_first / n)[:, None]).inputs[:, self.obs_dim:]
        g2 = backward(self.critic2, cache2, (-(1.0 - use_first) / n)[:, None]).inputs[:, self.obs_dim:]
        d_action = g1 + g2

        d_pre = d_action * sample.d_action_d_pre
        d_logp = cfg.alpha / n
        d_mean = d_pre + d_logp * sample.d_log_prob_d_mean
        d_log_std = d_pre * sample.d_pre_d_log_std + d_logp * sample.d_log_prob_d_log_std
        actor_grads = backward(self.actor, actor_cache, np.concatenate([d_mean, d_log_std], axis=1))
        adam_step(self.actor, actor_grads, self.actor_adam)

        polyak_update(self.critic1_target, self.critic1, cfg.tau)
        polyak_update(self.critic2_target, self.critic2, cfg.tau)
        self.updates += 1

        losses = UpdateLosses(loss1, loss2, actor_loss, float(-np.mean(sample.log_prob)))
        if not all(np.isfinite([losses.critic1, losses.critic2, losses.actor])):
            raise FloatingPointError(f"Non-finite SAC losses at update {self.updates}: {losses}")
        return losses

    def entropy_estimate(self, states: np.ndarray) -> float:
        """Monte-Carlo entropy -mean(log pi) over fresh samples for a batch of states."""
        states = np.asarray(states, dtype=float)
        if len(states) == 0:
            raise ValueError("Entropy estimate needs at least one state")
        sample, _ = self._policy(states.reshape(len(states), -1))
        return float(-np.mean(sample.log_prob))

    def networks(self) -> Dict[str, Mlp]:
        return {name: getattr(self, name) for name in NETWORK_FILES}

    def save(self, directory: str, buffer_stats: Optional[Dict[str, Any]] = None) -> None:
        """Write one checkpoint per network plus agent.json."""
        os.makedirs(directory, exist_ok=True)
        adams = {"actor": self.actor_adam, "critic1": self.critic1_adam, "critic2": self.critic2_adam}
        for name, net in self.networks().items():
            rng_state = self.rng.bit_generator.state if name == "actor" else None
            save_checkpoint(os.path.join(directory, f"{name}.ckpt"), net, adams.get(name), rng_state)

        meta = {
            "obs_dim": self.obs_dim,
            "act_dim": self.act_dim,
            "updates": self.updates,
            "config": to_plain(self.config),
            "buffer": buffer_stats or {},
        }
        with open(os.path.join(directory, "agent.json"), "w", encoding="utf-8") as f:
            json.dump(meta, f, indent=2)
        logger.info(f"Saved agent checkpoint to {directory}")

    @classmethod
    def load(cls, directory: str) -> "SacAgent":
        meta_path = os.path.join(directory, "agent.json")
        if not os.path.exists(meta_path):
            raise FileNotFoundError(f"Agent checkpoint not found: {meta_path}")
        with open(meta_path, "r", encoding="utf-8") as f:
            meta = json.load(f)

        values = dict(meta["config"])
        values["hidden_sizes"] = tuple(values["hidden_sizes"])
        values["log_std_bounds"] = tuple(values["log_std_bounds"])
        agent = cls(meta["obs_dim"], meta["act_dim"], replace(SacConfig(), **values))
        agent.updates = int(meta.get("updates", 0))

        for name in NETWORK_FILES:
            net, adam, rng_state = load_checkpoint(os.path.join(directory, f"{name}.ckpt"))
            setattr(agent, name, net)
            if adam is not None:
                setattr(agent, f"{name}_adam", adam)
            if rng_state is not None:
                agent.rng.bit_generator.state = rng_state
        return agent
