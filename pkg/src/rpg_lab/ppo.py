"""PPO trainer: GAE, clipped surrogate, chunked recurrent updates, count bonus.

Each agent trains its own policy and value nets (independent parameters)
against the others in self-play. One master RNG drives every stochastic
choice (env seeds, action sampling, minibatch shuffles), so a run is a pure
function of its seed in single-threaded mode and checkpoints can resume
bit-reproducibly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import nn
from .envs import RewardWeights, make_env
from .nn import ArchSpec, ParamVector, Var, backward, gather_grads, sample_categorical
from .nn import autodiff as ad

METRICS_SCHEMA_VERSION = "rpg-metrics-v1"


@dataclass(frozen=True)
class PpoConfig:
    """Hyperparameters; defaults follow the gridworld training recipe."""

    learning_rate: float = 1e-3
    anneal_lr: bool = True
    adam_epsilon: float = 1e-5
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.2
    value_loss_coeff: float = 1.0
    entropy_coeff: float = 0.01
    grad_clip: float = 0.5
    ppo_epochs: int = 4
    minibatch_chunks: int = 320
    parallel_threads: int = 64
    reward_scale: float = 0.1
    episode_length: int = 50
    chunk_length: int = 10
    buffer_reuse: int = 4
    advantage_norm: bool = True

    def __post_init__(self):
        if not (0 < self.gamma <= 1):
            raise ValueError("gamma must be in (0, 1]")
        if not (0 <= self.gae_lambda <= 1):
            raise ValueError("gae_lambda must be in [0, 1]")
        for name in ("learning_rate", "clip", "value_loss_coeff", "entropy_coeff",
                     "grad_clip", "reward_scale"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.episode_length % self.chunk_length != 0:
            raise ValueError("chunk_length must divide episode_length")
        if self.ppo_epochs > self.buffer_reuse:
            raise ValueError("ppo_epochs must not exceed buffer_reuse (staleness bound)")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


class Adam:
    """Adaptive-moment optimizer with externally supplied step size."""

    def __init__(self, size: int, epsilon: float = 1e-5, beta1: float = 0.9, beta2: float = 0.999):
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0
        self.epsilon = epsilon
        self.beta1 = beta1
        self.beta2 = beta2

    def step(self, flat: np.ndarray, grad: np.ndarray, lr: float) -> None:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        mhat = self.m / (1 - self.beta1**self.t)
        vhat = self.v / (1 - self.beta2**self.t)
        flat -= lr * mhat / (np.sqrt(vhat) + self.epsilon)

    def state_dict(self) -> dict:
        return {"t": self.t, "m": self.m, "v": self.v}

    def load_state_dict(self, state: dict) -> None:
        self.t = int(state["t"])
        self.m = np.asarray(state["m"], dtype=np.float64).copy()
        self.v = np.asarray(state["v"], dtype=np.float64).copy()


def anneal_schedule(lr0: float, update_index: int, total_updates: int) -> float:
    """Linear schedule lr0 * (1 - t/T), reaching zero at the configured total."""
    return lr0 * max(0.0, 1.0 - update_index / total_updates)


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    terminals: np.ndarray,
    bootstrap: np.ndarray,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """GAE(lambda) advantages and value targets over (T, B) arrays.

    `terminals` marks natural episode ends (no value flows across them);
    `bootstrap` is V(s_T) for the truncated tail of each env.
    """
    if rewards.size == 0:
        raise ValueError("empty buffer")
    T = rewards.shape[0]
    adv = np.zeros_like(rewards)
    lastgae = np.zeros_like(bootstrap)
    for t in range(T - 1, -1, -1):
        nextvalue = bootstrap if t == T - 1 else values[t + 1]
        mask = 1.0 - terminals[t]
        delta = rewards[t] + gamma * nextvalue * mask - values[t]
        lastgae = delta + gamma * lam * mask * lastgae
        adv[t] = lastgae
    return adv, adv + values


class VisitCounter:
    """Count-based intrinsic reward r_int = alpha / n_o on discretized observations."""

    def __init__(self, alpha: float):
        self.alpha = alpha
        self.counts: dict[tuple, int] = {}

    def bonus(self, observation) -> float:
        key = tuple(int(round(x)) for x in np.asarray(observation).ravel())
        n = self.counts.get(key, 0) + 1
        self.counts[key] = n
        return self.alpha / n

    def state_dict(self) -> dict:
        return {",".join(map(str, k)): v for k, v in self.counts.items()}

    def load_state_dict(self, state: dict) -> None:
        self.counts = {tuple(int(t) for t in k.split(",")): int(v) for k, v in state.items()}


class PpoAgent:
    """One agent's policy/value nets plus their optimizers."""

    def __init__(self, arch: ArchSpec, seed_seq: np.random.SeedSequence):
        self.arch = arch
        self.policy, self.value = arch.build()
        policy_seed, value_seed = seed_seq.spawn(2)
        self.policy_params = self.policy.init_params(policy_seed)
        self.value_params = self.value.init_params(value_seed)
        self.policy_opt = Adam(self.policy_params.size)
        self.value_opt = Adam(self.value_params.size)

    def params_dict(self, tag: str) -> dict[str, ParamVector]:
        return {f"policy{tag}": self.policy_params, f"value{tag}": self.value_params}


@dataclass
class RolloutBuffer:
    """Fixed-horizon trajectories for one agent, laid out (T, B, ...)."""

    obs: np.ndarray
    joint_obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    terminals: np.ndarray
    bootstrap: np.ndarray
    policy_states: np.ndarray | None = None  # (T/M, B, hidden) at chunk starts
    value_states: np.ndarray | None = None
    heads: np.ndarray | None = None  # per-env value head (opponent identity)
    advantages: np.ndarray | None = None
    targets: np.ndarray | None = None


@dataclass
class EpisodeStats:
    """Mean per-episode returns and event counters over one collection batch."""

    episodes: int
    mean_returns: np.ndarray  # per agent, unscaled env rewards
    event_means: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "mean_returns": [float(r) for r in self.mean_returns],
            "event_means": {k: float(v) for k, v in self.event_means.items()},
        }


def _chunk(arr: np.ndarray, M: int) -> np.ndarray:
    """(T, B, ...) -> (B*T/M, M, ...) with chunks contiguous per env."""
    T, B = arr.shape[0], arr.shape[1]
    rest = arr.shape[2:]
    return (
        arr.transpose(1, 0, *range(2, arr.ndim))
        .reshape(B, T // M, M, *rest)
        .reshape(B * (T // M), M, *rest)
    )


class PpoTrainer:
    """Decentralized PPO self-play on one environment kind."""

    def __init__(
        self,
        env_kind: str,
        weights: RewardWeights,
        cfg: PpoConfig,
        seed: int,
        total_updates: int,
        *,
        n_agents: int | None = None,
        recurrent: bool | None = None,
        prosocial: float = 0.0,
        count_bonus_alpha: float | None = None,
        policy_logit_bias: list[np.ndarray] | None = None,
        out_dir: str | Path | None = None,
        population_factor: int = 1,
        update_offset: int = 0,
        env_steps_offset: int = 0,
    ):
        self.env_kind = env_kind
        self.weights = weights
        self.cfg = cfg
        self.seed = seed
        self.total_updates = total_updates
        self.prosocial = prosocial
        self.population_factor = population_factor
        self.update_index = update_offset
        self.env_steps = env_steps_offset

        env_kwargs = {}
        if env_kind == "monster_hunt" and n_agents:
            env_kwargs["n_agents"] = n_agents
        probe = make_env(env_kind, weights, **env_kwargs)
        if env_kind in ("iterated", "matrix"):
            episode_length = probe.episode_length
            chunk_length = min(cfg.chunk_length, episode_length)
            cfg = replace(cfg, episode_length=episode_length, chunk_length=chunk_length)
            self.cfg = cfg
        elif cfg.episode_length != probe.episode_length:
            probe = make_env(env_kind, weights, episode_length=cfg.episode_length, **env_kwargs)
        self._env_kwargs = env_kwargs

        self.n_agents = probe.n_agents
        self.recurrent = (env_kind == "escalation") if recurrent is None else recurrent
        self.arch = ArchSpec(
            obs_dim=probe.obs_dim,
            joint_obs_dim=probe.obs_dim * probe.n_agents,
            n_actions=probe.n_actions,
            n_heads=1,
            recurrent_policy=self.recurrent,
            recurrent_value=self.recurrent,
        )
        self.event_names = probe.event_names
        self.agents = [
            PpoAgent(self.arch, np.random.SeedSequence((int(seed), i))) for i in range(self.n_agents)
        ]
        if policy_logit_bias is not None:
            for agent, bias in zip(self.agents, policy_logit_bias):
                agent.policy_params.view("pi.out.b")[:] = np.asarray(bias, dtype=np.float64)
        self.rng = np.random.default_rng(np.random.SeedSequence((int(seed), 99991)))
        self.counter = VisitCounter(count_bonus_alpha) if count_bonus_alpha else None

        self.envs = [
            make_env(env_kind, weights, **self._grid_env_kwargs())
            for _ in range(cfg.parallel_threads)
        ]
        self.out_dir = Path(out_dir) if out_dir else None
        self._metrics_fh = None
        if self.out_dir:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            self._open_metrics()

    def _grid_env_kwargs(self) -> dict:
        kw = dict(self._env_kwargs)
        if self.env_kind in ("monster_hunt", "escalation"):
            kw["episode_length"] = self.cfg.episode_length
        return kw

    # ------------------------------------------------------------- metrics

    def metrics_columns(self) -> list[str]:
        agent_cols = [f"mean_episode_return_agent{i}" for i in range(self.n_agents)]
        return (
            ["update_index", "env_steps"]
            + agent_cols
            + list(self.event_names)
            + ["policy_loss", "value_loss", "entropy", "lr", "env_steps_total"]
        )

    def _open_metrics(self):
        path = self.out_dir / "metrics.csv"
        fresh = not path.exists()
        self._metrics_fh = open(path, "a")
        if fresh:
            self._metrics_fh.write(f"# {METRICS_SCHEMA_VERSION}\n")
            self._metrics_fh.write(",".join(self.metrics_columns()) + "\n")
            self._metrics_fh.flush()

    def _write_metrics(self, stats: EpisodeStats, losses: dict, lr: float):
        if not self._metrics_fh:
            return
        row = [self.update_index, self.env_steps]
        row += [f"{r:.6f}" for r in stats.mean_returns]
        row += [f"{stats.event_means.get(name, 0.0):.6f}" for name in self.event_names]
        row += [
            f"{losses['policy_loss']:.8f}",
            f"{losses['value_loss']:.8f}",
            f"{losses['entropy']:.8f}",
            f"{lr:.8f}",
            self.env_steps * self.population_factor,
        ]
        self._metrics_fh.write(",".join(str(x) for x in row) + "\n")
        self._metrics_fh.flush()

    # ------------------------------------------------------------- rollouts

    def collect_rollouts(self) -> tuple[list[RolloutBuffer], EpisodeStats]:
        """One episode_length segment across all parallel envs."""
        cfg = self.cfg
        T, B, n = cfg.episode_length, len(self.envs), self.n_agents
        n_chunks = T // cfg.chunk_length

        obs = np.zeros((n, B, self.arch.obs_dim))
        for e, env in enumerate(self.envs):
            obs_list = env.reset(int(self.rng.integers(1 << 62)))
            for i in range(n):
                obs[i, e] = obs_list[i]

        pol_state = [self.agents[i].policy.init_state(B) for i in range(n)]
        val_state = [self.agents[i].value.init_state(B) for i in range(n)]

        buf_obs = np.zeros((n, T, B, self.arch.obs_dim))
        buf_joint = np.zeros((T, B, self.arch.joint_obs_dim))
        buf_act = np.zeros((n, T, B), dtype=np.int64)
        buf_logp = np.zeros((n, T, B))
        buf_rew = np.zeros((n, T, B))
        buf_val = np.zeros((n, T, B))
        buf_term = np.zeros((T, B))
        pol_chunk_states = np.zeros((n, n_chunks, B, nn.HIDDEN)) if self.recurrent else None
        val_chunk_states = np.zeros((n, n_chunks, B, nn.HIDDEN)) if self.recurrent else None

        ep_returns = np.zeros((n, B))
        ep_events = {name: np.zeros(B) for name in self.event_names}
        done_returns: list[np.ndarray] = []
        done_events: list[dict] = []

        for t in range(T):
            if self.recurrent and t % cfg.chunk_length == 0:
                k = t // cfg.chunk_length
                for i in range(n):
                    pol_chunk_states[i, k] = pol_state[i]
                    val_chunk_states[i, k] = val_state[i]

            joint = np.concatenate([obs[i] for i in range(n)], axis=1)
            buf_joint[t] = joint
            actions = np.zeros((n, B), dtype=np.int64)
            for i in range(n):
                agent = self.agents[i]
                probs, new_ps = agent.policy.distribution(
                    agent.policy_params, obs[i], pol_state[i] if self.recurrent else None
                )
                actions[i] = sample_categorical(probs, self.rng)
                buf_logp[i, t] = np.log(probs[np.arange(B), actions[i]])
                v, new_vs = agent.value.predict(
                    agent.value_params, joint, 0, val_state[i] if self.recurrent else None
                )
                buf_val[i, t] = v
                buf_obs[i, t] = obs[i]
                buf_act[i, t] = actions[i]
                if self.recurrent:
                    pol_state[i] = new_ps
                    val_state[i] = new_vs

            env_rewards = np.zeros((n, B))
            for e, env in enumerate(self.envs):
                res = env.step([int(actions[i, e]) for i in range(n)])
                for i in range(n):
                    env_rewards[i, e] = res.rewards[i]
                    obs[i, e] = res.observations[i]
                buf_term[t, e] = 1.0 if res.terminal else 0.0
                for name, cnt in res.event_counters.items():
                    ep_events[name][e] += cnt
                ep_returns[:, e] += res.rewards
                if res.done:
                    done_returns.append(ep_returns[:, e].copy())
                    done_events.append({k: v[e] for k, v in ep_events.items()})
                    ep_returns[:, e] = 0.0
                    for v in ep_events.values():
                        v[e] = 0.0
                    if t < T - 1:
                        obs_list = env.reset(int(self.rng.integers(1 << 62)))
                        for i in range(n):
                            obs[i, e] = obs_list[i]
                            if self.recurrent:
                                pol_state[i][e] = 0.0
                                val_state[i][e] = 0.0

            train_rewards = env_rewards.copy()
            if self.prosocial:
                others = env_rewards.sum(axis=0, keepdims=True) - env_rewards
                train_rewards = env_rewards + self.prosocial * others
            if self.counter is not None:
                for i in range(n):
                    for e in range(B):
                        train_rewards[i, e] += self.counter.bonus(buf_obs[i, t, e])
            for i in range(n):
                buf_rew[i, t] = cfg.reward_scale * train_rewards[i]

        self.env_steps += T * B

        joint_final = np.concatenate([obs[i] for i in range(n)], axis=1)
        buffers = []
        for i in range(n):
            agent = self.agents[i]
            bootstrap, _ = agent.value.predict(
                agent.value_params, joint_final, 0, val_state[i] if self.recurrent else None
            )
            buffers.append(
                RolloutBuffer(
                    obs=buf_obs[i],
                    joint_obs=buf_joint,
                    actions=buf_act[i],
                    log_probs=buf_logp[i],
                    rewards=buf_rew[i],
                    values=buf_val[i],
                    terminals=buf_term,
                    bootstrap=bootstrap,
                    policy_states=pol_chunk_states[i] if self.recurrent else None,
                    value_states=val_chunk_states[i] if self.recurrent else None,
                )
            )

        if done_returns:
            returns = np.stack(done_returns)
            means = returns.mean(axis=0)
            event_means = {
                name: float(np.mean([ev[name] for ev in done_events])) for name in self.event_names
            }
        else:
            means = np.zeros(n)
            event_means = dict.fromkeys(self.event_names, 0.0)
        stats = EpisodeStats(len(done_returns), means, event_means)
        return buffers, stats

    # -------------------------------------------------------------- update

    def _recompute_chunk_states(self, agent: PpoAgent, buf: RolloutBuffer) -> None:
        """Fresh forward pass over the stored trajectory to refresh chunk-start states."""
        cfg = self.cfg
        T, B = buf.rewards.shape
        pol_leaves = agent.policy.leaves(agent.policy_params)
        val_leaves = agent.value.leaves(agent.value_params)
        ps = Var(agent.policy.init_state(B))
        vs = Var(agent.value.init_state(B))
        for t in range(T):
            k, rem = divmod(t, cfg.chunk_length)
            if rem == 0:
                buf.policy_states[k] = ps.data
                buf.value_states[k] = vs.data
            _, ps = agent.policy.forward(pol_leaves, buf.obs[t], ps)
            _, vs = agent.value.forward(val_leaves, buf.joint_obs[t], vs)
            if t < T - 1:
                mask = (1.0 - buf.terminals[t]).reshape(-1, 1)
                ps = ad.mul(ps, mask)
                vs = ad.mul(vs, mask)

    def _minibatch_loss(self, agent: PpoAgent, mb: dict, lr_unused=None) -> tuple[Var, dict, dict]:
        """Clipped-surrogate + value + entropy loss over one minibatch of chunks."""
        cfg = self.cfg
        C, M = mb["actions"].shape
        pol_leaves = agent.policy.leaves(agent.policy_params)
        val_leaves = agent.value.leaves(agent.value_params)

        adv = mb["advantages"]
        if cfg.advantage_norm:
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)

        if self.recurrent:
            ps = Var(mb["policy_states"])
            vs = Var(mb["value_states"])
            lp_steps, ent_steps, v_steps = [], [], []
            for m in range(M):
                logits, ps = agent.policy.forward(pol_leaves, mb["obs"][:, m], ps)
                lp_all = ad.log_softmax(logits)
                lp_steps.append(ad.take_rows(lp_all, mb["actions"][:, m]))
                p_all = ad.exp(lp_all)
                ent_steps.append(ad.vsum(ad.mul(p_all, lp_all), axis=1))
                values, vs = agent.value.forward(val_leaves, mb["joint_obs"][:, m], vs)
                v_steps.append(ad.take_rows(values, mb["heads"][:, m]))
                if m < M - 1:
                    mask = (1.0 - mb["terminals"][:, m]).reshape(-1, 1)
                    ps = ad.mul(ps, mask)
                    vs = ad.mul(vs, mask)
            new_logp = ad.concat(lp_steps, axis=0)
            neg_entropy = ad.concat(ent_steps, axis=0)
            v_pred = ad.concat(v_steps, axis=0)
            old_logp = mb["log_probs"].T.ravel()
            advf = adv.T.ravel()
            targets = mb["targets"].T.ravel()
        else:
            flat_obs = mb["obs"].reshape(C * M, -1)
            flat_joint = mb["joint_obs"].reshape(C * M, -1)
            logits, _ = agent.policy.forward(pol_leaves, flat_obs, None)
            lp_all = ad.log_softmax(logits)
            new_logp = ad.take_rows(lp_all, mb["actions"].ravel())
            p_all = ad.exp(lp_all)
            neg_entropy = ad.vsum(ad.mul(p_all, lp_all), axis=1)
            values, _ = agent.value.forward(val_leaves, flat_joint, None)
            v_pred = ad.take_rows(values, mb["heads"].ravel())
            old_logp = mb["log_probs"].ravel()
            advf = adv.ravel()
            targets = mb["targets"].ravel()

        ratio = ad.exp(new_logp - Var(old_logp))
        surr1 = ad.mul(ratio, advf)
        surr2 = ad.mul(ad.clip(ratio, 1 - cfg.clip, 1 + cfg.clip), advf)
        policy_loss = -ad.vmean(ad.minimum(surr1, surr2))
        value_loss = ad.vmean(ad.square(v_pred - Var(targets)))
        entropy = -ad.vmean(neg_entropy)
        loss = policy_loss + cfg.value_loss_coeff * value_loss + (-cfg.entropy_coeff) * entropy
        stats = {
            "policy_loss": float(policy_loss.data),
            "value_loss": float(value_loss.data),
            "entropy": float(entropy.data),
        }
        return loss, {"policy": (pol_leaves, agent.policy_params), "value": (val_leaves, agent.value_params)}, stats

    def _apply_gradients(self, agent: PpoAgent, leaves_map: dict, lr: float, value_only: bool):
        gp = gather_grads(agent.policy_params, leaves_map["policy"][0])
        gv = gather_grads(agent.value_params, leaves_map["value"][0])
        norm = float(np.sqrt(gp @ gp + gv @ gv))
        if self.cfg.grad_clip and norm > self.cfg.grad_clip:
            scale = self.cfg.grad_clip / norm
            gp *= scale
            gv *= scale
        if not value_only:
            agent.policy_opt.step(agent.policy_params.flat, gp, lr)
        agent.value_opt.step(agent.value_params.flat, gv, lr)

    def ppo_update(self, buffers: list[RolloutBuffer], value_only: bool = False) -> dict:
        """ppo_epochs minibatch passes over the collected buffers."""
        cfg = self.cfg
        lr = (
            anneal_schedule(cfg.learning_rate, self.update_index, self.total_updates)
            if cfg.anneal_lr
            else cfg.learning_rate
        )
        M = cfg.chunk_length
        totals = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0}
        count = 0
        for i, buf in enumerate(buffers):
            if i >= len(self.agents):
                break
            agent = self.agents[i]
            adv, targets = compute_gae(
                buf.rewards, buf.values, buf.terminals, buf.bootstrap, cfg.gamma, cfg.gae_lambda
            )
            buf.advantages, buf.targets = adv, targets
            T, B = buf.rewards.shape
            heads = buf.heads if buf.heads is not None else np.zeros(B, dtype=np.int64)
            head_steps = np.broadcast_to(heads, (T, B))
            chunks = {
                "obs": _chunk(buf.obs, M),
                "joint_obs": _chunk(buf.joint_obs, M),
                "actions": _chunk(buf.actions, M),
                "log_probs": _chunk(buf.log_probs, M),
                "advantages": _chunk(adv, M),
                "targets": _chunk(targets, M),
                "terminals": _chunk(np.broadcast_to(buf.terminals, (T, B)).copy(), M),
                "heads": _chunk(head_steps.copy(), M),
            }
            n_chunks_total = chunks["actions"].shape[0]
            for epoch in range(cfg.ppo_epochs):
                if self.recurrent:
                    if epoch > 0:
                        self._recompute_chunk_states(agent, buf)
                    chunks["policy_states"] = _chunk_states(buf.policy_states)
                    chunks["value_states"] = _chunk_states(buf.value_states)
                order = self.rng.permutation(n_chunks_total)
                n_minibatches = max(1, n_chunks_total // cfg.minibatch_chunks)
                for mb_idx in np.array_split(order, n_minibatches):
                    mb = {k: v[mb_idx] for k, v in chunks.items()}
                    loss, leaves_map, stats = self._minibatch_loss(agent, mb)
                    backward(loss)
                    self._apply_gradients(agent, leaves_map, lr, value_only)
                    for k in totals:
                        totals[k] += stats[k]
                    count += 1
        out = {k: v / max(count, 1) for k, v in totals.items()}
        out["lr"] = lr
        return out

    # ------------------------------------------------------------ training

    def train(self, n_updates: int, log_every: int = 1) -> EpisodeStats:
        stats = None
        for _ in range(n_updates):
            buffers, stats = self.collect_rollouts()
            losses = self.ppo_update(buffers)
            self.update_index += 1
            if self.update_index % log_every == 0:
                self._write_metrics(stats, losses, losses["lr"])
        return stats

    def warm_start(self, n_updates: int) -> None:
        """Value-only updates: policy parameters and optimizer stay untouched."""
        for _ in range(n_updates):
            buffers, stats = self.collect_rollouts()
            losses = self.ppo_update(buffers, value_only=True)
            self.update_index += 1
            self._write_metrics(stats, losses, losses["lr"])

    # ---------------------------------------------------------- checkpoint

    def save_checkpoint(self, path) -> None:
        params = {}
        optimizer = {}
        for i, agent in enumerate(self.agents):
            params[f"policy{i}"] = agent.policy_params
            params[f"value{i}"] = agent.value_params
            optimizer[f"policy{i}"] = agent.policy_opt.state_dict()
            optimizer[f"value{i}"] = agent.value_opt.state_dict()
        extra = {
            "env_kind": self.env_kind,
            "weights": list(self.weights.values),
            "c_max": self.weights.c_max,
            "cfg": self.cfg.to_dict(),
            "seed": self.seed,
            "total_updates": self.total_updates,
            "update_index": self.update_index,
            "env_steps": self.env_steps,
            "prosocial": self.prosocial,
            "n_agents": self.n_agents,
            "recurrent": self.recurrent,
            "counter": self.counter.state_dict() if self.counter else None,
            "counter_alpha": self.counter.alpha if self.counter else None,
        }
        nn.save_checkpoint(
            path,
            arch=self.arch.to_dict(),
            params=params,
            optimizer=optimizer,
            rng_state=self.rng.bit_generator.state,
            extra=extra,
        )

    @classmethod
    def load_checkpoint(cls, path, out_dir=None, **overrides) -> "PpoTrainer":
        record = nn.load_checkpoint(path)
        extra = record["extra"]
        cfg = PpoConfig(**extra["cfg"])
        trainer = cls(
            extra["env_kind"],
            RewardWeights.of(extra["weights"], extra["c_max"]),
            cfg,
            extra["seed"],
            overrides.get("total_updates", extra["total_updates"]),
            n_agents=extra["n_agents"],
            recurrent=extra["recurrent"],
            prosocial=extra["prosocial"],
            count_bonus_alpha=extra.get("counter_alpha"),
            out_dir=out_dir,
            population_factor=overrides.get("population_factor", 1),
            update_offset=extra["update_index"],
            env_steps_offset=extra["env_steps"],
        )
        for i, agent in enumerate(trainer.agents):
            agent.policy_params.copy_from(record["params"][f"policy{i}"])
            agent.value_params.copy_from(record["params"][f"value{i}"])
            agent.policy_opt.load_state_dict(record["optimizer"][f"policy{i}"])
            agent.value_opt.load_state_dict(record["optimizer"][f"value{i}"])
        trainer.rng.bit_generator.state = record["rng_state"]
        if extra.get("counter") is not None:
            trainer.counter.load_state_dict(extra["counter"])
        return trainer

    def close(self):
        if self._metrics_fh:
            self._metrics_fh.close()
            self._metrics_fh = None


def _chunk_states(states: np.ndarray) -> np.ndarray:
    """(T/M, B, H) chunk-start states -> (B*T/M, H) matching _chunk ordering."""
    K, B, H = states.shape
    return states.transpose(1, 0, 2).reshape(B * K, H)


def collect_rollouts(env_kind, weights, cfg, seed, total_updates=1, **kwargs):
    """One-off rollout collection with a fresh trainer (spec-level convenience)."""
    trainer = PpoTrainer(env_kind, weights, cfg, seed, total_updates, **kwargs)
    return trainer.collect_rollouts()
