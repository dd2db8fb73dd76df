"""Fixed-architecture policy and value networks.

Both nets are two 64-unit tanh layers; recurrent variants add a 64-unit GRU
cell between the torso and the output head. The value net takes the joint
observation of all agents (plus an optional identity one-hot) and carries
one scalar head per entry of `n_heads`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Var
from .params import ParamVector

HIDDEN = 64


def orthogonal(rng: np.random.Generator, shape: tuple[int, int], gain: float) -> np.ndarray:
    """Orthogonal-like scaled init, deterministic under the given generator."""
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def _mlp_params(rng, prefix: str, in_dim: int, out_dim: int, out_gain: float) -> dict:
    return {
        f"{prefix}l1.W": orthogonal(rng, (in_dim, HIDDEN), 1.0),
        f"{prefix}l1.b": np.zeros(HIDDEN),
        f"{prefix}l2.W": orthogonal(rng, (HIDDEN, HIDDEN), 1.0),
        f"{prefix}l2.b": np.zeros(HIDDEN),
        f"{prefix}out.W": orthogonal(rng, (HIDDEN, out_dim), out_gain),
        f"{prefix}out.b": np.zeros(out_dim),
    }


def _gru_params(rng, prefix: str) -> dict:
    out = {}
    for gate in ("z", "r", "n"):
        out[f"{prefix}gru.W{gate}"] = orthogonal(rng, (HIDDEN, HIDDEN), 1.0)
        out[f"{prefix}gru.U{gate}"] = orthogonal(rng, (HIDDEN, HIDDEN), 1.0)
        out[f"{prefix}gru.b{gate}"] = np.zeros(HIDDEN)
    out[f"{prefix}gru.bnh"] = np.zeros(HIDDEN)
    return out


def gru_cell(leaves: dict[str, Var], prefix: str, x: Var, h: Var) -> Var:
    """Standard GRU update; the reset gate multiplies the hidden path of n."""
    p = lambda name: leaves[f"{prefix}gru.{name}"]
    z = ad.sigmoid(x @ p("Wz") + h @ p("Uz") + p("bz"))
    r = ad.sigmoid(x @ p("Wr") + h @ p("Ur") + p("br"))
    n = ad.tanh(x @ p("Wn") + p("bn") + ad.mul(r, h @ p("Un") + p("bnh")))
    one_minus_z = ad.sub(1.0, z)
    return ad.add(ad.mul(one_minus_z, n), ad.mul(z, h))


class _Net:
    """Shared torso logic for policy and value networks."""

    prefix = ""

    def __init__(self, in_dim: int, out_dim: int, recurrent: bool):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.recurrent = recurrent

    def init_params(self, seed) -> ParamVector:
        rng = np.random.default_rng(seed)
        arrays = _mlp_params(rng, self.prefix, self.in_dim, self.out_dim, self.out_gain)
        if self.recurrent:
            arrays.update(_gru_params(rng, self.prefix))
        return ParamVector(arrays)

    def leaves(self, params: ParamVector) -> dict[str, Var]:
        return {name: Var(params.view(name)) for name in params.names}

    def init_state(self, batch: int) -> np.ndarray:
        return np.zeros((batch, HIDDEN))

    def forward(self, leaves: dict[str, Var], obs, state=None) -> tuple[Var, Var | None]:
        """One batched step: obs (B, in_dim) -> (output (B, out_dim), new hidden)."""
        obs = np.asarray(obs, dtype=np.float64)
        if obs.shape[-1] != self.in_dim:
            raise ValueError(f"expected obs dim {self.in_dim}, got {obs.shape[-1]}")
        p = lambda name: leaves[f"{self.prefix}{name}"]
        x = ad.tanh(Var(obs) @ p("l1.W") + p("l1.b"))
        x = ad.tanh(x @ p("l2.W") + p("l2.b"))
        new_state = None
        if self.recurrent:
            if state is None:
                raise ValueError("recurrent net needs a hidden state")
            h = state if isinstance(state, Var) else Var(state)
            new_state = gru_cell(leaves, self.prefix, x, h)
            x = new_state
        out = x @ p("out.W") + p("out.b")
        return out, new_state

    def forward_sequence(self, leaves, obs_seq, state) -> tuple[list[Var], list[Var]]:
        """Unroll over obs_seq (T, B, in_dim); returns per-step outputs and hidden states."""
        outputs, states = [], []
        for t in range(obs_seq.shape[0]):
            out, state_v = self.forward(leaves, obs_seq[t], state)
            if self.recurrent:
                state = state_v
            outputs.append(out)
            states.append(state_v)
        return outputs, states


class PolicyNet(_Net):
    """Categorical policy over n_actions; sees only the agent's own observation."""

    prefix = "pi."
    out_gain = 0.01

    def __init__(self, obs_dim: int, n_actions: int, recurrent: bool = False):
        super().__init__(obs_dim, n_actions, recurrent)
        self.n_actions = n_actions

    def log_probs(self, leaves, obs, state=None) -> tuple[Var, Var | None]:
        logits, new_state = self.forward(leaves, obs, state)
        return ad.log_softmax(logits), new_state

    def distribution(self, params: ParamVector, obs, state=None) -> tuple[np.ndarray, np.ndarray | None]:
        """Action probabilities without keeping the graph; for rollouts/eval."""
        lp, new_state = self.log_probs(self.leaves(params), obs, state)
        return np.exp(lp.data), None if new_state is None else new_state.data


class ValueNet(_Net):
    """Scalar value head(s) over the joint observation (optionally + identity tag)."""

    prefix = "vf."
    out_gain = 1.0

    def __init__(self, joint_obs_dim: int, n_heads: int = 1, recurrent: bool = False):
        super().__init__(joint_obs_dim, n_heads, recurrent)
        self.n_heads = n_heads

    def head_values(self, leaves, obs, head, state=None) -> tuple[Var, Var | None]:
        """Value of the selected head per row; `head` is an int or per-row index array."""
        values, new_state = self.forward(leaves, obs, state)
        idx = np.full(np.asarray(obs).shape[0], head) if np.isscalar(head) else head
        if np.any(np.asarray(idx) >= self.n_heads) or np.any(np.asarray(idx) < 0):
            raise IndexError(f"value head out of range: {idx} (n_heads={self.n_heads})")
        return ad.take_rows(values, idx), new_state

    def predict(self, params: ParamVector, obs, head=0, state=None) -> tuple[np.ndarray, np.ndarray | None]:
        v, new_state = self.head_values(self.leaves(params), obs, head, state)
        return v.data, None if new_state is None else new_state.data


@dataclass(frozen=True)
class ArchSpec:
    """Serializable architecture descriptor for checkpoints."""

    obs_dim: int
    joint_obs_dim: int
    n_actions: int
    n_heads: int = 1
    recurrent_policy: bool = False
    recurrent_value: bool = False

    def build(self) -> tuple[PolicyNet, ValueNet]:
        return (
            PolicyNet(self.obs_dim, self.n_actions, self.recurrent_policy),
            ValueNet(self.joint_obs_dim, self.n_heads, self.recurrent_value),
        )

    def to_dict(self) -> dict:
        return {
            "obs_dim": self.obs_dim,
            "joint_obs_dim": self.joint_obs_dim,
            "n_actions": self.n_actions,
            "n_heads": self.n_heads,
            "recurrent_policy": self.recurrent_policy,
            "recurrent_value": self.recurrent_value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArchSpec":
        return cls(**d)


def gather_grads(params: ParamVector, leaves: dict[str, Var]) -> np.ndarray:
    """Flat gradient aligned with params; zeros for leaves the loss never touched."""
    flat = np.zeros(params.size)
    for name, off, shape in params.spec:
        grad = leaves[name].grad
        if grad is not None:
            size = int(np.prod(shape))
            flat[off : off + size] = grad.ravel()
    return flat


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Sample one action per row from (B, n) probabilities."""
    u = rng.random((probs.shape[0], 1))
    return (probs.cumsum(axis=1) > u).argmax(axis=1)
