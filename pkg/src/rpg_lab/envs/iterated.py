"""Iterated and one-shot matrix stag-hunt games with feature-factored rewards.

Actions: 0 = Stag, 1 = Hare. The 4-dim feature vector for agent i is the
one-hot of the joint outcome in payoff order (a, b, c, d):

    [both Stag, own Hare & other Stag, own Stag & other Hare, both Hare]

so the original iterated game is w = [4, 3, -50, 1].
"""

from __future__ import annotations

import numpy as np

from .base import (
    HARE,
    STAG,
    EpisodeFinishedError,
    IteratedState,
    RewardWeights,
    StepResult,
)

EVENT_NAMES = ("#Stag-Stag", "#Stag-Hare", "#Hare-Stag", "#Hare-Hare")

ORIGINAL_ITERATED_W = (4.0, 3.0, -50.0, 1.0)


def joint_outcome_features(a0: int, a1: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-agent one-hot outcome features in (a, b, c, d) payoff order."""
    phi0 = np.zeros(4)
    phi1 = np.zeros(4)
    if a0 == STAG and a1 == STAG:
        phi0[0] = phi1[0] = 1.0
    elif a0 == HARE and a1 == HARE:
        phi0[3] = phi1[3] = 1.0
    elif a0 == STAG:  # a1 == HARE: agent 0 hunts alone (c), agent 1 defects (b)
        phi0[2] = 1.0
        phi1[1] = 1.0
    else:  # a0 == HARE, a1 == STAG
        phi0[1] = 1.0
        phi1[2] = 1.0
    return phi0, phi1


class IteratedStagHunt:
    """Two agents play `rounds` rounds; observation is the last joint action."""

    kind = "iterated"
    n_agents = 2
    n_actions = 2
    obs_dim = 2
    feature_dim = 4
    event_names = EVENT_NAMES

    def __init__(self, weights: RewardWeights, rounds: int = 10):
        if len(weights.values) != self.feature_dim:
            raise ValueError(f"iterated stag-hunt needs 4 weights, got {len(weights.values)}")
        self.weights = weights
        self.rounds = rounds
        self.episode_length = rounds
        self._w = weights.as_array()
        self._state = IteratedState()
        self._done = True

    def reset(self, seed: int) -> list[np.ndarray]:
        self.rng = np.random.default_rng(seed)
        self._state = IteratedState(round=0, last_actions=(-1, -1))
        self._done = False
        return [self.observe(i) for i in range(self.n_agents)]

    @property
    def state(self) -> IteratedState:
        return IteratedState(self._state.round, self._state.last_actions)

    @property
    def done(self) -> bool:
        return self._done

    def observe(self, agent: int) -> np.ndarray:
        """Own and opponent action from the previous round; -1 before the first round."""
        own = self._state.last_actions[agent]
        other = self._state.last_actions[1 - agent]
        return np.array([own, other], dtype=np.float64)

    def step(self, actions) -> StepResult:
        if self._done:
            raise EpisodeFinishedError("episode already finished")
        a0, a1 = int(actions[0]), int(actions[1])
        if a0 not in (STAG, HARE) or a1 not in (STAG, HARE):
            raise ValueError(f"actions must be 0 (Stag) or 1 (Hare): {actions}")
        phi0, phi1 = joint_outcome_features(a0, a1)
        rewards = [float(np.dot(phi0, self._w)), float(np.dot(phi1, self._w))]
        events = dict.fromkeys(EVENT_NAMES, 0)
        events[EVENT_NAMES[a0 * 2 + a1]] = 1
        self._state = IteratedState(round=self._state.round + 1, last_actions=(a0, a1))
        self._done = self._state.round >= self.rounds
        return StepResult(
            observations=[self.observe(i) for i in range(self.n_agents)],
            features=[phi0, phi1],
            rewards=rewards,
            done=self._done,
            event_counters=events,
            terminal=self._done,
        )


class MatrixStagHunt(IteratedStagHunt):
    """One-shot matrix game: a single round with a constant observation."""

    kind = "matrix"

    def __init__(self, weights: RewardWeights):
        super().__init__(weights, rounds=1)

    def observe(self, agent: int) -> np.ndarray:
        return np.array([-1.0, -1.0])
