"""Escalation gridworld: keep stepping on the lit cell together or walk away.

Per-agent features are [both on lit cell, defection-penalty feature]; the
original game is w = [1, -0.9]. While both agents stand on the lit cell the
streak L grows and a random neighboring cell lights up next; if exactly one
agent is on the lit cell its penalty feature fires with value L and the
episode ends; if neither is, the streak resets, a fresh random cell lights
up, and the game continues.
"""

from __future__ import annotations

import numpy as np

from .base import (
    GRID_SIZE,
    EpisodeFinishedError,
    GridState,
    RewardWeights,
    StepResult,
    move_within_grid,
    sample_distinct_cells,
)

EVENT_NAMES = ("#Coop-Steps",)

ORIGINAL_ESCALATION_W = (1.0, -0.9)


def lit_neighbors(pos: tuple[int, int]) -> list[tuple[int, int]]:
    out = []
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        r, c = pos[0] + dr, pos[1] + dc
        if 0 <= r < GRID_SIZE and 0 <= c < GRID_SIZE:
            out.append((r, c))
    return out


class Escalation:
    """5x5 gridworld whose cooperation chain pays 1 per joint step but risks 0.9L."""

    kind = "escalation"
    n_agents = 2
    n_actions = 4
    obs_dim = 6
    feature_dim = 2
    event_names = EVENT_NAMES

    def __init__(self, weights: RewardWeights, episode_length: int = 50):
        if len(weights.values) != self.feature_dim:
            raise ValueError(f"escalation needs 2 weights, got {len(weights.values)}")
        self.weights = weights
        self.episode_length = episode_length
        self._w = weights.as_array()
        self._done = True

    def reset(self, seed: int) -> list[np.ndarray]:
        self.rng = np.random.default_rng(seed)
        cells = sample_distinct_cells(self.rng, 3)
        self._agents = cells[:2]
        self._lit = cells[2]
        self._streak = 0
        self._steps = 0
        self._done = False
        return [self.observe(i) for i in range(self.n_agents)]

    @property
    def state(self) -> GridState:
        return GridState(
            agent_positions=list(self._agents),
            lit_position=self._lit,
            streak=self._streak,
            step_count=self._steps,
        )

    @property
    def done(self) -> bool:
        return self._done

    def observe(self, agent: int) -> np.ndarray:
        """Own position, other agent's position, lit cell position."""
        own = self._agents[agent]
        other = self._agents[1 - agent]
        return np.array([*own, *other, *self._lit], dtype=np.float64)

    def step(self, actions) -> StepResult:
        if self._done:
            raise EpisodeFinishedError("episode already finished")
        self._agents = [move_within_grid(self._agents[i], int(actions[i])) for i in range(2)]

        features = [np.zeros(2), np.zeros(2)]
        events = dict.fromkeys(EVENT_NAMES, 0)
        on_lit = [self._agents[i] == self._lit for i in range(2)]
        terminal = False

        if on_lit[0] and on_lit[1]:
            features[0][0] = features[1][0] = 1.0
            events["#Coop-Steps"] = 1
            self._streak += 1
            neighbors = lit_neighbors(self._lit)
            self._lit = neighbors[int(self.rng.integers(len(neighbors)))]
        elif on_lit[0] or on_lit[1]:
            loner = 0 if on_lit[0] else 1
            features[loner][1] = float(self._streak)
            terminal = True
        else:
            # both stepped off together: chain broken without punishment
            self._streak = 0
            flat = int(self.rng.integers(GRID_SIZE * GRID_SIZE))
            self._lit = (flat // GRID_SIZE, flat % GRID_SIZE)

        rewards = [float(np.dot(f, self._w)) for f in features]
        self._steps += 1
        self._done = terminal or self._steps >= self.episode_length
        return StepResult(
            observations=[self.observe(i) for i in range(2)],
            features=features,
            rewards=rewards,
            done=self._done,
            event_counters=events,
            terminal=terminal,
        )
