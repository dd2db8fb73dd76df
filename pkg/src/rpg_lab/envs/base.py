"""Shared types for the trust-dilemma environments.

Every environment factors its reward as R(s, a; i) = phi(s, a; i)^T w, where
phi is a per-agent event-feature vector and w is a weight vector that can be
swapped without touching the dynamics: state transitions and all RNG draws
are independent of w.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GRID_SIZE = 5

# gridworld action encoding: one step in a cardinal direction
ACTION_DELTAS = ((-1, 0), (1, 0), (0, -1), (0, 1))  # up, down, left, right

# iterated / matrix game action encoding
STAG, HARE = 0, 1


class EpisodeFinishedError(RuntimeError):
    """Raised when step() is called on an episode that already ended."""


@dataclass(frozen=True)
class RewardWeights:
    """Weight vector w over reward features, with max-norm bound c_max."""

    values: tuple[float, ...]
    c_max: float

    def __post_init__(self):
        if self.c_max <= 0:
            raise ValueError("c_max must be positive")
        if max(abs(v) for v in self.values) > self.c_max + 1e-12:
            raise ValueError(f"max-norm of w exceeds c_max={self.c_max}: {self.values}")

    @classmethod
    def of(cls, values, c_max: float | None = None) -> "RewardWeights":
        vals = tuple(float(v) for v in values)
        if c_max is None:
            c_max = max(abs(v) for v in vals) or 1.0
        return cls(vals, float(c_max))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


@dataclass
class StepResult:
    """Outcome of one environment step.

    rewards[i] is exactly dot(features[i], w) for the active weights.
    `done` marks the end of the episode; `terminal` distinguishes a natural
    game-over (value bootstraps to zero) from a horizon truncation.
    """

    observations: list[np.ndarray]
    features: list[np.ndarray]
    rewards: list[float]
    done: bool
    event_counters: dict[str, int]
    terminal: bool = False


@dataclass
class GridState:
    """World state of the 5x5 gridworld games; unused fields stay None."""

    agent_positions: list[tuple[int, int]]
    monster_position: tuple[int, int] | None = None
    apple_positions: list[tuple[int, int]] | None = None
    lit_position: tuple[int, int] | None = None
    streak: int = 0
    step_count: int = 0

    def to_dict(self) -> dict:
        return {
            "agents": [list(p) for p in self.agent_positions],
            "monster": list(self.monster_position) if self.monster_position else None,
            "apples": [list(p) for p in self.apple_positions] if self.apple_positions else None,
            "lit": list(self.lit_position) if self.lit_position else None,
            "streak": self.streak,
            "step_count": self.step_count,
        }


@dataclass
class IteratedState:
    """Round index and last joint action of the iterated matrix game."""

    round: int = 0
    last_actions: tuple[int, int] = (-1, -1)

    def to_dict(self) -> dict:
        return {"round": self.round, "last_actions": list(self.last_actions)}


def manhattan(p: tuple[int, int], q: tuple[int, int]) -> int:
    return abs(p[0] - q[0]) + abs(p[1] - q[1])


def move_within_grid(pos: tuple[int, int], action: int) -> tuple[int, int]:
    """Apply a cardinal move; moves that exceed the border leave the agent in place."""
    if not (isinstance(action, (int, np.integer)) and 0 <= action < 4):
        raise ValueError(f"invalid gridworld action: {action!r}")
    dr, dc = ACTION_DELTAS[action]
    r, c = pos[0] + dr, pos[1] + dc
    if 0 <= r < GRID_SIZE and 0 <= c < GRID_SIZE:
        return (r, c)
    return pos


def sample_distinct_cells(rng: np.random.Generator, count: int) -> list[tuple[int, int]]:
    """Uniform placement on distinct cells of the 5x5 grid."""
    flat = rng.choice(GRID_SIZE * GRID_SIZE, size=count, replace=False)
    return [(int(f) // GRID_SIZE, int(f) % GRID_SIZE) for f in flat]


def sample_free_cell(
    rng: np.random.Generator, occupied: set[tuple[int, int]]
) -> tuple[int, int]:
    """Uniform draw over cells not currently holding any entity."""
    free = [
        (r, c)
        for r in range(GRID_SIZE)
        for c in range(GRID_SIZE)
        if (r, c) not in occupied
    ]
    return free[int(rng.integers(len(free)))]
