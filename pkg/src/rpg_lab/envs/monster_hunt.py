"""Monster-Hunt gridworld: a chasing monster, two static apples, N >= 2 agents.

Per-agent features are [caught monster cooperatively, ate apple, met monster
alone]; the original game is w = [5, 2, -2]. Agents move first, then the
monster takes one step toward its closest agent, then contacts are resolved
on the post-move cells and consumed entities respawn on free cells.
"""

from __future__ import annotations

import numpy as np

from .base import (
    EpisodeFinishedError,
    GridState,
    RewardWeights,
    StepResult,
    manhattan,
    move_within_grid,
    sample_distinct_cells,
    sample_free_cell,
)

EVENT_NAMES = ("#Coop-Hunt", "#Single-Hunt", "#Apple")

ORIGINAL_MONSTER_HUNT_W = (5.0, 2.0, -2.0)

# deterministic tie-break order for the monster's candidate moves:
# row before column, negative before positive direction
_MOVE_ORDER = ((-1, 0), (1, 0), (0, -1), (0, 1))


def monster_move(
    monster: tuple[int, int], agents: list[tuple[int, int]]
) -> tuple[int, int]:
    """One step toward the closest agent; stays put only at distance 0.

    For each closest agent the move follows the axis with the larger
    coordinate gap (row first on equal gaps); among equidistant agents the
    first candidate move in _MOVE_ORDER wins.
    """
    dmin = min(manhattan(monster, a) for a in agents)
    if dmin == 0:
        return monster
    candidates = set()
    for a in agents:
        if manhattan(monster, a) != dmin:
            continue
        dr = a[0] - monster[0]
        dc = a[1] - monster[1]
        if abs(dr) >= abs(dc) and dr != 0:
            candidates.add((1 if dr > 0 else -1, 0))
        else:
            candidates.add((0, 1 if dc > 0 else -1))
    for mv in _MOVE_ORDER:
        if mv in candidates:
            return (monster[0] + mv[0], monster[1] + mv[1])
    raise AssertionError("unreachable: no candidate monster move")


class MonsterHunt:
    """5x5 gridworld with a monster that chases the closest agent."""

    kind = "monster_hunt"
    n_actions = 4
    feature_dim = 3
    event_names = EVENT_NAMES

    def __init__(self, weights: RewardWeights, n_agents: int = 2, episode_length: int = 50):
        if len(weights.values) != self.feature_dim:
            raise ValueError(f"monster-hunt needs 3 weights, got {len(weights.values)}")
        if n_agents < 2:
            raise ValueError("monster-hunt needs at least 2 agents")
        self.weights = weights
        self.n_agents = n_agents
        self.episode_length = episode_length
        self.obs_dim = 2 * n_agents + 2 + 4  # all agents + monster + two sorted apples
        self._w = weights.as_array()
        self._done = True

    def reset(self, seed: int) -> list[np.ndarray]:
        self.rng = np.random.default_rng(seed)
        cells = sample_distinct_cells(self.rng, self.n_agents + 3)
        self._agents = cells[: self.n_agents]
        self._monster = cells[self.n_agents]
        self._apples = cells[self.n_agents + 1 :]
        self._steps = 0
        self._done = False
        return [self.observe(i) for i in range(self.n_agents)]

    @property
    def state(self) -> GridState:
        return GridState(
            agent_positions=list(self._agents),
            monster_position=self._monster,
            apple_positions=list(self._apples),
            step_count=self._steps,
        )

    @property
    def done(self) -> bool:
        return self._done

    def observe(self, agent: int) -> np.ndarray:
        """Own position, the other agents' positions, monster, then sorted apples."""
        coords: list[int] = list(self._agents[agent])
        for i in range(self.n_agents):
            if i != agent:
                coords.extend(self._agents[i])
        coords.extend(self._monster)
        for pos in sorted(self._apples):
            coords.extend(pos)
        return np.array(coords, dtype=np.float64)

    def step(self, actions) -> StepResult:
        if self._done:
            raise EpisodeFinishedError("episode already finished")
        if len(actions) != self.n_agents:
            raise ValueError(f"expected {self.n_agents} actions, got {len(actions)}")
        self._agents = [
            move_within_grid(self._agents[i], int(actions[i])) for i in range(self.n_agents)
        ]
        self._monster = monster_move(self._monster, self._agents)

        features = [np.zeros(3) for _ in range(self.n_agents)]
        events = dict.fromkeys(EVENT_NAMES, 0)

        hunters = [i for i in range(self.n_agents) if self._agents[i] == self._monster]
        if len(hunters) >= 2:
            for i in hunters:
                features[i][0] = 1.0
            events["#Coop-Hunt"] = 1
        elif len(hunters) == 1:
            features[hunters[0]][2] = 1.0
            events["#Single-Hunt"] = 1

        eaten: list[int] = []
        for k, apple in enumerate(self._apples):
            contenders = [i for i in range(self.n_agents) if self._agents[i] == apple]
            if not contenders:
                continue
            if len(contenders) > 1:
                winner = contenders[int(self.rng.integers(len(contenders)))]
            else:
                winner = contenders[0]
            features[winner][1] = 1.0
            events["#Apple"] += 1
            eaten.append(k)

        monster_cur = None if hunters else self._monster
        apples_cur: list[tuple[int, int] | None] = [
            None if k in eaten else a for k, a in enumerate(self._apples)
        ]

        def occupied() -> set[tuple[int, int]]:
            live = [monster_cur, *apples_cur]
            return set(self._agents) | {p for p in live if p is not None}

        if hunters:
            monster_cur = sample_free_cell(self.rng, occupied())
        for k in eaten:
            apples_cur[k] = sample_free_cell(self.rng, occupied())
        self._monster = monster_cur
        self._apples = apples_cur

        rewards = [float(np.dot(f, self._w)) for f in features]
        self._steps += 1
        self._done = self._steps >= self.episode_length
        return StepResult(
            observations=[self.observe(i) for i in range(self.n_agents)],
            features=features,
            rewards=rewards,
            done=self._done,
            event_counters=events,
            terminal=False,
        )
