"""Trust-dilemma environments with feature-factored rewards R(s,a;i) = phi^T w."""

from .base import (
    ACTION_DELTAS,
    GRID_SIZE,
    HARE,
    STAG,
    EpisodeFinishedError,
    GridState,
    IteratedState,
    RewardWeights,
    StepResult,
)
from .escalation import ORIGINAL_ESCALATION_W, Escalation
from .iterated import ORIGINAL_ITERATED_W, IteratedStagHunt, MatrixStagHunt
from .monster_hunt import ORIGINAL_MONSTER_HUNT_W, MonsterHunt
from .trajectory import (
    TRAJECTORY_VERSION,
    TrajectoryRecorder,
    episode_event_totals,
    read_trajectory,
    render_grid_state,
    render_trajectory,
)

ENV_KINDS = {
    "matrix": MatrixStagHunt,
    "iterated": IteratedStagHunt,
    "monster_hunt": MonsterHunt,
    "escalation": Escalation,
}

ORIGINAL_WEIGHTS = {
    "matrix": (4.0, 3.0, -10.0, 1.0),
    "iterated": ORIGINAL_ITERATED_W,
    "monster_hunt": ORIGINAL_MONSTER_HUNT_W,
    "escalation": ORIGINAL_ESCALATION_W,
}


def make_env(kind: str, weights, **kwargs):
    """Build an environment by kind name; `weights` may be raw values or RewardWeights."""
    if kind not in ENV_KINDS:
        raise ValueError(f"unknown env kind {kind!r}; known: {sorted(ENV_KINDS)}")
    if not isinstance(weights, RewardWeights):
        weights = RewardWeights.of(weights)
    return ENV_KINDS[kind](weights, **kwargs)


__all__ = [
    "ACTION_DELTAS",
    "GRID_SIZE",
    "STAG",
    "HARE",
    "EpisodeFinishedError",
    "GridState",
    "IteratedState",
    "RewardWeights",
    "StepResult",
    "Escalation",
    "IteratedStagHunt",
    "MatrixStagHunt",
    "MonsterHunt",
    "ENV_KINDS",
    "ORIGINAL_WEIGHTS",
    "make_env",
    "TrajectoryRecorder",
    "TRAJECTORY_VERSION",
    "read_trajectory",
    "render_grid_state",
    "render_trajectory",
    "episode_event_totals",
]
