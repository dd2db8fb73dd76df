"""Versioned line-oriented trajectory files and an ASCII grid renderer.

A trajectory file holds one JSON object per line: a header with the env
kind, seed, and reward weights, then one record per step with actions,
features, rewards, events, and the post-step world state, so episodes can
be re-rendered and audited without re-simulating.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .base import GRID_SIZE

TRAJECTORY_VERSION = "rpg-traj-v1"


class TrajectoryRecorder:
    """Collects one episode's step records for an environment instance."""

    def __init__(self, env, seed: int):
        self.header = {
            "version": TRAJECTORY_VERSION,
            "env": env.kind,
            "seed": seed,
            "w": list(env.weights.values),
            "n_agents": env.n_agents,
        }
        self._env = env
        self.initial_state = env.state.to_dict()
        self.steps: list[dict] = []

    def record(self, actions, result) -> None:
        self.steps.append(
            {
                "t": len(self.steps),
                "actions": [int(a) for a in actions],
                "features": [list(map(float, f)) for f in result.features],
                "rewards": [float(r) for r in result.rewards],
                "events": dict(result.event_counters),
                "done": bool(result.done),
                "terminal": bool(result.terminal),
                "state": self._env.state.to_dict(),
            }
        )

    def write(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            fh.write(json.dumps(self.header) + "\n")
            fh.write(json.dumps({"initial_state": self.initial_state}) + "\n")
            for step in self.steps:
                fh.write(json.dumps(step) + "\n")


def read_trajectory(path) -> tuple[dict, dict, list[dict]]:
    """Returns (header, initial_state, steps); rejects unknown versions."""
    with open(path) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("version") != TRAJECTORY_VERSION:
        raise ValueError(f"unsupported trajectory file version in {path}")
    return lines[0], lines[1]["initial_state"], lines[2:]


def episode_event_totals(steps: list[dict]) -> dict[str, int]:
    totals: dict[str, int] = {}
    for step in steps:
        for name, count in step["events"].items():
            totals[name] = totals.get(name, 0) + count
    return totals


def render_grid_state(state: dict) -> str:
    """ASCII picture of one 5x5 state; agents are digits, M monster, a apple, L lit."""
    glyphs: dict[tuple[int, int], str] = {}

    def put(pos, glyph):
        key = (pos[0], pos[1])
        glyphs[key] = glyphs.get(key, "") + glyph

    if state.get("lit"):
        put(state["lit"], "L")
    if state.get("monster"):
        put(state["monster"], "M")
    for apple in state.get("apples") or []:
        put(apple, "a")
    for i, agent in enumerate(state.get("agents") or []):
        put(agent, str(i))

    width = max(3, max((len(g) for g in glyphs.values()), default=1) + 1)
    rows = []
    for r in range(GRID_SIZE):
        cells = [glyphs.get((r, c), ".").ljust(width) for c in range(GRID_SIZE)]
        rows.append("".join(cells).rstrip())
    return "\n".join(rows)


def render_trajectory(path) -> str:
    """Deterministic re-render of a recorded episode from the file alone."""
    header, initial_state, steps = read_trajectory(path)
    out = [
        f"env={header['env']} seed={header['seed']} w={header['w']}",
        "initial state:",
    ]
    grid_env = header["env"] in ("monster_hunt", "escalation")
    if grid_env:
        out.append(render_grid_state(initial_state))
    else:
        out.append(json.dumps(initial_state))
    for step in steps:
        rewards = np.asarray(step["rewards"])
        out.append(
            f"step {step['t']}: actions={step['actions']} "
            f"rewards={np.array2string(rewards, precision=3)} "
            f"events={ {k: v for k, v in step['events'].items() if v} }"
        )
        if grid_env:
            out.append(render_grid_state(step["state"]))
        else:
            out.append(json.dumps(step["state"]))
    return "\n".join(out) + "\n"
