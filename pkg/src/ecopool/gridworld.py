"""Seeded procedural FourRooms gridworld.

A level is a rectangular grid whose outer boundary is walled and whose
interior is split into four rooms by one vertical and one horizontal wall
line.  Each of the four internal wall segments is pierced by exactly one
gap cell, so every room is reachable from every other.  Start pose and
goal cell are drawn uniformly over the free cells.

Everything here is a pure function of its arguments: the same seed and
config always produce bitwise-identical levels, and `step` never mutates
its inputs.  Each level field is drawn from its own RNG stream derived
from the level seed, so the generated layout does not depend on draw
order.

Coordinates are (x, y) with x growing right and y growing down; direction
N points toward smaller y.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache

import numpy as np

# Observation object codes (channel 0).  Channels 1 and 2 carry color and
# cell-state codes, both constant 0 in FourRooms.
UNSEEN = 0
EMPTY = 1
WALL = 2
GOAL = 3

VIEW_SIZE = 7
OBS_SHAPE = (VIEW_SIZE, VIEW_SIZE, 3)

# RNG stream labels, one per generated level field.
_S_VWALL, _S_HWALL, _S_GAPS, _S_START, _S_DIR, _S_GOAL = range(6)

_PLACEMENT_RETRIES = 1000


class Direction(IntEnum):
    N = 0
    E = 1
    S = 2
    W = 3


# (dx, dy) per direction; y grows downward so N is -y.
DIR_VECTORS = {
    Direction.N: (0, -1),
    Direction.E: (1, 0),
    Direction.S: (0, 1),
    Direction.W: (-1, 0),
}

# Clockwise neighbor, i.e. the direction to the agent's right.
_RIGHT_OF = {
    Direction.N: Direction.E,
    Direction.E: Direction.S,
    Direction.S: Direction.W,
    Direction.W: Direction.N,
}

AGENT_GLYPHS = {
    Direction.N: "^",
    Direction.E: ">",
    Direction.S: "v",
    Direction.W: "<",
}
_GLYPH_TO_DIR = {g: d for d, g in AGENT_GLYPHS.items()}


class Action(IntEnum):
    TURN_LEFT = 0
    TURN_RIGHT = 1
    FORWARD = 2


@dataclass(frozen=True)
class GridConfig:
    """Level dimensions and episode budget."""

    width: int = 9
    height: int = 9
    max_steps: int = 100


@dataclass(frozen=True)
class Level:
    """Immutable FourRooms map.

    `walls` holds every wall cell (boundary and internal lines, gap cells
    carved out); `gaps` lists the four door cells sorted lexicographically.
    """

    seed: int
    width: int
    height: int
    walls: frozenset[tuple[int, int]]
    gaps: tuple[tuple[int, int], ...]
    start_pos: tuple[int, int]
    start_dir: Direction
    goal_pos: tuple[int, int]
    max_steps: int


@dataclass(frozen=True)
class EnvState:
    level: Level
    agent_pos: tuple[int, int]
    agent_dir: Direction
    steps_used: int
    done: bool


def _stream(seed: int, label: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(label,))
    return np.random.Generator(np.random.PCG64(ss))


def generate_level(seed: int, config: GridConfig = GridConfig()) -> Level:
    """Build the FourRooms level for `seed`.

    Draw order (one independent RNG stream each): vertical wall x,
    horizontal wall y, the four gaps (top, bottom, left, right segment),
    start cell, start direction, goal cell.  Goal placement rejects
    collisions with the start cell for a bounded number of retries.

    Raises ValueError for even or too-small dimensions and RuntimeError if
    a distinct goal cell cannot be placed.
    """
    w, h = config.width, config.height
    if w < 9 or h < 9 or w % 2 == 0 or h % 2 == 0:
        raise ValueError(f"width and height must be odd and >= 9, got {w}x{h}")
    if config.max_steps < 1:
        raise ValueError(f"max_steps must be >= 1, got {config.max_steps}")
    if seed < 0:
        raise ValueError(f"seed must be a non-negative 64-bit integer, got {seed}")

    # Internal wall lines, kept off the boundary so all four rooms are
    # non-empty.
    vx = int(_stream(seed, _S_VWALL).integers(2, w - 2))
    hy = int(_stream(seed, _S_HWALL).integers(2, h - 2))

    # The four wall segments, excluding the crossing cell and boundary
    # junctions (the corners where wall lines meet).
    segments = [
        [(vx, y) for y in range(1, hy)],           # vertical, above crossing
        [(vx, y) for y in range(hy + 1, h - 1)],   # vertical, below crossing
        [(x, hy) for x in range(1, vx)],           # horizontal, left
        [(x, hy) for x in range(vx + 1, w - 1)],   # horizontal, right
    ]
    gap_rng = _stream(seed, _S_GAPS)
    gaps = [seg[int(gap_rng.integers(len(seg)))] for seg in segments]

    walls = set()
    for x in range(w):
        walls.add((x, 0))
        walls.add((x, h - 1))
    for y in range(h):
        walls.add((0, y))
        walls.add((w - 1, y))
    for y in range(1, h - 1):
        walls.add((vx, y))
    for x in range(1, w - 1):
        walls.add((x, hy))
    walls.difference_update(gaps)

    free = [
        (x, y)
        for y in range(1, h - 1)
        for x in range(1, w - 1)
        if (x, y) not in walls
    ]
    start = free[int(_stream(seed, _S_START).integers(len(free)))]
    start_dir = Direction(int(_stream(seed, _S_DIR).integers(4)))

    goal_rng = _stream(seed, _S_GOAL)
    for _ in range(_PLACEMENT_RETRIES):
        goal = free[int(goal_rng.integers(len(free)))]
        if goal != start:
            break
    else:
        raise RuntimeError(f"could not place a goal distinct from start (seed={seed})")

    return Level(
        seed=seed,
        width=w,
        height=h,
        walls=frozenset(walls),
        gaps=tuple(sorted(gaps)),
        start_pos=start,
        start_dir=start_dir,
        goal_pos=goal,
        max_steps=config.max_steps,
    )


def reset(level: Level) -> tuple[EnvState, np.ndarray]:
    state = EnvState(
        level=level,
        agent_pos=level.start_pos,
        agent_dir=level.start_dir,
        steps_used=0,
        done=False,
    )
    return state, observe(state)


def step(state: EnvState, action: Action) -> tuple[EnvState, np.ndarray, float, bool]:
    """Apply one action; returns (state, observation, reward, done).

    Reward is 1 - 0.9 * (steps_used / max_steps) on the step that reaches
    the goal, 0 otherwise; running out of steps terminates with reward 0.
    """
    if state.done:
        raise ValueError("cannot step a finished episode")

    level = state.level
    pos, direction = state.agent_pos, state.agent_dir
    if action == Action.TURN_LEFT:
        direction = Direction((direction - 1) % 4)
    elif action == Action.TURN_RIGHT:
        direction = Direction((direction + 1) % 4)
    elif action == Action.FORWARD:
        dx, dy = DIR_VECTORS[direction]
        target = (pos[0] + dx, pos[1] + dy)
        if target not in level.walls:
            pos = target
    else:
        raise ValueError(f"unknown action {action!r}")

    steps = state.steps_used + 1
    if pos == level.goal_pos:
        done = True
        reward = 1.0 - 0.9 * (steps / level.max_steps)
    elif steps == level.max_steps:
        done = True
        reward = 0.0
    else:
        done = False
        reward = 0.0

    new_state = EnvState(
        level=level, agent_pos=pos, agent_dir=direction, steps_used=steps, done=done
    )
    return new_state, observe(new_state), reward, done


@lru_cache(maxsize=256)
def _code_grid(level: Level) -> np.ndarray:
    """(height, width) array of object codes for the static map."""
    grid = np.full((level.height, level.width), EMPTY, dtype=np.uint8)
    for x, y in level.walls:
        grid[y, x] = WALL
    gx, gy = level.goal_pos
    grid[gy, gx] = GOAL
    return grid


_FWD = (VIEW_SIZE - 1) - np.arange(VIEW_SIZE)[:, None]  # rows: far -> near
_LAT = np.arange(VIEW_SIZE)[None, :] - VIEW_SIZE // 2   # cols: left -> right


def observe(state: EnvState) -> np.ndarray:
    """Egocentric 7x7x3 view of the cells ahead of the agent.

    The agent sits at the center of the view's near edge, facing the far
    edge.  Cells outside the map are coded unseen; walls do not occlude
    (cells behind them are still reported).  The agent's own cell shows
    its underlying content.
    """
    level = state.level
    x, y = state.agent_pos
    dx, dy = DIR_VECTORS[state.agent_dir]
    rx, ry = DIR_VECTORS[_RIGHT_OF[state.agent_dir]]

    wx = x + _FWD * dx + _LAT * rx
    wy = y + _FWD * dy + _LAT * ry
    inside = (wx >= 0) & (wx < level.width) & (wy >= 0) & (wy < level.height)

    obs = np.zeros(OBS_SHAPE, dtype=np.uint8)
    obs[..., 0][inside] = _code_grid(level)[wy[inside], wx[inside]]
    return obs


def render_ascii(state: EnvState) -> str:
    """Map as text: '#' wall, '.' empty, 'G' goal, '^>v<' agent by direction."""
    level = state.level
    rows = []
    for y in range(level.height):
        row = []
        for x in range(level.width):
            if (x, y) == state.agent_pos:
                row.append(AGENT_GLYPHS[state.agent_dir])
            elif (x, y) in level.walls:
                row.append("#")
            elif (x, y) == level.goal_pos:
                row.append("G")
            else:
                row.append(".")
        rows.append("".join(row))
    return "\n".join(rows)


def parse_ascii(text: str, *, seed: int = 0, max_steps: int = 100) -> EnvState:
    """Inverse of `render_ascii`, for building hand-crafted scenarios.

    The agent glyph becomes the level's start pose.  Gap cells cannot be
    recovered from glyphs alone, so the parsed level has an empty `gaps`
    tuple; four-rooms structure is not required of the input.
    """
    lines = [ln for ln in text.splitlines() if ln]
    height = len(lines)
    width = len(lines[0])
    if any(len(ln) != width for ln in lines):
        raise ValueError("ragged ascii map")

    walls, agent, direction, goal = set(), None, None, None
    for y, line in enumerate(lines):
        for x, ch in enumerate(line):
            if ch == "#":
                walls.add((x, y))
            elif ch == "G":
                goal = (x, y)
            elif ch in _GLYPH_TO_DIR:
                agent = (x, y)
                direction = _GLYPH_TO_DIR[ch]
            elif ch != ".":
                raise ValueError(f"unknown glyph {ch!r} at ({x},{y})")
    if agent is None or goal is None:
        raise ValueError("map must contain an agent glyph and a goal")

    level = Level(
        seed=seed,
        width=width,
        height=height,
        walls=frozenset(walls),
        gaps=(),
        start_pos=agent,
        start_dir=direction,
        goal_pos=goal,
        max_steps=max_steps,
    )
    return EnvState(
        level=level, agent_pos=agent, agent_dir=direction, steps_used=0, done=False
    )


def level_to_json(level: Level) -> dict:
    """Canonical JSON form; walls sorted lexicographically."""
    return {
        "seed": level.seed,
        "width": level.width,
        "height": level.height,
        "max_steps": level.max_steps,
        "walls": [[x, y] for x, y in sorted(level.walls)],
        "start": list(level.start_pos),
        "dir": level.start_dir.name,
        "goal": list(level.goal_pos),
    }


def level_from_json(data: dict) -> Level:
    walls = frozenset((int(x), int(y)) for x, y in data["walls"])
    w, h = int(data["width"]), int(data["height"])
    return Level(
        seed=int(data["seed"]),
        width=w,
        height=h,
        walls=walls,
        gaps=_infer_gaps(walls, w, h),
        start_pos=tuple(data["start"]),
        start_dir=Direction[data["dir"]],
        goal_pos=tuple(data["goal"]),
        max_steps=int(data["max_steps"]),
    )


def _infer_gaps(
    walls: frozenset[tuple[int, int]], width: int, height: int
) -> tuple[tuple[int, int], ...]:
    """Recover the four door cells from the wall set of a FourRooms map."""
    col_counts = {
        x: sum((x, y) in walls for y in range(1, height - 1))
        for x in range(1, width - 1)
    }
    row_counts = {
        y: sum((x, y) in walls for x in range(1, width - 1))
        for y in range(1, height - 1)
    }
    vx = max(col_counts, key=lambda x: (col_counts[x], -x))
    hy = max(row_counts, key=lambda y: (row_counts[y], -y))
    gaps = [(vx, y) for y in range(1, height - 1) if (vx, y) not in walls]
    gaps += [(x, hy) for x in range(1, width - 1) if (x, hy) not in walls]
    return tuple(sorted(gaps))


def level_to_json_str(level: Level) -> str:
    return json.dumps(level_to_json(level), separators=(", ", ": "))
