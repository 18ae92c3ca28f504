"""Synthetic desk-scale environments with exact planning oracles.

A B-ary tree world (hierarchical by construction, level-order node ids)
and a 2-D continuous drift world.  Both expose observe/step dynamics, a
brute-force planning oracle, and seeded dataset generation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import worldmodel as wm


@dataclass(frozen=True)
class TreeWorld:
    """Complete B-ary tree of the given depth; actions descend to children.

    Node ids are level-order: root 0, children of node s are
    s*B + a + 1 for action a.  Leaves absorb.  Observations are
    one-hot(node) concatenated with a fixed per-node Gaussian feature,
    plus fresh N(0, sigma^2) noise on every call.
    """

    branching: int = 3
    depth: int = 6
    feature_dim: int = 16
    noise: float = 0.05
    seed: int = 0
    features: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.branching < 2:
            raise ValueError(f"branching must be >= 2, got {self.branching}")
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if self.noise < 0:
            raise ValueError(f"noise must be >= 0, got {self.noise}")
        rng = np.random.default_rng(self.seed)
        object.__setattr__(
            self, "features",
            rng.standard_normal((self.num_nodes, self.feature_dim)))

    @property
    def num_nodes(self) -> int:
        b, d = self.branching, self.depth
        return (b ** (d + 1) - 1) // (b - 1)

    @property
    def num_actions(self) -> int:
        return self.branching

    @property
    def obs_dim(self) -> int:
        return self.num_nodes + self.feature_dim

    def is_leaf(self, state: int) -> bool:
        return self.first_child(state) >= self.num_nodes

    def first_child(self, state: int) -> int:
        return state * self.branching + 1

    def node_depth(self, state: int) -> int:
        d = 0
        while state > 0:
            state = (state - 1) // self.branching
            d += 1
        return d

    def ancestors(self, state: int) -> list:
        """Path of node ids from the root down to `state` inclusive."""
        path = [state]
        while state > 0:
            state = (state - 1) // self.branching
            path.append(state)
        return path[::-1]


def step(world: TreeWorld, state: int, action: int) -> int:
    """Descend to the chosen child; leaves return themselves."""
    if not 0 <= action < world.branching:
        raise ValueError(f"action {action} outside [0, {world.branching})")
    if not 0 <= state < world.num_nodes:
        raise ValueError(f"invalid node id {state}")
    if world.is_leaf(state):
        return state
    return state * world.branching + action + 1


def observe(world: TreeWorld, state: int,
            rng: np.random.Generator = None) -> np.ndarray:
    """One-hot id block plus fixed feature, with fresh additive noise."""
    if not 0 <= state < world.num_nodes:
        raise ValueError(f"invalid node id {state}")
    obs = np.zeros(world.obs_dim)
    obs[state] = 1.0
    obs[world.num_nodes:] = world.features[state]
    if world.noise > 0:
        if rng is None:
            rng = np.random.default_rng()
        obs += rng.normal(0.0, world.noise, size=world.obs_dim)
    return obs


def brute_force_plan(world: TreeWorld, start: int, goal: int, horizon: int):
    """Action sequence of exactly `horizon` steps from start to goal.

    Equivalent to exhaustively scoring all B^T sequences and taking the
    lexicographically first hit; implemented as a depth-first search with
    ancestor pruning, which returns the identical answer because goals
    are only reachable along the unique root-ward path (with any suffix
    absorbed at goal if goal is a leaf).  Returns None when unreachable.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")

    def dfs(state, remaining):
        if remaining == 0:
            return [] if state == goal else None
        if world.is_leaf(state):
            # absorbing: any suffix works iff already at goal
            return [0] * remaining if state == goal else None
        for action in range(world.branching):
            child = step(world, state, action)
            if not _can_reach(world, child, goal, remaining - 1):
                continue
            tail = dfs(child, remaining - 1)
            if tail is not None:
                return [action] + tail
        return None

    return dfs(start, horizon)


def _can_reach(world: TreeWorld, state: int, goal: int, remaining: int):
    """Tree reachability: goal must sit `<= remaining` levels below state
    (exactly, unless the path ends on an absorbing leaf)."""
    gap = world.node_depth(goal) - world.node_depth(state)
    if gap < 0 or gap > remaining:
        return False
    if gap < remaining and not world.is_leaf(goal):
        return False
    # goal must descend from state
    node = goal
    for _ in range(gap):
        node = (node - 1) // world.branching
    return node == state


@dataclass
class TrajectoryRecord:
    observations: list    # length T+1 arrays
    actions: list         # length T ints
    start_node: int
    goal_node: int
    optimal_actions: list


def generate_dataset(world: TreeWorld, num_traj: int, horizon: int,
                     seed: int) -> list:
    """Seeded random trajectories with oracle labels for each realized pair.

    Starts are sampled from nodes at least `horizon` levels above the
    leaves so every trajectory realizes `horizon` distinct transitions.
    """
    if num_traj < 1:
        raise ValueError("num_traj must be >= 1")
    if horizon > world.depth:
        raise ValueError(f"horizon {horizon} exceeds depth {world.depth}")
    rng = np.random.default_rng(seed)
    max_start_depth = world.depth - horizon
    starts = [n for n in range(world.num_nodes)
              if world.node_depth(n) <= max_start_depth]
    records = []
    for _ in range(num_traj):
        start = int(starts[rng.integers(len(starts))])
        actions = [int(a) for a in rng.integers(0, world.branching,
                                                size=horizon)]
        states = [start]
        for a in actions:
            states.append(step(world, states[-1], a))
        obs = [observe(world, s, rng) for s in states]
        goal = states[-1]
        optimal = brute_force_plan(world, start, goal, horizon)
        records.append(TrajectoryRecord(
            observations=obs, actions=actions, start_node=start,
            goal_node=goal, optimal_actions=optimal))
    return records


def write_dataset(records: list, path) -> None:
    """JSON-lines serialization, one record per line, plain number arrays."""
    with open(path, "w") as fh:
        for rec in records:
            doc = {
                "observations": [np.asarray(o).tolist()
                                 for o in rec.observations],
                "actions": list(rec.actions),
                "start_node": rec.start_node,
                "goal_node": rec.goal_node,
                "optimal_actions": list(rec.optimal_actions),
            }
            fh.write(json.dumps(doc, sort_keys=True) + "\n")


def read_dataset(path) -> list:
    records = []
    with open(path) as fh:
        for line in fh:
            doc = json.loads(line)
            records.append(TrajectoryRecord(
                observations=[np.asarray(o, dtype=np.float64)
                              for o in doc["observations"]],
                actions=list(doc["actions"]),
                start_node=doc["start_node"],
                goal_node=doc["goal_node"],
                optimal_actions=list(doc["optimal_actions"])))
    return records


def generate_latent_dataset(world: TreeWorld, encoder: wm.EncoderSpec,
                            num_traj: int, horizon: int, seed: int):
    """Streamed variant: encode observations immediately, keep latents only.

    The encoder is frozen, so pre-encoding is equivalent to storing raw
    observations; this keeps large datasets in memory cheaply.  Returns
    (latents (num_traj, T+1, n), actions (num_traj, T) int array).
    """
    if num_traj < 1:
        raise ValueError("num_traj must be >= 1")
    if horizon > world.depth:
        raise ValueError(f"horizon {horizon} exceeds depth {world.depth}")
    rng = np.random.default_rng(seed)
    max_start_depth = world.depth - horizon
    starts = np.array([n for n in range(world.num_nodes)
                       if world.node_depth(n) <= max_start_depth])
    latents = np.empty((num_traj, horizon + 1, encoder.latent_dim))
    actions = np.empty((num_traj, horizon), dtype=np.int64)
    for i in range(num_traj):
        start = int(starts[rng.integers(len(starts))])
        acts = rng.integers(0, world.branching, size=horizon)
        states = [start]
        for a in acts:
            states.append(step(world, states[-1], int(a)))
        obs = np.stack([observe(world, s, rng) for s in states])
        latents[i] = wm.encode(obs, encoder)
        actions[i] = acts
    return latents, actions


@dataclass
class TreeEpisode:
    """Mutable per-episode wrapper for receding-horizon execution."""

    world: TreeWorld
    state: int
    rng: np.random.Generator

    def observe(self) -> np.ndarray:
        return observe(self.world, self.state, self.rng)

    def step(self, action: int) -> int:
        self.state = step(self.world, self.state, int(action))
        return self.state


# ---------------------------------------------------------------------------
# 2-D drift world (continuous observations, discrete-or-continuous actions)

_COMPASS = np.array([[np.cos(k * np.pi / 4), np.sin(k * np.pi / 4)]
                     for k in range(8)])


@dataclass(frozen=True)
class DriftWorld:
    """Planar world: position += 0.1 * unit compass vector (8 actions)."""

    step_size: float = 0.1
    noise: float = 0.0
    seed: int = 0

    @property
    def num_actions(self) -> int:
        return 8

    @property
    def obs_dim(self) -> int:
        return 2


def drift_step(world: DriftWorld, pos: np.ndarray, action: int) -> np.ndarray:
    if not 0 <= action < 8:
        raise ValueError(f"action {action} outside [0, 8)")
    return np.asarray(pos, dtype=np.float64) + world.step_size * _COMPASS[action]


def drift_observe(world: DriftWorld, pos: np.ndarray,
                  rng: np.random.Generator = None) -> np.ndarray:
    obs = np.asarray(pos, dtype=np.float64).copy()
    if world.noise > 0:
        if rng is None:
            rng = np.random.default_rng()
        obs += rng.normal(0.0, world.noise, size=2)
    return obs


def drift_plan(world: DriftWorld, start: np.ndarray, goal: np.ndarray,
               horizon: int) -> list:
    """Greedy straight-line oracle: exact for these unit-step dynamics."""
    pos = np.asarray(start, dtype=np.float64)
    goal = np.asarray(goal, dtype=np.float64)
    actions = []
    for _ in range(horizon):
        gaps = np.linalg.norm(goal - (pos + world.step_size * _COMPASS),
                              axis=1)
        a = int(np.argmin(gaps))
        actions.append(a)
        pos = drift_step(world, pos, a)
    return actions
