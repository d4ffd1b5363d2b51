"""Tabular Q-learning over the store environment.

States are (current node, target node) pairs; actions are the graph
neighbors of the current node. Unseen state entries are initialized
lazily with random optimistic values so unexplored moves stay
attractive.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .env import Environment, Sequencer, run_episode
from .graph import StoreGraph

QState = tuple[int, int]  # (current node, target node)

DEFAULT_CONVERGENCE_THRESHOLD = 1e-3


class QTableFormatError(Exception):
    pass


class QTable:
    """Lookup table (current, target) x neighbor-action -> value."""

    def __init__(self, init_range: tuple[float, float] = (0.0, 200.0), seed: int = 0):
        lo, hi = init_range
        if hi < lo:
            raise ValueError("init_range upper bound below lower bound")
        self.init_range = (float(lo), float(hi))
        self.entries: dict[QState, dict[int, float]] = {}
        self._init_rng = np.random.default_rng(np.random.SeedSequence([seed, 0x51]))

    def ensure(self, state: QState, legal: Sequence[int]) -> dict[int, float]:
        """Materialize the row for a state with optimistic random values."""
        row = self.entries.get(state)
        if row is None:
            lo, hi = self.init_range
            row = {
                int(a): float(self._init_rng.uniform(lo, hi)) for a in sorted(legal)
            }
            self.entries[state] = row
        return row

    def value(self, state: QState, action: int) -> float:
        return self.entries[state][action]

    def best_value(self, state: QState, legal: Sequence[int]) -> float:
        row = self.ensure(state, legal)
        return max(row.values()) if row else 0.0

    def __len__(self) -> int:
        return len(self.entries)


def select_action(
    qtable: QTable,
    state: QState,
    legal: Sequence[int],
    epsilon: float,
    rng: np.random.Generator,
) -> int:
    """Epsilon-greedy over the legal actions; greedy ties break to the
    smallest node id."""
    legal = sorted(legal)
    if not legal:
        raise ValueError(f"no legal actions at state {state}")
    row = qtable.ensure(state, legal)
    if epsilon > 0 and rng.random() < epsilon:
        return int(legal[rng.integers(len(legal))])
    return min(legal, key=lambda a: (-row[a], a))


def update(
    qtable: QTable,
    state: QState,
    action: int,
    reward: float,
    next_state: QState,
    legal_next: Sequence[int],
    alpha: float,
    gamma: float,
) -> float:
    """One Bellman backup; returns |change| of the touched entry.

    An empty legal_next marks a terminal successor (no future value).
    """
    row = qtable.entries[state]
    future = qtable.best_value(next_state, legal_next) if legal_next else 0.0
    delta = alpha * (reward + gamma * future - row[action])
    row[action] += delta
    return abs(delta)


@dataclass
class TrainConfig:
    alpha: float = 0.97
    gamma: float = 0.9
    epsilon: float = 0.01
    episodes: int = 500
    convergence_threshold: float = DEFAULT_CONVERGENCE_THRESHOLD
    eval_epsilon: float | None = None  # defaults to the training epsilon

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must be in [0, 1)")
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must be in [0, 1]")

    @property
    def effective_eval_epsilon(self) -> float:
        return self.epsilon if self.eval_epsilon is None else self.eval_epsilon


def train(
    env: Environment,
    sequencer: Sequencer,
    config: TrainConfig,
    seed: int,
    qtable: QTable | None = None,
    episode_callback: Callable[[int, float], None] | None = None,
) -> tuple[QTable, list[float]]:
    """Run training episodes until the budget or convergence.

    Returns the table and the per-episode cumulative reward series.
    Convergence = the largest absolute Q change within an episode drops
    below the configured threshold.
    """
    graph = env.graph
    w4 = env.config.reward_weights.pick
    if qtable is None:
        qtable = QTable(init_range=(0.0, 2.0 * w4), seed=seed)
    explore_rng = np.random.default_rng(np.random.SeedSequence([seed, 0xE9]))
    rewards: list[float] = []
    for episode in range(config.episodes):
        max_delta = 0.0

        def decide(obs):
            state = (obs.picker_node, obs.target_node)
            return select_action(
                qtable, state, graph.neighbors(obs.picker_node), config.epsilon, explore_rng
            )

        def on_step(obs, action, outcome):
            nonlocal max_delta
            state = (obs.picker_node, obs.target_node)
            nxt = outcome.observation
            next_state = (nxt.picker_node, nxt.target_node)
            legal_next = () if outcome.done else graph.neighbors(nxt.picker_node)
            delta = update(
                qtable,
                state,
                action,
                outcome.reward,
                next_state,
                legal_next,
                config.alpha,
                config.gamma,
            )
            max_delta = max(max_delta, delta)

        metrics = run_episode(env, decide, sequencer, seed=[seed, episode], on_step=on_step)
        rewards.append(metrics.reward)
        if episode_callback is not None:
            episode_callback(episode, metrics.reward)
        if max_delta < config.convergence_threshold:
            break
    return qtable, rewards


def greedy_path(
    qtable: QTable,
    graph: StoreGraph,
    start: int,
    target: int,
    epsilon: float,
    rng: np.random.Generator,
    step_cap: int,
) -> tuple[list[int], bool]:
    """Follow the table from start to target; epsilon-randomness is the
    cycle escape. Returns (visited nodes after start, reached flag)."""
    if step_cap <= 0:
        raise ValueError("step_cap must be positive")
    path: list[int] = []
    node = start
    while node != target and len(path) < step_cap:
        action = select_action(qtable, (node, target), graph.neighbors(node), epsilon, rng)
        path.append(action)
        node = action
    return path, node == target


def save_qtable(qtable: QTable, path: str) -> None:
    rows = sorted(
        ((cur, tgt, action, value) for (cur, tgt), row in qtable.entries.items()
         for action, value in row.items())
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["current", "target", "action", "value"])
        for cur, tgt, action, value in rows:
            writer.writerow([cur, tgt, action, f"{value:.17g}"])


def load_qtable(path: str, init_range: tuple[float, float] = (0.0, 200.0)) -> QTable:
    qtable = QTable(init_range=init_range)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["current", "target", "action", "value"]:
            raise QTableFormatError(f"unexpected header {header} in {path}")
        for lineno, row in enumerate(reader, start=2):
            try:
                cur, tgt, action = int(row[0]), int(row[1]), int(row[2])
                value = float(row[3])
            except (IndexError, ValueError) as exc:
                raise QTableFormatError(f"{path}:{lineno}: malformed row {row}") from exc
            state_row = qtable.entries.setdefault((cur, tgt), {})
            if action in state_row:
                raise QTableFormatError(
                    f"{path}:{lineno}: duplicate entry ({cur},{tgt},{action})"
                )
            state_row[action] = value
    return qtable
