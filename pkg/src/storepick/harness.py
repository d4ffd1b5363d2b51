"""Experiment orchestration: parameter grids, convergence reporting,
policy evaluation with shared customer streams, and CSV persistence."""

from __future__ import annotations

import csv
import itertools
import os
from dataclasses import dataclass, field

import numpy as np

from .env import ConfigError, EnvConfig, Environment, EpisodeMetrics, run_episode
from .graph import StoreGraph
from .instances import ConcentrationProfile, InstanceConfig, sample_shopping_list
from .policies import (
    CrowdedNodesPolicy,
    MyopicPolicy,
    QLearningPolicy,
    ShortestPathPolicy,
    calibrate_traffic,
)
from .qlearning import QTable, TrainConfig, train
from .srp import make_sequencer

METRICS_HEADER = ["policy", "basis", "episode", "reward", "orders", "products", "encounters", "steps"]
BASES = ("arc_distance", "arc_crowdedness")
POLICY_NAMES = ("ql", "sp", "mp", "cn")


def make_environment(graph: StoreGraph, env_config: EnvConfig, profile: ConcentrationProfile) -> Environment:
    return Environment(
        graph, env_config, lambda rng: sample_shopping_list(profile, rng)
    )


def convergence_cv(series: list[float], window: int = 50) -> float:
    """Population std over |mean| of the final `window` observations."""
    if len(series) < window:
        raise ValueError(f"series of length {len(series)} shorter than window {window}")
    tail = np.asarray(series[-window:], dtype=float)
    mean = tail.mean()
    if mean == 0:
        return float("inf") if tail.std() > 0 else 0.0
    return float(tail.std() / abs(mean))


@dataclass
class GridSpec:
    alphas: tuple[float, ...] = (0.95, 0.97, 0.99)
    gammas: tuple[float, ...] = (0.5, 0.7, 0.9)
    epsilons: tuple[float, ...] = (0.01,)
    episodes: int = 500
    snapshot_interval: int = 1000

    def configs(self) -> list[TrainConfig]:
        return [
            TrainConfig(alpha=a, gamma=g, epsilon=e, episodes=self.episodes)
            for a, g, e in itertools.product(self.alphas, self.gammas, self.epsilons)
        ]


@dataclass
class GridRunResult:
    instance: str
    config: TrainConfig
    rewards: list[float] = field(repr=False)
    qtable: QTable = field(repr=False)

    @property
    def score(self) -> float:
        tail = min(50, len(self.rewards))
        return float(np.mean(self.rewards[-tail:]))


@dataclass
class GridSummary:
    instance: str
    runs: list[GridRunResult]

    @property
    def best(self) -> GridRunResult:
        return max(self.runs, key=lambda r: (r.score, -r.config.alpha, -r.config.gamma))

    def reward_stats(self) -> tuple[float, float, float]:
        """(min, avg, max) of the per-config reward scores."""
        scores = [r.score for r in self.runs]
        return (min(scores), float(np.mean(scores)), max(scores))


def run_grid(
    instances: list[InstanceConfig],
    grid: GridSpec,
    seed: int,
    basis: str = "arc_distance",
) -> list[GridSummary]:
    """Train every (instance, alpha, gamma, epsilon) combination."""
    summaries = []
    for instance in instances:
        graph = instance.make_graph()
        profile = ConcentrationProfile.build(graph, instance.concentration)
        env = make_environment(graph, instance.env_config, profile)
        sequencer = make_sequencer(graph, basis)
        runs = []
        for config in grid.configs():
            qtable, rewards = train(env, sequencer, config, seed)
            runs.append(
                GridRunResult(instance=instance.name, config=config, rewards=rewards, qtable=qtable)
            )
        summaries.append(GridSummary(instance=instance.name, runs=runs))
    return summaries


def build_policy(
    name: str,
    graph: StoreGraph,
    basis: str,
    ql_tables: dict[str, QTable] | None = None,
    node_traffic: dict[int, float] | None = None,
    eval_epsilon: float = 0.01,
    rng: np.random.Generator | None = None,
):
    if name == "sp":
        return ShortestPathPolicy(graph)
    if name == "mp":
        return MyopicPolicy(graph)
    if name == "cn":
        if node_traffic is None:
            raise ConfigError("cn policy needs a calibrated node-traffic profile")
        return CrowdedNodesPolicy(graph, node_traffic)
    if name == "ql":
        if not ql_tables or basis not in ql_tables:
            raise ConfigError(
                f"no Q-table trained for routing basis {basis!r}; "
                "QL must be retrained per basis"
            )
        if rng is None:
            rng = np.random.default_rng(0)
        return QLearningPolicy(graph, ql_tables[basis], eval_epsilon, rng)
    raise ConfigError(f"unknown policy {name!r}")


@dataclass
class EvaluationRow:
    policy: str
    basis: str
    metrics: EpisodeMetrics


def evaluate(
    graph: StoreGraph,
    env_config: EnvConfig,
    profile: ConcentrationProfile,
    policies: list[str],
    bases: list[str],
    episodes: int,
    seed: int,
    ql_tables: dict[str, QTable] | None = None,
    node_traffic: dict[int, float] | None = None,
    eval_epsilon: float = 0.01,
) -> list[EvaluationRow]:
    """Per-episode metrics for every (policy, basis) pair.

    Episode seeds depend only on (seed, episode index), so every policy
    and basis faces the identical customer and order streams.
    """
    env = make_environment(graph, env_config, profile)
    rows: list[EvaluationRow] = []
    for basis in bases:
        sequencer = make_sequencer(graph, basis, node_traffic)
        for name in policies:
            rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA11]))
            policy = build_policy(
                name, graph, basis,
                ql_tables=ql_tables, node_traffic=node_traffic,
                eval_epsilon=eval_epsilon, rng=rng,
            )
            for ep in range(episodes):
                metrics = run_episode(env, policy.next_action, sequencer, seed=[seed, ep])
                metrics.episode = ep
                rows.append(EvaluationRow(policy=name, basis=basis, metrics=metrics))
    return rows


def aggregate(rows: list[EvaluationRow]) -> dict[tuple[str, str], EpisodeMetrics]:
    """Mean metrics per (policy, basis)."""
    out: dict[tuple[str, str], EpisodeMetrics] = {}
    for (policy, basis) in sorted({(r.policy, r.basis) for r in rows}):
        group = [r.metrics for r in rows if r.policy == policy and r.basis == basis]
        n = len(group)
        out[(policy, basis)] = EpisodeMetrics(
            episode=n,
            reward=sum(m.reward for m in group) / n,
            orders=sum(m.orders for m in group) / n,
            products=sum(m.products for m in group) / n,
            encounters=sum(m.encounters for m in group) / n,
            steps=sum(m.steps for m in group) / n,
        )
    return out


def write_metrics_csv(rows: list[EvaluationRow], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        for row in rows:
            m = row.metrics
            writer.writerow(
                [row.policy, row.basis, m.episode, f"{m.reward:.17g}",
                 m.orders, m.products, m.encounters, m.steps]
            )


def read_metrics_csv(path: str) -> list[EvaluationRow]:
    rows: list[EvaluationRow] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.append(
                EvaluationRow(
                    policy=rec["policy"],
                    basis=rec["basis"],
                    metrics=EpisodeMetrics(
                        episode=int(rec["episode"]),
                        reward=float(rec["reward"]),
                        orders=int(rec["orders"]),
                        products=int(rec["products"]),
                        encounters=int(rec["encounters"]),
                        steps=int(rec["steps"]),
                    ),
                )
            )
    return rows


def emit_heatmap(
    graph: StoreGraph,
    env_config: EnvConfig,
    profile: ConcentrationProfile,
    episodes: int,
    seed: int,
    path: str | None = None,
) -> dict[int, float]:
    """Per-node average customer presence, optionally persisted as CSV."""
    traffic = calibrate_traffic(
        lambda: make_environment(graph, env_config, profile), episodes=episodes, seed=seed
    )
    full = {node: traffic.get(node, 0.0) for node in graph.node_ids}
    if path is not None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["node", "traffic"])
            for node in sorted(full):
                writer.writerow([node, f"{full[node]:.17g}"])
    return full


def ensure_out_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
