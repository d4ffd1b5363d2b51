"""Command-line interface: instance generation, SRP solving, training,
evaluation, and heatmap emission. All outputs are seeded and
byte-reproducible."""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import harness
from .env import EnvConfig
from .graph import load_layout, save_layout
from .instances import (
    CONCENTRATIONS,
    SIZES,
    ConcentrationProfile,
    LayoutSpec,
    generate_layout,
)
from .qlearning import TrainConfig, load_qtable, save_qtable, train
from .srp import build_instance, make_sequencer, solve_cutting_planes

BASIS_FLAGS = {"distance": "arc_distance", "crowdedness": "arc_crowdedness"}


def _read_traffic(path: str) -> dict[int, float]:
    traffic: dict[int, float] = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            traffic[int(rec["node"])] = float(rec["traffic"])
    return traffic


def _load_config(path: str | None) -> EnvConfig:
    if path is None:
        return EnvConfig()
    with open(path) as fh:
        return EnvConfig.from_dict(json.load(fh))


def cmd_generate_instance(args) -> int:
    graph = generate_layout(LayoutSpec.for_size(args.size), args.seed)
    save_layout(graph, args.out)
    print(f"wrote {args.out}: {len(graph.nodes)} nodes, {len(graph.edges())} edges")
    return 0


def cmd_solve_srp(args) -> int:
    graph = load_layout(args.layout)
    basis = BASIS_FLAGS[args.basis]
    traffic = _read_traffic(args.traffic) if args.traffic else None
    products = [int(p) for p in args.products.split(",") if p]
    instance = build_instance(graph, products, basis, traffic)
    solution = solve_cutting_planes(instance)
    print(json.dumps({"sequence": solution.sequence, "cost": solution.cost}))
    return 0


def cmd_train(args) -> int:
    graph = load_layout(args.layout)
    env_config = _load_config(args.config)
    profile = ConcentrationProfile.build(graph, args.concentration)
    env = harness.make_environment(graph, env_config, profile)
    basis = BASIS_FLAGS[args.basis]
    traffic = _read_traffic(args.traffic) if args.traffic else None
    sequencer = make_sequencer(graph, basis, traffic)
    config = TrainConfig(
        alpha=args.alpha, gamma=args.gamma, epsilon=args.epsilon, episodes=args.episodes
    )
    qtable, rewards = train(env, sequencer, config, args.seed)
    out_dir = harness.ensure_out_dir(args.out_dir)
    save_qtable(qtable, f"{out_dir}/qtable_{basis}.csv")
    with open(f"{out_dir}/rewards_{basis}.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "reward"])
        for ep, reward in enumerate(rewards):
            writer.writerow([ep, f"{reward:.17g}"])
    cv = harness.convergence_cv(rewards) if len(rewards) >= 50 else float("nan")
    print(
        f"trained {len(rewards)} episodes; last-50 CV {cv:.4f}; "
        f"table rows {len(qtable)}; outputs in {out_dir}"
    )
    return 0


def cmd_evaluate(args) -> int:
    graph = load_layout(args.layout)
    env_config = _load_config(args.config)
    profile = ConcentrationProfile.build(graph, args.concentration)
    basis = BASIS_FLAGS[args.basis]
    policies = args.policies.split(",")
    traffic = _read_traffic(args.traffic) if args.traffic else None
    ql_tables = {}
    if args.qtable:
        ql_tables[basis] = load_qtable(args.qtable)
    rows = harness.evaluate(
        graph, env_config, profile, policies, [basis],
        episodes=args.episodes, seed=args.seed,
        ql_tables=ql_tables, node_traffic=traffic, eval_epsilon=args.eval_epsilon,
    )
    out_dir = harness.ensure_out_dir(args.out_dir)
    out_path = f"{out_dir}/metrics_{basis}.csv"
    harness.write_metrics_csv(rows, out_path)
    for (policy, b), mean in harness.aggregate(rows).items():
        print(
            f"{policy:>3} {b}: reward {mean.reward:10.2f} orders {mean.orders:6.2f} "
            f"products {mean.products:7.2f} encounters {mean.encounters:8.2f}"
        )
    print(f"wrote {out_path}")
    return 0


def cmd_heatmap(args) -> int:
    graph = load_layout(args.layout)
    env_config = _load_config(args.config)
    profile = ConcentrationProfile.build(graph, args.concentration)
    harness.emit_heatmap(graph, env_config, profile, args.episodes, args.seed, args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="storepick",
        description="In-store picker routing simulator and policy toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-instance", help="emit a synthetic store layout file")
    p.add_argument("--size", choices=SIZES, required=True)
    p.add_argument("--concentration", choices=CONCENTRATIONS, default="entrance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate_instance)

    p = sub.add_parser("solve-srp", help="sequence a picking set exactly")
    p.add_argument("--layout", required=True)
    p.add_argument("--products", required=True, help="comma-separated node ids")
    p.add_argument("--basis", choices=sorted(BASIS_FLAGS), default="distance")
    p.add_argument("--traffic", help="node traffic CSV (for crowdedness basis)")
    p.set_defaults(func=cmd_solve_srp)

    p = sub.add_parser("train", help="train a Q-table on a layout")
    p.add_argument("--layout", required=True)
    p.add_argument("--config", help="EnvConfig JSON file (defaults to benchmark constants)")
    p.add_argument("--concentration", choices=CONCENTRATIONS, default="entrance")
    p.add_argument("--basis", choices=sorted(BASIS_FLAGS), default="distance")
    p.add_argument("--traffic", help="node traffic CSV (for crowdedness basis)")
    p.add_argument("--alpha", type=float, default=0.97)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--episodes", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="results")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="run benchmark policies and persist metrics")
    p.add_argument("--layout", required=True)
    p.add_argument("--config")
    p.add_argument("--concentration", choices=CONCENTRATIONS, default="entrance")
    p.add_argument("--policies", default="ql,sp,mp,cn", help="comma-separated subset of ql,sp,mp,cn")
    p.add_argument("--basis", choices=sorted(BASIS_FLAGS), default="distance")
    p.add_argument("--qtable", help="trained Q-table CSV for the chosen basis")
    p.add_argument("--traffic", help="node traffic CSV (for cn policy / crowdedness basis)")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--eval-epsilon", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="results")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("heatmap", help="emit per-node average customer presence")
    p.add_argument("--layout", required=True)
    p.add_argument("--config")
    p.add_argument("--concentration", choices=CONCENTRATIONS, default="entrance")
    p.add_argument("--episodes", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_heatmap)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
