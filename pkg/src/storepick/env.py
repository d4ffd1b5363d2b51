"""Discrete-event store environment: customers, online orders, picker MDP.

Time is a continuous clock in seconds. Customer arrivals and online-order
arrivals are Poisson processes whose event times are drawn once at reset
from dedicated seed streams, so the customer side of an episode is
identical for every picker policy sharing the seed. Picker decision
epochs happen on node arrival; customers move event-driven in between.
"""

from __future__ import annotations

import csv
import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .graph import NoPathError, StoreGraph, shortest_path

ARRIVAL_RATE_PERIOD = 60.0  # arrival rates are per minute
BLOCKED_RETRY_SECONDS = 1.0


class ConfigError(Exception):
    pass


class IllegalActionError(Exception):
    """Picker asked to move to a non-adjacent node."""


@dataclass
class RewardWeights:
    """Weights of the four per-step reward components."""

    step: float = 1.0  # w1, per arc traversed
    same_node: float = 3.0  # w2, customers co-located with the picker
    visible: float = 1.0  # w3, customers on adjacent nodes
    pick: float = 100.0  # w4, product picked

    def reward(self, phi1: int, phi2: int, phi3: int, phi4: int) -> float:
        return (
            -self.step * phi1
            - self.same_node * phi2
            - self.visible * phi3
            + self.pick * phi4
        )


@dataclass
class EnvConfig:
    customer_arrival_rate: float = 2.0  # customers per minute
    order_arrival_rate: float = 0.2  # online orders per minute
    open_time: float = 8 * 3600.0  # seconds
    store_capacity: int = 50
    node_capacity: int | None = 5
    customer_speed: float = 1.0  # m/s
    picker_speed: float = 1.0  # m/s
    customer_service_time: float = 30.0  # seconds per product
    picker_service_time: float = 30.0  # seconds per pick
    reward_weights: RewardWeights = field(default_factory=RewardWeights)

    def validate(self) -> None:
        if self.customer_arrival_rate < 0 or self.order_arrival_rate < 0:
            raise ConfigError("arrival rates must be non-negative")
        if self.open_time <= 0:
            raise ConfigError("open_time must be positive")
        if self.store_capacity < 1:
            raise ConfigError("store_capacity must be at least 1")
        if self.node_capacity is not None and self.node_capacity < 1:
            raise ConfigError("node_capacity must be at least 1 when set")
        if self.customer_speed <= 0 or self.picker_speed <= 0:
            raise ConfigError("speeds must be positive")
        if self.customer_service_time < 0 or self.picker_service_time < 0:
            raise ConfigError("service times must be non-negative")
        w = self.reward_weights
        if min(w.step, w.same_node, w.visible, w.pick) < 0:
            raise ConfigError("reward weights must be non-negative")

    def to_dict(self) -> dict:
        return {
            "customer_arrival_rate": self.customer_arrival_rate,
            "order_arrival_rate": self.order_arrival_rate,
            "open_time": self.open_time,
            "store_capacity": self.store_capacity,
            "node_capacity": self.node_capacity,
            "customer_speed": self.customer_speed,
            "picker_speed": self.picker_speed,
            "customer_service_time": self.customer_service_time,
            "picker_service_time": self.picker_service_time,
            "reward_weights": {
                "step": self.reward_weights.step,
                "same_node": self.reward_weights.same_node,
                "visible": self.reward_weights.visible,
                "pick": self.reward_weights.pick,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EnvConfig":
        data = dict(data)
        weights = data.pop("reward_weights", None)
        cfg = cls(**data)
        if weights is not None:
            cfg.reward_weights = RewardWeights(**weights)
        cfg.validate()
        return cfg


@dataclass
class Customer:
    id: int
    arrival_time: float
    shopping_list: list[int]
    plan: list[int]  # expanded node path: entrance ... exit
    dwell: list[float]  # service pause on arrival at plan[i]
    walk: list[float]  # traversal seconds plan[i] -> plan[i+1]
    pos: int = 0
    in_store: bool = False
    departed: bool = False


@dataclass
class OnlineOrder:
    id: int
    arrival_time: float
    picking_locations: tuple[int, ...]
    sequence: list[int] = field(default_factory=list)  # set by SRP solve


@dataclass
class StepObservation:
    picker_node: int
    target_node: int
    same_node_customers: int  # phi2
    visible_customers: int  # phi3
    steps: int  # phi1
    picks: int  # phi4


@dataclass
class StepOutcome:
    observation: StepObservation
    reward: float
    done: bool


@dataclass
class Observation:
    """What the picker can see before choosing the next node."""

    picker_node: int
    target_node: int
    neighbor_customers: dict[int, int]
    same_node_customers: int


@dataclass
class EpisodeMetrics:
    episode: int = 0
    reward: float = 0.0
    orders: int = 0
    products: int = 0
    encounters: int = 0
    steps: int = 0


# sequencer(picking_locations, start, end) -> permutation of picking_locations
Sequencer = Callable[[list[int], int, int], list[int]]
ListSampler = Callable[[np.random.Generator], list[int]]

_EV_CUSTOMER_ARRIVAL = 0
_EV_CUSTOMER_MOVE = 1
_EV_ORDER_ARRIVAL = 2


class Environment:
    """One picker in a customer-populated store; strictly sequential use."""

    def __init__(self, graph: StoreGraph, config: EnvConfig, list_sampler: ListSampler):
        config.validate()
        issues_free = graph.prep_zone is not None and graph.entrance is not None
        assert issues_free
        self.graph = graph
        self.config = config
        self.list_sampler = list_sampler
        self._path_cache: dict[tuple[int, int], list[int]] = {}

    # -- setup -----------------------------------------------------------

    def reset(self, seed: int) -> None:
        g, cfg = self.graph, self.config
        self.seed = seed
        self.clock = 0.0
        self.epoch = 0
        self.picker_node = g.prep_zone
        self.active_order: OnlineOrder | None = None
        self.seq_cursor = 0
        self.picking_status: dict[int, int] = {}
        self.order_queue: deque[OnlineOrder] = deque()
        self.customers: list[Customer] = []
        self.occupancy: dict[int, int] = {}
        self.in_store = 0
        self.admitted = 0
        self.rejected = 0
        self.departed = 0
        self.orders_arrived = 0
        self.orders_picked = 0
        self.orders_abandoned = 0
        self.products_picked = 0
        self.cumulative_reward = 0.0
        self.sum_phi1 = 0
        self.sum_phi2 = 0
        self.sum_phi3 = 0
        self.trace: list[tuple] = []
        self._events: list[tuple[float, int, int, int]] = []
        self._event_seq = 0

        ss = np.random.SeedSequence(entropy=seed)
        cust_times_rng, cust_paths_rng, order_times_rng, order_lists_rng = (
            np.random.default_rng(s) for s in ss.spawn(4)
        )
        # Pre-draw both Poisson arrival processes for the whole episode so
        # customer streams are identical across policies given the seed.
        self._customers_scheduled: list[Customer] = []
        for i, t in enumerate(self._poisson_times(cust_times_rng, cfg.customer_arrival_rate)):
            shopping_list = self.list_sampler(cust_paths_rng)
            exits = g.exit_nodes or [g.prep_zone]
            exit_node = int(exits[cust_paths_rng.integers(len(exits))])
            plan, dwell, walk = self._expand_plan(shopping_list, exit_node)
            self._customers_scheduled.append(
                Customer(
                    id=i, arrival_time=t, shopping_list=shopping_list,
                    plan=plan, dwell=dwell, walk=walk,
                )
            )
            self._push(t, _EV_CUSTOMER_ARRIVAL, i)
        self._orders_scheduled: list[OnlineOrder] = []
        for i, t in enumerate(self._poisson_times(order_times_rng, cfg.order_arrival_rate)):
            picks = tuple(self.list_sampler(order_lists_rng))
            self._orders_scheduled.append(
                OnlineOrder(id=i, arrival_time=t, picking_locations=picks)
            )
            self._push(t, _EV_ORDER_ARRIVAL, i)
        self._order_times = [o.arrival_time for o in self._orders_scheduled]

    def _poisson_times(self, rng: np.random.Generator, rate_per_min: float) -> list[float]:
        times = []
        if rate_per_min > 0:
            t = 0.0
            lam = rate_per_min / ARRIVAL_RATE_PERIOD
            while True:
                t += rng.exponential(1.0 / lam)
                if t >= self.config.open_time:
                    break
                times.append(t)
        return times

    def _expand_plan(
        self, shopping_list: list[int], exit_node: int
    ) -> tuple[list[int], list[float], list[float]]:
        g = self.graph
        stops = [g.entrance, *shopping_list, exit_node]
        plan: list[int] = [g.entrance]
        dwell: list[float] = [0.0]
        for a, b in zip(stops, stops[1:]):
            for node in self._shortest_nodes(a, b)[1:]:
                plan.append(node)
                dwell.append(0.0)
            if b != exit_node:
                dwell[-1] = self.config.customer_service_time
        speed = self.config.customer_speed
        walk = [
            g.edge_length(u, v) / speed for u, v in zip(plan, plan[1:])
        ]
        return plan, dwell, walk

    def _shortest_nodes(self, a: int, b: int) -> list[int]:
        key = (a, b)
        if key not in self._path_cache:
            _, path = shortest_path(self.graph, a, b)
            self._path_cache[key] = path
        return self._path_cache[key]

    # -- event engine ----------------------------------------------------

    def _push(self, t: float, kind: int, payload: int) -> None:
        self._event_seq += 1
        heapq.heappush(self._events, (t, self._event_seq, kind, payload))

    def advance(self, dt: float) -> None:
        """Advance the world clock by dt: admissions plus customer motion."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        self._advance_to(self.clock + dt)

    def _advance_to(self, t_target: float) -> None:
        while self._events and self._events[0][0] <= t_target:
            t, _, kind, payload = heapq.heappop(self._events)
            if kind == _EV_CUSTOMER_ARRIVAL:
                self._handle_customer_arrival(t, payload)
            elif kind == _EV_CUSTOMER_MOVE:
                self._handle_customer_move(t, payload)
            else:
                self._handle_order_arrival(payload)
        self.clock = max(self.clock, t_target)

    def _handle_customer_arrival(self, t: float, idx: int) -> None:
        customer = self._customers_scheduled[idx]
        if self.in_store >= self.config.store_capacity:
            self.rejected += 1
            return
        cap = self.config.node_capacity
        if cap is not None and self.occupancy.get(customer.plan[0], 0) >= cap:
            # entrance full: the customer waits outside and retries
            self._push(t + BLOCKED_RETRY_SECONDS, _EV_CUSTOMER_ARRIVAL, idx)
            return
        customer.in_store = True
        customer.pos = 0
        self.customers.append(customer)
        self.admitted += 1
        self.in_store += 1
        node = customer.plan[0]
        self.occupancy[node] = self.occupancy.get(node, 0) + 1
        self._schedule_next_move(customer, t)

    def _schedule_next_move(self, customer: Customer, now: float) -> None:
        if customer.pos + 1 >= len(customer.plan):
            self._depart(customer)
            return
        pos = customer.pos
        self._push(
            now + customer.dwell[pos] + customer.walk[pos], _EV_CUSTOMER_MOVE, customer.id
        )

    def _handle_customer_move(self, t: float, cust_id: int) -> None:
        customer = self._customers_scheduled[cust_id]
        if not customer.in_store:
            return
        nxt = customer.plan[customer.pos + 1]
        cap = self.config.node_capacity
        if cap is not None and self.occupancy.get(nxt, 0) >= cap:
            # node full: wait on the current node and retry shortly
            self._push(t + BLOCKED_RETRY_SECONDS, _EV_CUSTOMER_MOVE, cust_id)
            return
        here = customer.plan[customer.pos]
        self.occupancy[here] -= 1
        customer.pos += 1
        if customer.pos == len(customer.plan) - 1:
            self._depart(customer)
        else:
            self.occupancy[nxt] = self.occupancy.get(nxt, 0) + 1
            self._schedule_next_move(customer, t)

    def _depart(self, customer: Customer) -> None:
        customer.in_store = False
        customer.departed = True
        self.in_store -= 1
        self.departed += 1

    def _handle_order_arrival(self, idx: int) -> None:
        self.order_queue.append(self._orders_scheduled[idx])
        self.orders_arrived += 1

    # -- picker MDP surface ---------------------------------------------

    @property
    def current_target(self) -> int:
        """Next picking location, or the prep zone when returning/idle."""
        if self.active_order is not None and self.seq_cursor < len(self.active_order.sequence):
            return self.active_order.sequence[self.seq_cursor]
        return self.graph.prep_zone

    @property
    def done(self) -> bool:
        return (
            self.clock >= self.config.open_time
            and self.active_order is None
            and self.picker_node == self.graph.prep_zone
        )

    def observe(self) -> Observation:
        nbrs = self.graph.neighbors(self.picker_node)
        return Observation(
            picker_node=self.picker_node,
            target_node=self.current_target,
            neighbor_customers={v: self.occupancy.get(v, 0) for v in nbrs},
            same_node_customers=self.occupancy.get(self.picker_node, 0),
        )

    def wait_for_order(self) -> bool:
        """Idle at the prep zone until an order is available (or the store
        closes). Returns True when an order can be assigned."""
        T = self.config.open_time
        while not self.order_queue and self.clock < T:
            if self.orders_arrived < len(self._order_times):
                target = min(self._order_times[self.orders_arrived], T)
            else:
                target = T
            self._advance_to(max(target, self.clock + 1e-9))
        return bool(self.order_queue) and self.clock < T

    def assign_next_order(self, sequencer: Sequencer) -> OnlineOrder | None:
        """Pop the oldest queued order and sequence it; no-op on empty queue."""
        if not self.order_queue:
            return None
        if self.active_order is not None:
            raise RuntimeError("picker already has an active order")
        order = self.order_queue.popleft()
        sequence = list(sequencer(list(order.picking_locations), self.picker_node, self.graph.prep_zone))
        if sorted(sequence) != sorted(set(order.picking_locations)):
            raise RuntimeError("sequencer did not return a permutation of the picking set")
        order.sequence = sequence
        self.active_order = order
        self.seq_cursor = 0
        self.picking_status = {node: 0 for node in sequence}
        return order

    def step(self, action: int) -> StepOutcome:
        """Traverse one arc; the world advances during the walk, counts are
        observed on arrival, and picking adds a service pause."""
        if action not in self.graph.neighbors(self.picker_node):
            raise IllegalActionError(
                f"node {action} is not adjacent to picker node {self.picker_node}"
            )
        walk = self.graph.edge_length(self.picker_node, action) / self.config.picker_speed
        self._advance_to(self.clock + walk)
        self.picker_node = action
        phi1 = 1
        phi2 = self.occupancy.get(action, 0)
        phi3 = sum(self.occupancy.get(v, 0) for v in self.graph.neighbors(action))
        phi4 = 0
        order = self.active_order
        if order is not None:
            if self.seq_cursor < len(order.sequence) and action == order.sequence[self.seq_cursor]:
                phi4 = 1
                self.picking_status[action] = 1
                self.seq_cursor += 1
                self.products_picked += 1
                if self.config.picker_service_time > 0:
                    self._advance_to(self.clock + self.config.picker_service_time)
            elif self.seq_cursor >= len(order.sequence) and action == self.graph.prep_zone:
                self.orders_picked += 1
                self.active_order = None
        reward = self.config.reward_weights.reward(phi1, phi2, phi3, phi4)
        self.cumulative_reward += reward
        self.sum_phi1 += phi1
        self.sum_phi2 += phi2
        self.sum_phi3 += phi3
        self.epoch += 1
        done = self.done
        self.trace.append(
            (self.epoch, self.clock, self.picker_node, action, phi1, phi2, phi3, phi4, reward)
        )
        obs = StepObservation(
            picker_node=self.picker_node,
            target_node=self.current_target,
            same_node_customers=phi2,
            visible_customers=phi3,
            steps=phi1,
            picks=phi4,
        )
        return StepOutcome(observation=obs, reward=reward, done=done)

    def abandon_remaining_orders(self) -> None:
        """Orders still queued at closing time are dropped, not picked."""
        self.orders_abandoned += len(self.order_queue)
        self.order_queue.clear()

    @property
    def encounters(self) -> int:
        return self.sum_phi2 + self.sum_phi3

    def metrics(self, episode: int = 0) -> EpisodeMetrics:
        return EpisodeMetrics(
            episode=episode,
            reward=self.cumulative_reward,
            orders=self.orders_picked,
            products=self.products_picked,
            encounters=self.encounters,
            steps=self.sum_phi1,
        )

    def write_trace(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["epoch", "t", "node", "action", "phi1", "phi2", "phi3", "phi4", "reward"]
            )
            for epoch, t, node, action, p1, p2, p3, p4, reward in self.trace:
                writer.writerow(
                    [epoch, f"{t:.6f}", node, action, p1, p2, p3, p4, f"{reward:.17g}"]
                )


def cumulative_reward(trace: list[tuple]) -> float:
    """Sum of per-step rewards over an episode trace."""
    return float(sum(row[-1] for row in trace))


def run_episode(
    env: Environment,
    decide: Callable[[Observation], int],
    sequencer: Sequencer,
    seed: int,
    on_step: Callable[[Observation, int, StepOutcome], None] | None = None,
) -> EpisodeMetrics:
    """Drive one full episode: wait for orders, sequence them, walk them.

    `decide` maps the pre-step observation to the next adjacent node.
    """
    env.reset(seed)
    while True:
        if env.done:
            break
        if env.active_order is None:
            if not env.wait_for_order():
                env.abandon_remaining_orders()
                if env.picker_node == env.graph.prep_zone:
                    break
            else:
                env.assign_next_order(sequencer)
                continue
        obs = env.observe()
        action = decide(obs)
        outcome = env.step(action)
        if on_step is not None:
            on_step(obs, action, outcome)
        if outcome.done:
            break
    env.abandon_remaining_orders()  # anything queued after closing is dropped
    return env.metrics()
