"""The simulation loop.

Each tick the handhelds move, connectivity is rebuilt, and a batch of
packets is born at random access points. Every packet is walked to its
fate inside that tick: the holder either delivers, drops, times out,
or auctions the forwarding task to a neighbor, hop by hop, until the
chain resolves. The ledger settles once per packet and every observer
updates its tables afterwards, in a fixed order, so a seed pins down
the entire run.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Union

from .auction import (
    Bid,
    ChainLink,
    ForwardRequest,
    Ledger,
    run_auction,
    settle_failure,
    settle_success,
)
from .strategy import (
    STRATEGY_NAMES,
    Agent,
    PlacedBid,
    StrategyConfig,
    estimate_rival_revenue,
    merge_team_tables,
)
from .topology import (
    Coord,
    MobilityState,
    RoutingView,
    TopologySnapshot,
    build_adjacency,
    step_mobility,
)


class ScenarioError(ValueError):
    """A scenario value that cannot be simulated, named in the message."""


def _per_handheld(value, count: int, name: str) -> tuple:
    if isinstance(value, (list, tuple)):
        if len(value) != count:
            raise ScenarioError(f"{name} lists {len(value)} values for {count} handhelds")
        return tuple(value)
    return tuple(value for _ in range(count))


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a run needs; one seed fixes all randomness."""

    seed: int = 0
    arena: tuple[float, float] = (1000.0, 1000.0)
    radio_radius: float = 250.0
    aps: Union[int, tuple[Coord, ...]] = 50
    handheld_count: int = 12
    handheld_speed: Union[float, tuple[float, ...]] = 15.0
    handheld_strategy: Union[str, tuple[str, ...]] = "combined"
    handheld_team: Union[None, str, tuple[Optional[str], ...]] = None
    handheld_positions: Optional[tuple[Coord, ...]] = None
    rounds: int = 3
    ticks_per_round: int = 10
    packets_per_tick: int = 1
    budget_range: tuple[int, int] = (10, 100)
    fine_range: tuple[int, int] = (5, 50)
    initial_timeout: int = 20
    strategy_config: StrategyConfig = field(default_factory=StrategyConfig)

    def __post_init__(self) -> None:
        w, h = self.arena
        if w <= 0 or h <= 0:
            raise ScenarioError(f"arena must have positive dimensions, got {self.arena}")
        if self.radio_radius <= 0:
            raise ScenarioError(f"radioRadius must be positive, got {self.radio_radius}")
        ap_count = self.aps if isinstance(self.aps, int) else len(self.aps)
        if ap_count < 2:
            raise ScenarioError(f"aps must provide at least 2 access points, got {ap_count}")
        if self.handheld_count < 0:
            raise ScenarioError(f"handhelds count must be non-negative, got {self.handheld_count}")
        if self.rounds < 1:
            raise ScenarioError(f"rounds must be at least 1, got {self.rounds}")
        if self.ticks_per_round < 1:
            raise ScenarioError(f"ticksPerRound must be at least 1, got {self.ticks_per_round}")
        if self.packets_per_tick < 0:
            raise ScenarioError(f"packetsPerTick must be non-negative, got {self.packets_per_tick}")
        if self.initial_timeout < 1:
            raise ScenarioError(f"initialTimeout must be at least 1, got {self.initial_timeout}")
        for name, rng in (("budgetRange", self.budget_range), ("fineRange", self.fine_range)):
            lo, hi = rng
            if lo < 0 or hi < lo:
                raise ScenarioError(f"{name} must satisfy 0 <= lo <= hi, got {rng}")
        if self.handheld_positions is not None and len(self.handheld_positions) != self.handheld_count:
            raise ScenarioError(
                f"handhelds positions lists {len(self.handheld_positions)} entries "
                f"for {self.handheld_count} handhelds")
        for speed in _per_handheld(self.handheld_speed, self.handheld_count, "handhelds speed"):
            if speed < 0:
                raise ScenarioError(f"handhelds speed must be non-negative, got {speed}")
        for name in _per_handheld(self.handheld_strategy, self.handheld_count,
                                  "handhelds strategy"):
            if name not in STRATEGY_NAMES:
                raise ScenarioError(
                    f"handhelds strategy {name!r} is not one of {', '.join(STRATEGY_NAMES)}")

    @property
    def ap_count(self) -> int:
        return self.aps if isinstance(self.aps, int) else len(self.aps)

    @property
    def node_count(self) -> int:
        return self.ap_count + self.handheld_count

    def handheld_ids(self) -> range:
        return range(self.ap_count, self.node_count)


class Outcome(Enum):
    DELIVERED = "delivered"
    DROPPED = "dropped"
    TIMED_OUT = "timed-out"
    NO_BIDDERS = "no-bidders"


@dataclass(frozen=True)
class AuctionEvent:
    """One auction as every neighbor heard it, winner included."""

    auctioneer: int
    budget: int
    fine: int
    timeout: int
    bids: tuple[Bid, ...]
    winner: Optional[int]
    price: Optional[int]
    hearers: tuple[int, ...]


@dataclass(frozen=True)
class DropCheck:
    """A holder's keep-or-drop decision, with the evidence it used."""

    node: int
    budget_heard: int
    max_budget_seen: int
    dropped: bool


@dataclass(frozen=True)
class TransactionRecord:
    """The full life of one packet, settled exactly once."""

    transaction_id: int
    round_index: int
    tick_index: int
    origin: int
    dest: int
    chain: tuple[ChainLink, ...]
    outcome: Outcome
    dropped_by: Optional[int]
    hops_used: int
    auctions: tuple[AuctionEvent, ...]
    drop_checks: tuple[DropCheck, ...]
    balance_deltas: dict[int, int]


def baseline_choice(request: ForwardRequest, holder_dist: Optional[int],
                    bids: Sequence[Bid], rng: random.Random) -> int:
    """Winner selection for nodes without strategy state (access
    points, honest baseline): cheapest bid, lowest id on ties; any
    bidder at random when the deadline is already infeasible."""
    if holder_dist is not None and request.timeout < holder_dist:
        ordered = sorted(bids, key=lambda b: b.bidder)
        return ordered[rng.randrange(len(ordered))].bidder
    return min(bids, key=lambda b: (b.price, b.bidder)).bidder


@dataclass
class _PendingAuction:
    request: ForwardRequest
    holder_dist: Optional[int]
    bids: list[Bid]
    placed: dict[int, PlacedBid]
    winner: Optional[int]
    price: Optional[int]
    observers: list[int]
    dist_of_bidder: dict[int, Optional[int]]


def run_transaction(packet_id: int, origin: int, dest: int, budget: int, fine: int,
                    timeout: int, agents: dict[int, Agent], snapshot: TopologySnapshot,
                    routing: RoutingView, ledger: Ledger, rng: random.Random,
                    round_index: int = 0, tick_index: int = 0) -> TransactionRecord:
    """Walk one packet from its origin access point to its fate.

    ``agents`` maps handheld ids to their strategies; any node absent
    from it (the access points) auctions with the baseline rule and
    never bids. Settlement and all learner updates happen before the
    record is returned.
    """
    chain: list[ChainLink] = [ChainLink(origin, 0, 0)]
    chain_nodes = {origin}
    auctions: list[_PendingAuction] = []
    drop_checks: list[DropCheck] = []
    holder = origin
    remaining = timeout
    accepted_price = 0
    upstream_fine = 0
    won_budget: Optional[int] = None
    dropped_by: Optional[int] = None

    while True:
        agent = agents.get(holder)
        if agent is not None and won_budget is not None:
            wants = agent.wants_drop(won_budget)
            drop_checks.append(DropCheck(holder, won_budget, agent.max_budget_seen, wants))
            if wants:
                outcome = Outcome.DROPPED
                dropped_by = holder
                break
        if remaining >= 1 and (dest == holder or dest in snapshot.neighbors(holder)):
            outcome = Outcome.DELIVERED
            break
        if remaining < 1:
            outcome = Outcome.TIMED_OUT
            break

        holder_dist = routing.dist(holder, dest)
        if agent is None:
            auction_budget, auction_fine = budget, fine
            if holder_dist is None or remaining < holder_dist:
                auction_fine = auction_budget
        else:
            auction_budget, auction_fine = agent.plan_auction(
                accepted_price, holder_dist, remaining, upstream_fine)
        request = ForwardRequest(packet_id, holder, dest, auction_budget,
                                 auction_fine, remaining)

        hearers = sorted(snapshot.neighbors(holder))
        observers = sorted(set(hearers) | {holder})
        for node in observers:
            listener = agents.get(node)
            if listener is not None:
                listener.hear_budget(auction_budget)

        bids: list[Bid] = []
        placed: dict[int, PlacedBid] = {}
        for node in hearers:
            if node not in agents or node in chain_nodes:
                continue
            price, note = agents[node].bid_for(request, routing.dist(node, dest))
            bids.append(Bid(node, price))
            placed[node] = note
        dist_of_bidder = {b.bidder: routing.dist(b.bidder, dest) for b in bids}

        eligible = [b for b in bids if b.price <= request.budget]
        if not eligible:
            auctions.append(_PendingAuction(request, holder_dist, bids, placed,
                                            None, None, observers, dist_of_bidder))
            outcome = Outcome.NO_BIDDERS
            break

        if agent is None:
            winner_id = baseline_choice(request, holder_dist, eligible, rng)
        else:
            teammates = set()
            if agent.team is not None:
                teammates = {n for n, a in agents.items()
                             if a.team == agent.team and n != holder}
            winner_id = agent.select_winner(request, holder_dist, eligible,
                                            dist_of_bidder, teammates, rng)
        result = run_auction(request, bids,
                             lambda _req, elig: next(b for b in elig if b.bidder == winner_id))
        auctions.append(_PendingAuction(request, holder_dist, bids, placed,
                                        result.winner, result.price, observers,
                                        dist_of_bidder))

        chain.append(ChainLink(result.winner, result.price, auction_fine))
        chain_nodes.add(result.winner)
        holder = result.winner
        won_budget = auction_budget
        accepted_price = result.price
        upstream_fine = auction_fine
        remaining -= 1

    first_entry = len(ledger.entries)
    if outcome is Outcome.DELIVERED:
        settle_success(ledger, packet_id, chain)
    else:
        settle_failure(ledger, packet_id, chain)
    hops_used = len(chain) - 1

    deltas: dict[int, int] = {}
    for entry in ledger.entries[first_entry:]:
        deltas[entry.payer] = deltas.get(entry.payer, 0) - entry.amount
        deltas[entry.payee] = deltas.get(entry.payee, 0) + entry.amount

    _apply_learning(auctions, agents, outcome, packet_id)

    events = tuple(
        AuctionEvent(p.request.auctioneer, p.request.budget, p.request.fine,
                     p.request.timeout, tuple(p.bids), p.winner, p.price,
                     tuple(p.observers))
        for p in auctions
    )
    return TransactionRecord(packet_id, round_index, tick_index, origin, dest,
                             tuple(chain), outcome, dropped_by, hops_used,
                             events, tuple(drop_checks), deltas)


def _apply_learning(auctions: list[_PendingAuction], agents: dict[int, Agent],
                    outcome: Outcome, packet_id: int) -> None:
    """Update every observer's tables once the packet's fate is known.

    Per auction, in chain order: bidders settle their learners, the
    auctioneer records every bid it received, the other observers
    record the winning bid, everyone books the winner's estimated
    revenue, and everyone scores the winner's willingness by whether
    the packet moved on from it.
    """
    for index, pending in enumerate(auctions):
        for bid in sorted(pending.bids, key=lambda b: b.bidder):
            agents[bid.bidder].observe_bid_outcome(pending.placed[bid.bidder],
                                                   bid.bidder == pending.winner)
        winner = pending.winner
        if winner is None:
            continue
        request = pending.request
        auctioneer = agents.get(request.auctioneer)
        if auctioneer is not None and auctioneer.learns and request.budget > 0:
            for bid in sorted(pending.bids, key=lambda b: b.bidder):
                d = pending.dist_of_bidder[bid.bidder]
                if d is not None:
                    auctioneer.tables.history.record(
                        bid.bidder, packet_id, bid.price / request.budget,
                        request.timeout / d)
        winner_dist = pending.dist_of_bidder[winner]
        estimate = estimate_rival_revenue(request.budget, request.fine,
                                          request.timeout, winner_dist)
        if index + 1 < len(auctions):
            cooperated = auctions[index + 1].winner is not None
        else:
            cooperated = outcome is Outcome.DELIVERED
        for node in pending.observers:
            observer = agents.get(node)
            if observer is None or not observer.learns or node == winner:
                continue
            if node != request.auctioneer and request.budget > 0 and winner_dist is not None:
                observer.tables.history.record(
                    winner, packet_id, pending.price / request.budget,
                    request.timeout / winner_dist)
            observer.tables.revenue.record_win(winner, packet_id,
                                               request.auctioneer, estimate)
            observer.tables.willingness.adjust(winner, cooperated)


@dataclass
class NodeMetrics:
    node: int
    balance: int = 0
    bids_won: int = 0
    auctions_run: int = 0
    dropped: int = 0
    fines_paid: int = 0


@dataclass
class MetricsReport:
    """Per-node tallies plus the global delivery picture."""

    per_node: dict[int, NodeMetrics]
    delivery_ratio: float
    total_transactions: int
    delivered: int

    def balance_total(self) -> int:
        return sum(m.balance for m in self.per_node.values())


def compute_metrics(records: Sequence[TransactionRecord], ledger: Ledger,
                    node_ids: Sequence[int]) -> MetricsReport:
    """Aggregate the run: balances from the ledger, activity from the
    records, fines from failure-settlement transfers."""
    per_node = {n: NodeMetrics(n) for n in node_ids}
    balances = ledger.balances()
    for node, balance in balances.items():
        per_node.setdefault(node, NodeMetrics(node)).balance = balance
    failed = {r.transaction_id for r in records if r.outcome is not Outcome.DELIVERED}
    for entry in ledger.entries:
        if entry.transaction_id in failed:
            per_node.setdefault(entry.payer, NodeMetrics(entry.payer))
            per_node[entry.payer].fines_paid += entry.amount
    delivered = 0
    for record in records:
        if record.outcome is Outcome.DELIVERED:
            delivered += 1
        if record.dropped_by is not None:
            per_node[record.dropped_by].dropped += 1
        for event in record.auctions:
            per_node[event.auctioneer].auctions_run += 1
            if event.winner is not None:
                per_node[event.winner].bids_won += 1
    total = len(records)
    ratio = delivered / total if total else 0.0
    return MetricsReport(per_node, ratio, total, delivered)


@dataclass
class SimulationResult:
    metrics: MetricsReport
    records: list[TransactionRecord]
    ledger: Ledger
    config: ScenarioConfig


class Simulation:
    """A configured run: owns the agents, the mobility state, the
    ledger, and the named rng streams derived from the one seed."""

    def __init__(self, config: ScenarioConfig) -> None:
        self.config = config
        seed = config.seed
        self._rng_mobility = random.Random(f"{seed}/mobility")
        self._rng_traffic = random.Random(f"{seed}/traffic")
        self._rng_auction = random.Random(f"{seed}/auction")

        ap_count = config.ap_count
        w, h = config.arena
        if isinstance(config.aps, int):
            ap_positions = [(self._rng_mobility.uniform(0.0, w),
                             self._rng_mobility.uniform(0.0, h))
                            for _ in range(ap_count)]
        else:
            ap_positions = [tuple(p) for p in config.aps]
        if config.handheld_positions is None:
            handheld_positions = [(self._rng_mobility.uniform(0.0, w),
                                   self._rng_mobility.uniform(0.0, h))
                                  for _ in range(config.handheld_count)]
        else:
            handheld_positions = [tuple(p) for p in config.handheld_positions]

        positions: dict[int, Coord] = {}
        for node, pos in enumerate(ap_positions):
            positions[node] = pos
        speeds = _per_handheld(config.handheld_speed, config.handheld_count,
                               "handhelds speed")
        waypoints: dict[int, Coord] = {}
        speed_map: dict[int, float] = {}
        for i, node in enumerate(config.handheld_ids()):
            positions[node] = handheld_positions[i]
            waypoints[node] = handheld_positions[i]
            speed_map[node] = speeds[i]
        self.mobility = MobilityState((w, h), positions, waypoints, speed_map,
                                      frozenset(range(ap_count)))

        strategies = _per_handheld(config.handheld_strategy, config.handheld_count,
                                   "handhelds strategy")
        teams = _per_handheld(config.handheld_team, config.handheld_count,
                              "handhelds team")
        self.agents: dict[int, Agent] = {}
        for i, node in enumerate(config.handheld_ids()):
            init_rng = random.Random(f"{seed}/strategy-init/{node}")
            self.agents[node] = Agent(node, strategies[i], config.strategy_config,
                                      init_rng, teams[i])

        self.ledger = Ledger()
        self.records: list[TransactionRecord] = []
        self._next_packet = 0
        self._round = 0
        self._tick = 0

    # -- one tick ------------------------------------------------------------

    def _run_tick(self, round_index: int, tick_index: int) -> list[TransactionRecord]:
        self.mobility = step_mobility(self.mobility, self._rng_mobility)
        snapshot = build_adjacency(self.mobility.positions, self.config.radio_radius,
                                   self._tick)
        routing = RoutingView(snapshot)
        ap_count = self.config.ap_count
        fresh: list[TransactionRecord] = []
        for _ in range(self.config.packets_per_tick):
            origin = self._rng_traffic.randrange(ap_count)
            other = self._rng_traffic.randrange(ap_count - 1)
            dest = other + 1 if other >= origin else other
            budget = self._rng_traffic.randint(*self.config.budget_range)
            fine = self._rng_traffic.randint(*self.config.fine_range)
            record = run_transaction(self._next_packet, origin, dest, budget, fine,
                                     self.config.initial_timeout, self.agents,
                                     snapshot, routing, self.ledger,
                                     self._rng_auction, round_index, tick_index)
            self._next_packet += 1
            fresh.append(record)
        self._merge_teams(snapshot)
        self._tick += 1
        return fresh

    def _merge_teams(self, snapshot: TopologySnapshot) -> None:
        ids = sorted(self.agents)
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                agent_a, agent_b = self.agents[a], self.agents[b]
                if agent_a.team is None or agent_a.team != agent_b.team:
                    continue
                if b not in snapshot.neighbors(a):
                    continue
                merged = merge_team_tables(agent_a.tables, agent_b.tables)
                agent_a.tables = merged
                agent_b.tables = merged.copy()

    # -- public surface --------------------------------------------------------

    def run_round(self) -> list[TransactionRecord]:
        fresh: list[TransactionRecord] = []
        for tick in range(self.config.ticks_per_round):
            fresh.extend(self._run_tick(self._round, tick))
        self._round += 1
        self.records.extend(fresh)
        return fresh

    def run(self) -> SimulationResult:
        for _ in range(self.config.rounds):
            self.run_round()
        node_ids = range(self.config.node_count)
        metrics = compute_metrics(self.records, self.ledger, list(node_ids))
        return SimulationResult(metrics, self.records, self.ledger, self.config)


def run_simulation(config: ScenarioConfig) -> SimulationResult:
    return Simulation(config).run()
