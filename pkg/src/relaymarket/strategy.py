"""Agent decision logic: pricing, learning and partner selection.

Everything a node decides lives here: how an auctioneer sizes its
budget and fine, how bidders price the forwarding task (a closed
formula, an online regression against each rival, a regret-matching
learner over discrete price levels, or combinations), when a holder
drops an underfunded packet, and how teammates share what they have
observed. The engine wires these pieces to the network; this module
is pure decision state plus deterministic functions of it.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .auction import Bid, ForwardRequest

STRATEGY_NAMES = (
    "formula",
    "regret",
    "regression",
    "combined",
    "aggressive-combined",
    "honest-baseline",
)


def _round_half_up(x: float) -> int:
    # money is integer; 0.5 always rounds away from zero toward +inf
    return int(math.floor(x + 0.5))


def _halve_toward_zero(total: int) -> int:
    return total // 2 if total >= 0 else -((-total) // 2)


@dataclass(frozen=True)
class StrategyConfig:
    """Tunables shared by every strategy.

    fine_margin: how far below its budget an auctioneer sets its fine.
    distance_exponent: exponent on dist/timeout in the combined bid cap.
    drop_threshold: drop packets funded below this fraction of the
        largest budget ever heard.
    rebudget_floor: a re-auction's budget is at least this fraction of
        the price the holder accepted.
    aggression: multiplicative price cut per consecutive lost auction.
    teammate_tolerance: accept a teammate's bid up to this fraction
        above the best rival bid.
    rich_penalty: weight of a bidder's accumulated-revenue rank when
        scoring next hops.
    fallback_bid_ratio: assumed rival bid/budget ratio with no history.
    """

    fine_margin: int = 1
    distance_exponent: float = 1.0
    drop_threshold: float = 0.30
    rebudget_floor: float = 0.50
    price_levels: int = 10
    aggression: float = 0.05
    teammate_tolerance: float = 0.20
    rich_penalty: float = 0.10
    fallback_bid_ratio: float = 0.5

    def __post_init__(self) -> None:
        if self.fine_margin < 1:
            raise ValueError("fine_margin must be at least 1 money unit")
        if self.distance_exponent <= 0:
            raise ValueError("distance_exponent must be positive")
        if self.price_levels < 2:
            raise ValueError("price_levels must be at least 2")
        for name in ("drop_threshold", "rebudget_floor", "aggression",
                     "teammate_tolerance", "rich_penalty", "fallback_bid_ratio"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")


# ---------------------------------------------------------------------------
# budget, fine and success-weight formulas


def decide_budget(purse: int, dist: Optional[int], timeout: int, upstream_fine: int) -> int:
    """Budget an auctioneer advertises from the money it stands to earn.

    With slack (timeout at least dist) only the proportional share
    purse*dist/timeout is offered; an infeasible deadline (or an
    unreachable destination, dist None) commits the whole purse. The
    result never falls below half the fine owed upstream.
    """
    if purse < 0:
        raise ValueError("purse must be non-negative")
    if timeout < 0:
        raise ValueError("timeout must be non-negative")
    if dist is not None and dist < 1:
        raise ValueError("dist must be at least 1 (or None when unreachable)")
    if dist is not None and timeout >= dist:
        base = purse * dist / timeout
    else:
        base = float(purse)
    return _round_half_up(max(upstream_fine / 2, base))


def decide_fine(budget_advertised: int, fine_margin: int) -> int:
    """Fine is the advertised budget minus a small margin, never negative."""
    if budget_advertised < 0:
        raise ValueError("budget must be non-negative")
    return max(0, budget_advertised - fine_margin)


def success_weight(timeout: int, dist: Optional[int]) -> float:
    """Chance-of-delivery weight: timeout/dist when the deadline is too
    tight, 1 when delivery is feasible, 0 when the destination is
    unreachable."""
    if dist is None:
        return 0.0
    if dist < 1:
        raise ValueError("dist must be at least 1")
    if timeout < dist:
        return timeout / dist
    return 1.0


def estimate_rival_revenue(budget: int, fine: int, timeout: int, dist: Optional[int]) -> float:
    """Expected take for the winner of an auction heard: the budget
    weighted by the delivery chance minus the fine weighted by the
    complement. Negative when failure is likely and the fine is stiff."""
    w = success_weight(timeout, dist)
    return budget * w - fine * (1.0 - w)


def should_drop(budget_heard: int, max_budget_seen: int, config: StrategyConfig) -> bool:
    """Underfunded-packet test: strictly below the threshold fraction of
    the largest budget this node has ever heard."""
    return budget_heard < config.drop_threshold * max_budget_seen


def rebudget_after_win(accepted_price: int, dist: Optional[int], timeout: int,
                       upstream_fine: int, config: StrategyConfig) -> tuple[int, int]:
    """Budget and fine for the auction a fresh holder runs.

    The plain budget formula shrinks fast along a chain, so the
    re-auction budget is floored at a fraction of the price the holder
    just accepted.
    """
    base = decide_budget(accepted_price, dist, timeout, upstream_fine)
    budget = _round_half_up(max(float(base), config.rebudget_floor * accepted_price))
    return budget, decide_fine(budget, config.fine_margin)


# ---------------------------------------------------------------------------
# observation tables


@dataclass(frozen=True)
class HistoryRow:
    """One observed bid, normalized: price as a fraction of the budget
    on offer, deadline as timeout over the bidder's hop distance."""

    node: int
    transaction: int
    bid_ratio: float
    td_ratio: float


class HistoryTable:
    """Observed bids per rival, one row per (rival, transaction).

    Keeps a per-rival least-squares fit of bid_ratio against td_ratio,
    recomputed lazily after that rival's rows change.
    """

    def __init__(self) -> None:
        self._by_node: dict[int, dict[int, HistoryRow]] = {}
        self._fits: dict[int, Optional[tuple[float, float]]] = {}

    def record(self, node: int, transaction: int, bid_ratio: float, td_ratio: float) -> None:
        if bid_ratio < 0:
            raise ValueError("bid_ratio must be non-negative")
        rows = self._by_node.setdefault(node, {})
        rows[transaction] = HistoryRow(node, transaction, bid_ratio, td_ratio)
        self._fits.pop(node, None)

    def rows_for(self, node: int) -> list[HistoryRow]:
        return [self._by_node[node][t] for t in sorted(self._by_node.get(node, {}))]

    def rivals(self) -> list[int]:
        return sorted(self._by_node)

    def __len__(self) -> int:
        return sum(len(rows) for rows in self._by_node.values())

    def fit(self, node: int) -> Optional[tuple[float, float]]:
        """(slope, intercept) of bid_ratio ~ td_ratio for one rival;
        a single sample fits a constant, no samples fit nothing."""
        if node in self._fits:
            return self._fits[node]
        rows = self.rows_for(node)
        fit = _least_squares([r.td_ratio for r in rows], [r.bid_ratio for r in rows])
        self._fits[node] = fit
        return fit

    def copy(self) -> "HistoryTable":
        dup = HistoryTable()
        dup._by_node = {n: dict(rows) for n, rows in self._by_node.items()}
        return dup


def _least_squares(xs: Sequence[float], ys: Sequence[float]) -> Optional[tuple[float, float]]:
    n = len(xs)
    if n == 0:
        return None
    if n == 1:
        return 0.0, ys[0]
    sx = sum(xs)
    sy = sum(ys)
    sxx = sum(x * x for x in xs)
    sxy = sum(x * y for x, y in zip(xs, ys))
    denom = n * sxx - sx * sx
    if abs(denom) < 1e-12:
        return 0.0, sy / n
    slope = (n * sxy - sx * sy) / denom
    return slope, (sy - slope * sx) / n


class RevenueTable:
    """Estimated take per rival per transaction; a rival wins at most
    once per transaction, so a repeat observation replaces the row."""

    def __init__(self) -> None:
        self._rows: dict[tuple[int, int], tuple[int, float]] = {}
        self._totals: dict[int, float] = {}

    def record_win(self, rival: int, transaction: int, auctioneer: int, estimate: float) -> None:
        key = (rival, transaction)
        if key in self._rows:
            self._totals[rival] -= self._rows[key][1]
        self._rows[key] = (auctioneer, estimate)
        self._totals[rival] = self._totals.get(rival, 0.0) + estimate

    def total(self, rival: int) -> float:
        return self._totals.get(rival, 0.0)

    def rows_for(self, rival: int) -> list[tuple[int, int, float]]:
        return [(t, a, e) for (r, t), (a, e) in sorted(self._rows.items()) if r == rival]

    def __len__(self) -> int:
        return len(self._rows)

    def copy(self) -> "RevenueTable":
        dup = RevenueTable()
        dup._rows = dict(self._rows)
        dup._totals = dict(self._totals)
        return dup


def record_rival_win(table: RevenueTable, rival: int, transaction: int,
                     auctioneer: int, estimate: float) -> RevenueTable:
    table.record_win(rival, transaction, auctioneer, estimate)
    return table


class WillingnessTable:
    """Cooperation score per node: +1 each time the node was seen
    forwarding a task it accepted, -1 each time the task died with it."""

    def __init__(self) -> None:
        self._scores: dict[int, int] = {}

    def score(self, node: int) -> int:
        return self._scores.get(node, 0)

    def adjust(self, node: int, cooperated: bool) -> None:
        self._scores[node] = self._scores.get(node, 0) + (1 if cooperated else -1)

    def nodes(self) -> list[int]:
        return sorted(self._scores)

    def copy(self) -> "WillingnessTable":
        dup = WillingnessTable()
        dup._scores = dict(self._scores)
        return dup


def update_willingness(table: WillingnessTable, node: int, forwarding_heard: bool) -> WillingnessTable:
    table.adjust(node, forwarding_heard)
    return table


@dataclass
class SharedTables:
    """The observation state two teammates exchange when they meet."""

    history: HistoryTable = field(default_factory=HistoryTable)
    revenue: RevenueTable = field(default_factory=RevenueTable)
    willingness: WillingnessTable = field(default_factory=WillingnessTable)

    def copy(self) -> "SharedTables":
        return SharedTables(self.history.copy(), self.revenue.copy(), self.willingness.copy())


def merge_team_tables(mine: SharedTables, theirs: SharedTables) -> SharedTables:
    """Union of both teammates' observations.

    History and revenue rows are deduplicated by (node, transaction)
    with my own row winning a conflict; willingness scores are summed
    and halved toward zero, treating an unknown node as score 0.
    """
    merged = theirs.copy()
    for key, row in mine.history._by_node.items():
        merged.history._by_node.setdefault(key, {}).update(row)
    merged.history._fits = {}
    for (rival, txn), (auctioneer, estimate) in mine.revenue._rows.items():
        merged.revenue.record_win(rival, txn, auctioneer, estimate)
    combined = WillingnessTable()
    for node in set(mine.willingness.nodes()) | set(theirs.willingness.nodes()):
        total = mine.willingness.score(node) + theirs.willingness.score(node)
        combined._scores[node] = _halve_toward_zero(total)
    merged.willingness = combined
    return merged


# ---------------------------------------------------------------------------
# bid pricing: regression path


def predict_min_rival_bid(history: HistoryTable, request: ForwardRequest, dist: int,
                          known_rivals: Optional[set[int]], config: StrategyConfig) -> float:
    """Cheapest bid any known rival is expected to place on this request.

    Each rival's observed bid/budget ratios are extrapolated to the
    request's timeout/dist ratio; with no usable history the fallback
    ratio stands in for everyone.
    """
    if dist < 1:
        raise ValueError("dist must be at least 1")
    td = request.timeout / dist
    rivals = sorted(known_rivals) if known_rivals is not None else history.rivals()
    best: Optional[float] = None
    for rival in rivals:
        coefficients = history.fit(rival)
        if coefficients is None:
            continue
        slope, intercept = coefficients
        predicted = (intercept + slope * td) * request.budget
        if best is None or predicted < best:
            best = predicted
    if best is None:
        return config.fallback_bid_ratio * request.budget
    return best


def regression_bid(predicted_min: float, loss_streak: int, config: StrategyConfig) -> int:
    """Price just under the predicted cheapest rival, cut harder for
    every auction lost in a row."""
    discounted = predicted_min * (1.0 - config.aggression) ** (loss_streak + 1)
    return max(0, math.floor(discounted))


# ---------------------------------------------------------------------------
# bid pricing: regret-matching path


@dataclass
class RegretState:
    """Regret scores over discrete price levels.

    matrix[a-1][x-1] scores switching to level x after having played
    level a; the row of the most recent action drives the next choice.
    """

    matrix: np.ndarray
    last_action: int = 1
    round_index: int = 1

    def __post_init__(self) -> None:
        levels = self.matrix.shape[0]
        if self.matrix.shape != (levels, levels):
            raise ValueError("regret matrix must be square")
        if not 1 <= self.last_action <= levels:
            raise ValueError("last_action out of range")


def init_regret(price_levels: int, rng: random.Random) -> RegretState:
    """Fresh learner state with uniform random scores in [0, 1)."""
    matrix = np.array([[rng.random() for _ in range(price_levels)]
                       for _ in range(price_levels)])
    return RegretState(matrix)


def price_level(budget_heard: int, level: int, price_levels: int) -> int:
    """The discrete price ladder: level x of L prices at budget*x/L."""
    if not 1 <= level <= price_levels:
        raise ValueError(f"level {level} out of range 1..{price_levels}")
    return _round_half_up(budget_heard * level / price_levels)


def build_potential(last_action: int, won: bool, price_levels: int) -> np.ndarray:
    """Counterfactual score for each level switch after one auction.

    Only the row of the action actually played is nonzero. After a
    loss, cheaper levels score their (negative) distance below the
    action and dearer levels score their headroom to the top of the
    ladder; after a win, every switch away scores negative, three
    times as steeply on the dear side. The diagonal is always zero.
    """
    if not 1 <= last_action <= price_levels:
        raise ValueError(f"last_action {last_action} out of range 1..{price_levels}")
    potential = np.zeros((price_levels, price_levels))
    a = last_action
    for x in range(1, price_levels + 1):
        if x == a:
            continue
        if x < a:
            potential[a - 1, x - 1] = x - a
        elif won:
            potential[a - 1, x - 1] = 3 * (a - x)
        else:
            potential[a - 1, x - 1] = price_levels - x
    return potential


def update_regret(state: RegretState, potential: np.ndarray) -> RegretState:
    """Decayed update: the old matrix shrinks by 1/(r+1) and the new
    potential is added on, advancing the round counter."""
    if potential.shape != state.matrix.shape:
        raise ValueError("potential dimensions do not match the regret matrix")
    r = state.round_index
    matrix = (1.0 - 1.0 / (r + 1)) * state.matrix + potential
    return replace(state, matrix=matrix, round_index=r + 1)


def regret_choose_level(state: RegretState) -> int:
    """Level with the highest regret in the last action's row; the
    first (cheapest) level wins ties."""
    row = state.matrix[state.last_action - 1]
    return int(np.argmax(row)) + 1


def combine_bid(level_price: int, budget_heard: int, dist: int, timeout: int,
                distance_exponent: float) -> int:
    """Learner price capped by the distance-discounted budget share."""
    if timeout < 1:
        raise ValueError("timeout must be at least 1")
    cap = _round_half_up(budget_heard * (dist / timeout) ** distance_exponent)
    return min(level_price, cap)


# ---------------------------------------------------------------------------
# auctioneer-side selection


def teammate_preference(bids: Sequence[Bid], teammate_ids: set[int],
                        min_other_bid: Optional[int], config: StrategyConfig) -> Optional[int]:
    """Cheapest teammate, if its price stays within the tolerance of
    the best rival bid; None when no teammate deserves the nod."""
    team_bids = [b for b in bids if b.bidder in teammate_ids]
    if not team_bids:
        return None
    best = min(team_bids, key=lambda b: (b.price, b.bidder))
    if min_other_bid is None:
        return best.bidder
    if best.price <= min_other_bid * (1.0 + config.teammate_tolerance):
        return best.bidder
    return None


def choose_next_hop(request: ForwardRequest, holder_dist: Optional[int], bids: Sequence[Bid],
                    dist_of_bidder: dict[int, Optional[int]], willingness: WillingnessTable,
                    revenue: RevenueTable, config: StrategyConfig,
                    rng: random.Random) -> Optional[int]:
    """Pick the winning bidder for one auction.

    With deadline slack the cheapest bid wins, nudged away from
    bidders who have already banked a lot (rank-scaled penalty) and
    toward more willing ones among exact score ties. On an exact
    deadline the bidder closest to the destination wins. On an
    infeasible deadline any bidder will do, uniformly at random.
    """
    if not bids:
        return None
    if holder_dist is not None and request.timeout >= holder_dist + 1:
        ranks = _revenue_ranks([b.bidder for b in bids], revenue)
        scored = [
            (b.price + config.rich_penalty * request.budget * ranks[b.bidder], b)
            for b in bids
        ]
        best_score = min(score for score, _ in scored)
        tied = [b for score, b in scored if score == best_score]
        return min(tied, key=lambda b: (-willingness.score(b.bidder), b.bidder)).bidder
    if holder_dist is not None and request.timeout == holder_dist:
        def closeness(bid: Bid):
            d = dist_of_bidder.get(bid.bidder)
            return (d if d is not None else math.inf,
                    -willingness.score(bid.bidder), bid.price, bid.bidder)
        return min(bids, key=closeness).bidder
    ordered = sorted(bids, key=lambda b: b.bidder)
    return ordered[rng.randrange(len(ordered))].bidder


def _revenue_ranks(bidders: list[int], revenue: RevenueTable) -> dict[int, float]:
    """Rank each bidder by accumulated revenue estimate, 0 poorest,
    normalized to [0, 1]; equal totals share a rank."""
    if len(bidders) < 2:
        return {b: 0.0 for b in bidders}
    totals = {b: revenue.total(b) for b in bidders}
    span = len(bidders) - 1
    return {
        b: sum(1 for other in bidders if totals[other] < totals[b]) / span
        for b in bidders
    }


# ---------------------------------------------------------------------------
# the agent shell the engine drives


@dataclass
class PlacedBid:
    """What an agent remembers about a bid it placed, pending outcome."""

    transaction: int
    level: Optional[int]
    competitive: bool


class Agent:
    """One handheld's strategy state plus the policy dispatch.

    The engine calls ``bid_for`` when the node hears a request,
    ``wants_drop``/``plan_auction``/``select_winner`` when it holds the
    packet, and the ``observe_*`` hooks when outcomes become known.
    """

    def __init__(self, node_id: int, strategy: str, config: StrategyConfig,
                 init_rng: random.Random, team: Optional[str] = None) -> None:
        if strategy not in STRATEGY_NAMES:
            raise ValueError(f"unknown strategy {strategy!r}")
        self.node_id = node_id
        self.strategy = strategy
        self.config = config
        self.team = team
        self.tables = SharedTables()
        self.max_budget_seen = 0
        self.loss_streak = 0
        self.regret: Optional[RegretState] = None
        if strategy in ("regret", "combined", "aggressive-combined"):
            self.regret = init_regret(config.price_levels, init_rng)

    # -- observation -------------------------------------------------------

    @property
    def learns(self) -> bool:
        return self.strategy != "honest-baseline"

    def hear_budget(self, budget: int) -> None:
        if budget > self.max_budget_seen:
            self.max_budget_seen = budget

    # -- bidding -----------------------------------------------------------

    def bid_for(self, request: ForwardRequest, own_dist: Optional[int]) -> tuple[int, PlacedBid]:
        """Price for the request plus a note of how it was derived,
        so the learners can settle up once the outcome is known."""
        if own_dist is None or request.timeout < own_dist:
            # infeasible for this node: refuse by pricing at the full budget
            return request.budget, PlacedBid(request.packet_id, None, False)
        if self.strategy in ("honest-baseline", "formula"):
            price = min(request.budget,
                        _round_half_up(request.budget * own_dist / max(request.timeout, 1)))
            return price, PlacedBid(request.packet_id, None, True)
        if self.strategy == "regression":
            price = min(request.budget, self._regression_price(request, own_dist))
            return price, PlacedBid(request.packet_id, None, True)
        if self.strategy == "regret":
            level = regret_choose_level(self.regret)
            self.regret.last_action = level
            price = price_level(request.budget, level, self.config.price_levels)
            return price, PlacedBid(request.packet_id, level, True)
        # combined and aggressive-combined: cheaper of the two learners
        level = regret_choose_level(self.regret)
        self.regret.last_action = level
        ladder = price_level(request.budget, level, self.config.price_levels)
        capped = combine_bid(ladder, request.budget, own_dist, request.timeout,
                             self.config.distance_exponent)
        regression = min(request.budget, self._regression_price(request, own_dist))
        return min(capped, regression), PlacedBid(request.packet_id, level, True)

    def _regression_price(self, request: ForwardRequest, own_dist: int) -> int:
        predicted = predict_min_rival_bid(self.tables.history, request, own_dist,
                                          None, self.config)
        return regression_bid(predicted, self.loss_streak, self.config)

    def observe_bid_outcome(self, placed: PlacedBid, won: bool) -> None:
        """Settle the learners for one auction this agent bid in."""
        if not placed.competitive:
            return
        if self.regret is not None and placed.level is not None:
            potential = build_potential(placed.level, won, self.config.price_levels)
            self.regret = update_regret(self.regret, potential)
        if self.strategy in ("regression", "combined", "aggressive-combined"):
            self.loss_streak = 0 if won else self.loss_streak + 1

    # -- holding the packet --------------------------------------------------

    def wants_drop(self, budget_heard: int) -> bool:
        if self.strategy != "aggressive-combined":
            return False
        return should_drop(budget_heard, self.max_budget_seen, self.config)

    def plan_auction(self, accepted_price: int, dist: Optional[int], timeout: int,
                     upstream_fine: int) -> tuple[int, int]:
        """Budget and fine for the auction this holder is about to run.

        When even the best case cannot meet the deadline the fine is
        raised to the whole budget: the holder has nothing to lose and
        the promise costs the winner nothing extra on the inevitable
        failure it accepted at full price.
        """
        budget, fine = rebudget_after_win(accepted_price, dist, timeout,
                                          upstream_fine, self.config)
        if dist is None or timeout < dist:
            fine = budget
        return budget, fine

    def select_winner(self, request: ForwardRequest, holder_dist: Optional[int],
                      bids: Sequence[Bid], dist_of_bidder: dict[int, Optional[int]],
                      teammate_ids: set[int], rng: random.Random) -> Optional[int]:
        if not bids:
            return None
        if self.strategy == "honest-baseline":
            if holder_dist is not None and request.timeout < holder_dist:
                ordered = sorted(bids, key=lambda b: b.bidder)
                return ordered[rng.randrange(len(ordered))].bidder
            return min(bids, key=lambda b: (b.price, b.bidder)).bidder
        others = [b.price for b in bids if b.bidder not in teammate_ids]
        preferred = teammate_preference(bids, teammate_ids,
                                        min(others) if others else None, self.config)
        if preferred is not None:
            return preferred
        return choose_next_hop(request, holder_dist, bids, dist_of_bidder,
                               self.tables.willingness, self.tables.revenue,
                               self.config, rng)
