"""Forwarding auctions and money settlement.

A node holding a packet it cannot deliver runs a sealed-bid auction
among its neighbors: lowest asking price wins, ties break toward the
lowest node id. Settlement happens only once the packet's fate is
known. On delivery every relay is paid the price it quoted, funded by
the node upstream of it; on failure every relay pays its promised fine
to the node upstream of it. All money is integer and every transfer is
recorded in a ledger, so the system stays zero-sum by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence


@dataclass(frozen=True)
class ForwardRequest:
    """An offer to take over a packet: destination, purse and deadline.

    ``budget`` is the most the auctioneer will pay, ``fine`` what the
    winner must forfeit if the packet dies downstream, ``timeout`` the
    hop budget left after the handoff.
    """

    packet_id: int
    auctioneer: int
    destination: int
    budget: int
    fine: int
    timeout: int

    def __post_init__(self) -> None:
        if self.budget < 0:
            raise ValueError("budget must be non-negative")
        if self.fine < 0:
            raise ValueError("fine must be non-negative")


@dataclass(frozen=True)
class Bid:
    """One node's asking price for carrying the packet onward."""

    bidder: int
    price: int

    def __post_init__(self) -> None:
        if self.price < 0:
            raise ValueError("price must be non-negative")


@dataclass(frozen=True)
class AuctionOutcome:
    """Winner and accepted price, or a no-sale when nobody bid within
    budget."""

    request: ForwardRequest
    winner: Optional[int]
    price: Optional[int]
    bids: tuple[Bid, ...]

    @property
    def sold(self) -> bool:
        return self.winner is not None


Selector = Callable[[ForwardRequest, Sequence[Bid]], Bid]


def lowest_price_selector(request: ForwardRequest, bids: Sequence[Bid]) -> Bid:
    """Default rule: cheapest bid wins, lowest node id breaks ties."""
    return min(bids, key=lambda b: (b.price, b.bidder))


def run_auction(
    request: ForwardRequest,
    bids: Sequence[Bid],
    selector: Selector = lowest_price_selector,
) -> AuctionOutcome:
    """Resolve one auction. Bids above budget are discarded before the
    selector sees them; the selector must pick one of the eligible bids."""
    seen: set[int] = set()
    for bid in bids:
        if bid.bidder == request.auctioneer:
            raise ValueError("auctioneer cannot bid in its own auction")
        if bid.bidder in seen:
            raise ValueError(f"duplicate bid from node {bid.bidder}")
        seen.add(bid.bidder)
    eligible = [b for b in bids if b.price <= request.budget]
    if not eligible:
        return AuctionOutcome(request, None, None, tuple(bids))
    choice = selector(request, eligible)
    if choice not in eligible:
        raise ValueError("selector returned a bid that was not eligible")
    return AuctionOutcome(request, choice.bidder, choice.price, tuple(bids))


@dataclass(frozen=True)
class ChainLink:
    """One node's position in a custody chain.

    ``accepted_price`` is what the node upstream agreed to pay it;
    ``fine_owed_upstream`` what it must forfeit upstream on failure.
    The chain head is the source, carried with price and fine 0 so that
    settlement walks uniform consecutive pairs.
    """

    node: int
    accepted_price: int
    fine_owed_upstream: int


@dataclass(frozen=True)
class LedgerEntry:
    transaction_id: int
    payer: int
    payee: int
    amount: int


@dataclass
class Ledger:
    """Append-only record of every transfer; each packet settles once."""

    entries: list[LedgerEntry] = field(default_factory=list)
    _settled: set[int] = field(default_factory=set)

    def transfer(self, transaction_id: int, payer: int, payee: int, amount: int) -> None:
        if amount <= 0:
            raise ValueError("transfer amount must be strictly positive")
        if payer == payee:
            raise ValueError("payer and payee must differ")
        self.entries.append(LedgerEntry(transaction_id, payer, payee, amount))

    def balances(self) -> dict[int, int]:
        totals: dict[int, int] = {}
        for e in self.entries:
            totals[e.payer] = totals.get(e.payer, 0) - e.amount
            totals[e.payee] = totals.get(e.payee, 0) + e.amount
        return totals

    def _mark_settled(self, transaction_id: int) -> None:
        if transaction_id in self._settled:
            raise ValueError(f"packet {transaction_id} already settled")
        self._settled.add(transaction_id)


def settle_success(ledger: Ledger, transaction_id: int, chain: Sequence[ChainLink]) -> None:
    """Pay on delivery: each upstream node pays its successor the
    successor's accepted price. Zero-price promises move no money."""
    _check_chain(chain)
    ledger._mark_settled(transaction_id)
    for upstream, downstream in zip(chain, chain[1:]):
        if downstream.accepted_price > 0:
            ledger.transfer(transaction_id, upstream.node, downstream.node,
                            downstream.accepted_price)


def settle_failure(ledger: Ledger, transaction_id: int, chain: Sequence[ChainLink]) -> None:
    """Fines cascade upstream: each node that accepted custody pays its
    promised fine to the node it took the packet from."""
    _check_chain(chain)
    ledger._mark_settled(transaction_id)
    for upstream, downstream in zip(chain, chain[1:]):
        if downstream.fine_owed_upstream > 0:
            ledger.transfer(transaction_id, downstream.node, upstream.node,
                            downstream.fine_owed_upstream)


def _check_chain(chain: Sequence[ChainLink]) -> None:
    if not chain:
        raise ValueError("chain must contain at least the source")
    head = chain[0]
    if head.accepted_price != 0 or head.fine_owed_upstream != 0:
        raise ValueError("chain head must carry zero price and fine")
    nodes = [link.node for link in chain]
    if len(set(nodes)) != len(nodes):
        raise ValueError("custody chain must not revisit a node")


def outcome_balance(
    accepted_price: int,
    paid_downstream: int,
    fine_owed_upstream: int,
    fine_collected_downstream: int,
    delivered: bool,
) -> int:
    """Net money movement for one chain member under one packet fate.

    On delivery the node earns its accepted price minus what it pays
    its successor; on failure it collects its successor's fine and
    forfeits its own. The source is the degenerate case with accepted
    price and fine both zero.
    """
    if delivered:
        return accepted_price - paid_downstream
    return fine_collected_downstream - fine_owed_upstream
