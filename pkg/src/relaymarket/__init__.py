"""Deterministic simulator of auction-based packet forwarding.

Mobile nodes relay packets between access points by auctioning the
forwarding task hop by hop: the cheapest bid wins, delivery pays the
chain, failure cascades fines back up it. Strategies for pricing,
dropping and partner choice are pluggable per node and compete in
seeded, exactly reproducible tournaments.
"""

from .auction import (
    AuctionOutcome,
    Bid,
    ChainLink,
    ForwardRequest,
    Ledger,
    LedgerEntry,
    outcome_balance,
    run_auction,
    settle_failure,
    settle_success,
)
from .engine import (
    AuctionEvent,
    DropCheck,
    MetricsReport,
    Outcome,
    ScenarioConfig,
    ScenarioError,
    Simulation,
    SimulationResult,
    TransactionRecord,
    compute_metrics,
    run_simulation,
    run_transaction,
)
from .strategy import (
    STRATEGY_NAMES,
    Agent,
    HistoryTable,
    RegretState,
    RevenueTable,
    SharedTables,
    StrategyConfig,
    WillingnessTable,
    build_potential,
    choose_next_hop,
    combine_bid,
    decide_budget,
    decide_fine,
    estimate_rival_revenue,
    init_regret,
    merge_team_tables,
    predict_min_rival_bid,
    price_level,
    rebudget_after_win,
    regression_bid,
    regret_choose_level,
    should_drop,
    success_weight,
    teammate_preference,
    update_regret,
    update_willingness,
)
from .topology import (
    MobilityState,
    Node,
    NodeKind,
    RoutingView,
    TopologySnapshot,
    build_adjacency,
    compute_dist,
    neighbors,
    step_mobility,
)

__version__ = "0.1.0"
