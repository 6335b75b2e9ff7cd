"""Run artifacts: delimited reports and summary figures.

A finished run is written as machine-readable tables (csv or json)
plus a ledger that is always csv, and three rendered figures so a run
can be eyeballed without loading anything: final balances, delivery
ratio per round, and the outcome mix.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .engine import Outcome, SimulationResult

METRICS_HEADER = ["node", "balance", "bidsWon", "auctionsRun", "dropped", "finesPaid"]
LEDGER_HEADER = ["transactionId", "payer", "payee", "amount"]
TRANSACTIONS_HEADER = ["transactionId", "round", "tick", "origin", "dest",
                       "outcome", "hopsUsed", "droppedBy", "chain"]


def _chain_text(record) -> str:
    return "|".join(f"{link.node}:{link.accepted_price}:{link.fine_owed_upstream}"
                    for link in record.chain)


def emit_report(result: SimulationResult, out_dir: str | Path,
                fmt: str = "csv") -> list[Path]:
    """Write all artifacts for one run into ``out_dir``; returns the
    paths written. The directory is created if missing."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown report format {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [
        _write_metrics(result, out, fmt),
        _write_ledger(result, out),
        _write_transactions(result, out, fmt),
    ]
    if fmt == "csv":
        written.append(_write_summary(result, out))
    written.extend(render_figures(result, out))
    return written


def _write_metrics(result: SimulationResult, out: Path, fmt: str) -> Path:
    metrics = result.metrics
    rows = [metrics.per_node[n] for n in sorted(metrics.per_node)]
    if fmt == "csv":
        path = out / "metrics.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(METRICS_HEADER)
            for m in rows:
                writer.writerow([m.node, m.balance, m.bids_won, m.auctions_run,
                                 m.dropped, m.fines_paid])
        return path
    path = out / "metrics.json"
    payload = {
        "global": {
            "deliveryRatio": metrics.delivery_ratio,
            "totalTransactions": metrics.total_transactions,
            "delivered": metrics.delivered,
        },
        "perNode": {
            str(m.node): {
                "balance": m.balance,
                "bidsWon": m.bids_won,
                "auctionsRun": m.auctions_run,
                "dropped": m.dropped,
                "finesPaid": m.fines_paid,
            }
            for m in rows
        },
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _write_ledger(result: SimulationResult, out: Path) -> Path:
    path = out / "ledger.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LEDGER_HEADER)
        for e in result.ledger.entries:
            writer.writerow([e.transaction_id, e.payer, e.payee, e.amount])
    return path


def _write_transactions(result: SimulationResult, out: Path, fmt: str) -> Path:
    if fmt == "csv":
        path = out / "transactions.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRANSACTIONS_HEADER)
            for r in result.records:
                writer.writerow([
                    r.transaction_id, r.round_index, r.tick_index, r.origin, r.dest,
                    r.outcome.value, r.hops_used,
                    "" if r.dropped_by is None else r.dropped_by,
                    _chain_text(r),
                ])
        return path
    path = out / "transactions.json"
    payload = [
        {
            "transactionId": r.transaction_id,
            "round": r.round_index,
            "tick": r.tick_index,
            "origin": r.origin,
            "dest": r.dest,
            "outcome": r.outcome.value,
            "hopsUsed": r.hops_used,
            "droppedBy": r.dropped_by,
            "chain": [
                {"node": link.node, "acceptedPrice": link.accepted_price,
                 "fine": link.fine_owed_upstream}
                for link in r.chain
            ],
        }
        for r in result.records
    ]
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return path


def _write_summary(result: SimulationResult, out: Path) -> Path:
    path = out / "summary.csv"
    metrics = result.metrics
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["deliveryRatio", "totalTransactions", "delivered"])
        writer.writerow([metrics.delivery_ratio, metrics.total_transactions,
                         metrics.delivered])
    return path


def render_figures(result: SimulationResult, out: Path) -> list[Path]:
    """Three png figures summarizing the run."""
    return [
        _figure_balances(result, out),
        _figure_delivery(result, out),
        _figure_outcomes(result, out),
    ]


def _figure_balances(result: SimulationResult, out: Path) -> Path:
    metrics = result.metrics
    nodes = sorted(metrics.per_node)
    balances = [metrics.per_node[n].balance for n in nodes]
    fig, ax = plt.subplots(figsize=(10, 4))
    colors = ["tab:green" if b >= 0 else "tab:red" for b in balances]
    ax.bar(range(len(nodes)), balances, color=colors)
    ax.set_xticks(range(len(nodes)))
    ax.set_xticklabels([str(n) for n in nodes], rotation=90, fontsize=6)
    ax.set_xlabel("node")
    ax.set_ylabel("final balance")
    ax.set_title("Final balances (zero-sum)")
    ax.axhline(0.0, color="black", linewidth=0.8)
    fig.tight_layout()
    path = out / "balances.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _figure_delivery(result: SimulationResult, out: Path) -> Path:
    per_round: dict[int, list[int]] = {}
    for r in result.records:
        per_round.setdefault(r.round_index, []).append(
            1 if r.outcome is Outcome.DELIVERED else 0)
    rounds = sorted(per_round)
    ratios = [sum(per_round[r]) / len(per_round[r]) for r in rounds]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(rounds, ratios, marker="o")
    ax.set_xlabel("round")
    ax.set_ylabel("delivery ratio")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title("Delivery ratio per round")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = out / "delivery.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _figure_outcomes(result: SimulationResult, out: Path) -> Path:
    counts = {o: 0 for o in Outcome}
    for r in result.records:
        counts[r.outcome] += 1
    labels = [o.value for o in Outcome]
    values = [counts[o] for o in Outcome]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(labels, values, color="tab:blue")
    ax.set_ylabel("transactions")
    ax.set_title("Outcome mix")
    fig.tight_layout()
    path = out / "outcomes.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
