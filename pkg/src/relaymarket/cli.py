"""Command-line front end: load a scenario, run it, write the report.

Exit codes: 0 success, 1 usage error, 2 scenario error, 3 i/o error
while writing artifacts.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

from .engine import ScenarioConfig, ScenarioError, run_simulation
from .report import emit_report
from .strategy import StrategyConfig


class UsageError(Exception):
    """Malformed command line."""


@dataclass(frozen=True)
class RunOptions:
    scenario_path: Path
    seed: Optional[int]
    rounds: Optional[int]
    out_dir: Path
    fmt: str
    quiet: bool


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would sys.exit(2)
        raise UsageError(message)


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {value}")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def parse_args(argv: Optional[Sequence[str]] = None) -> RunOptions:
    parser = _Parser(
        prog="relaymarket",
        description="Run an auction-based packet forwarding tournament "
                    "from a scenario file.",
    )
    parser.add_argument("--scenario", required=True, metavar="PATH",
                        help="scenario file (json)")
    parser.add_argument("--seed", type=_non_negative, default=None,
                        help="override the scenario seed")
    parser.add_argument("--rounds", type=_positive, default=None,
                        help="override the number of rounds")
    parser.add_argument("--out", default="out", metavar="DIR",
                        help="output directory (default: out)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="report format (default: csv)")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress the stdout summary")
    args = parser.parse_args(argv)
    return RunOptions(Path(args.scenario), args.seed, args.rounds,
                      Path(args.out), args.format, args.quiet)


# ---------------------------------------------------------------------------
# scenario files

_STRATEGY_KEYS = {
    "epsilon": "fine_margin",
    "n": "distance_exponent",
    "dropThreshold": "drop_threshold",
    "rebudgetFloor": "rebudget_floor",
    "priceLevels": "price_levels",
    "aggressionFactor": "aggression",
    "gamma": "teammate_tolerance",
    "lambda": "rich_penalty",
    "fallbackRatio": "fallback_bid_ratio",
}

_HANDHELD_KEYS = ("count", "speed", "strategy", "team", "positions")

_TOP_KEYS = ("arena", "radioRadius", "aps", "handhelds", "rounds", "ticksPerRound",
             "packetsPerTick", "budgetRange", "fineRange", "initialTimeout",
             "seed", "strategyConfig")


def _coord_list(value, field: str) -> tuple[tuple[float, float], ...]:
    try:
        return tuple((float(x), float(y)) for x, y in value)
    except (TypeError, ValueError) as err:
        raise ScenarioError(f"{field} must be a list of [x, y] pairs") from err


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Parse and validate a scenario file; any problem is reported as a
    ScenarioError naming the offending field."""
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ScenarioError(f"cannot read scenario file {path}: {err}") from err
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ScenarioError(f"scenario file {path} is not valid json: {err}") from err
    if not isinstance(raw, dict):
        raise ScenarioError("scenario file must hold a json object")
    return scenario_from_dict(raw)


def scenario_from_dict(raw: dict) -> ScenarioConfig:
    for key in raw:
        if key not in _TOP_KEYS:
            raise ScenarioError(f"unknown scenario field {key!r}")

    arena_raw = raw.get("arena", {"w": 1000.0, "h": 1000.0})
    if not isinstance(arena_raw, dict) or set(arena_raw) != {"w", "h"}:
        raise ScenarioError('arena must be an object with keys "w" and "h"')
    arena = (float(arena_raw["w"]), float(arena_raw["h"]))

    aps_raw = raw.get("aps", 50)
    aps = aps_raw if isinstance(aps_raw, int) else _coord_list(aps_raw, "aps")

    hh_raw = raw.get("handhelds", 12)
    if isinstance(hh_raw, int):
        hh_raw = {"count": hh_raw}
    if not isinstance(hh_raw, dict):
        raise ScenarioError("handhelds must be a count or an object")
    for key in hh_raw:
        if key not in _HANDHELD_KEYS:
            raise ScenarioError(f"unknown handhelds field {key!r}")
    count = hh_raw.get("count", 12)
    if not isinstance(count, int):
        raise ScenarioError(f"handhelds count must be an integer, got {count!r}")
    speed = hh_raw.get("speed", 15.0)
    speed = tuple(float(s) for s in speed) if isinstance(speed, list) else float(speed)
    strategy = hh_raw.get("strategy", "combined")
    if isinstance(strategy, list):
        strategy = tuple(strategy)
    team = hh_raw.get("team")
    if isinstance(team, list):
        team = tuple(team)
    positions = hh_raw.get("positions")
    if positions is not None:
        positions = _coord_list(positions, "handhelds positions")

    tuning_raw = raw.get("strategyConfig", {})
    if not isinstance(tuning_raw, dict):
        raise ScenarioError("strategyConfig must be an object")
    tuning_kwargs = {}
    for key, value in tuning_raw.items():
        if key not in _STRATEGY_KEYS:
            raise ScenarioError(f"unknown strategyConfig field {key!r}")
        tuning_kwargs[_STRATEGY_KEYS[key]] = value
    try:
        tuning = StrategyConfig(**tuning_kwargs)
    except ValueError as err:
        raise ScenarioError(f"strategyConfig: {err}") from err

    def _int_pair(key: str, default: tuple[int, int]) -> tuple[int, int]:
        value = raw.get(key, list(default))
        if (not isinstance(value, list) or len(value) != 2
                or not all(isinstance(v, int) for v in value)):
            raise ScenarioError(f"{key} must be a [lo, hi] pair of integers")
        return (value[0], value[1])

    try:
        return ScenarioConfig(
            seed=int(raw.get("seed", 0)),
            arena=arena,
            radio_radius=float(raw.get("radioRadius", 250.0)),
            aps=aps,
            handheld_count=count,
            handheld_speed=speed,
            handheld_strategy=strategy,
            handheld_team=team,
            handheld_positions=positions,
            rounds=int(raw.get("rounds", 3)),
            ticks_per_round=int(raw.get("ticksPerRound", 10)),
            packets_per_tick=int(raw.get("packetsPerTick", 1)),
            budget_range=_int_pair("budgetRange", (10, 100)),
            fine_range=_int_pair("fineRange", (5, 50)),
            initial_timeout=int(raw.get("initialTimeout", 20)),
            strategy_config=tuning,
        )
    except (TypeError, ValueError) as err:
        if isinstance(err, ScenarioError):
            raise
        raise ScenarioError(str(err)) from err


def scenario_to_dict(config: ScenarioConfig) -> dict:
    """The explicit json form of a config; feeding it back through
    scenario_from_dict reproduces the config exactly."""
    handhelds: dict = {
        "count": config.handheld_count,
        "speed": list(config.handheld_speed) if isinstance(config.handheld_speed, tuple)
        else config.handheld_speed,
        "strategy": list(config.handheld_strategy)
        if isinstance(config.handheld_strategy, tuple) else config.handheld_strategy,
        "team": list(config.handheld_team) if isinstance(config.handheld_team, tuple)
        else config.handheld_team,
    }
    if config.handheld_positions is not None:
        handhelds["positions"] = [list(p) for p in config.handheld_positions]
    tuning = config.strategy_config
    return {
        "arena": {"w": config.arena[0], "h": config.arena[1]},
        "radioRadius": config.radio_radius,
        "aps": config.aps if isinstance(config.aps, int)
        else [list(p) for p in config.aps],
        "handhelds": handhelds,
        "rounds": config.rounds,
        "ticksPerRound": config.ticks_per_round,
        "packetsPerTick": config.packets_per_tick,
        "budgetRange": list(config.budget_range),
        "fineRange": list(config.fine_range),
        "initialTimeout": config.initial_timeout,
        "seed": config.seed,
        "strategyConfig": {
            "epsilon": tuning.fine_margin,
            "n": tuning.distance_exponent,
            "dropThreshold": tuning.drop_threshold,
            "rebudgetFloor": tuning.rebudget_floor,
            "priceLevels": tuning.price_levels,
            "aggressionFactor": tuning.aggression,
            "gamma": tuning.teammate_tolerance,
            "lambda": tuning.rich_penalty,
            "fallbackRatio": tuning.fallback_bid_ratio,
        },
    }


def dump_scenario(config: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(config), indent=2) + "\n")


# ---------------------------------------------------------------------------
# entry point


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        options = parse_args(argv)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1

    try:
        config = load_scenario(options.scenario_path)
        if options.seed is not None:
            config = replace(config, seed=options.seed)
        if options.rounds is not None:
            config = replace(config, rounds=options.rounds)
    except ScenarioError as err:
        print(f"scenario error: {err}", file=sys.stderr)
        return 2

    result = run_simulation(config)

    try:
        paths = emit_report(result, options.out_dir, options.fmt)
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 3

    if not options.quiet:
        metrics = result.metrics
        print(f"delivered {metrics.delivered}/{metrics.total_transactions} "
              f"(ratio {metrics.delivery_ratio:.3f})")
        for path in paths:
            print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
