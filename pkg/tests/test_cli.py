"""Command line parsing, scenario files, and the end-to-end run path."""

import csv
import json

import pytest

from relaymarket.cli import (
    UsageError,
    dump_scenario,
    load_scenario,
    main,
    parse_args,
    scenario_from_dict,
    scenario_to_dict,
)
from relaymarket.engine import ScenarioConfig, ScenarioError

MINIMAL = {"seed": 1, "aps": 2, "handhelds": 1}

LINE_SCENARIO = {
    "seed": 7,
    "arena": {"w": 500.0, "h": 100.0},
    "radioRadius": 110.0,
    "aps": [[0.0, 50.0], [440.0, 50.0]],
    "handhelds": {
        "count": 3,
        "speed": 0.0,
        "strategy": "honest-baseline",
        "positions": [[110.0, 50.0], [220.0, 50.0], [330.0, 50.0]],
    },
    "rounds": 2,
    "ticksPerRound": 5,
    "packetsPerTick": 1,
    "budgetRange": [10, 100],
    "fineRange": [5, 50],
    "initialTimeout": 20,
}


def write_scenario(tmp_path, payload, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


class TestParseArgs:
    def test_scenario_and_seed(self):
        options = parse_args(["--scenario", "s.json", "--seed", "42"])
        assert str(options.scenario_path) == "s.json"
        assert options.seed == 42
        assert options.fmt == "csv"
        assert str(options.out_dir) == "out"

    def test_scenario_is_required(self):
        with pytest.raises(UsageError):
            parse_args([])

    def test_unknown_format_is_rejected(self):
        with pytest.raises(UsageError):
            parse_args(["--scenario", "s.json", "--format", "xml"])

    def test_rounds_must_be_positive(self):
        with pytest.raises(UsageError):
            parse_args(["--scenario", "s.json", "--rounds", "0"])

    def test_overrides_are_optional(self):
        options = parse_args(["--scenario", "s.json"])
        assert options.seed is None
        assert options.rounds is None
        assert options.quiet is False


class TestScenarioFiles:
    def test_minimal_scenario_gets_defaults(self):
        config = scenario_from_dict(MINIMAL)
        assert config.seed == 1
        assert config.ap_count == 2
        assert config.handheld_count == 1
        assert config.initial_timeout == 20
        assert config.rounds == 3
        assert config.handheld_strategy == "combined"

    def test_full_scenario_round_trips(self):
        config = scenario_from_dict(LINE_SCENARIO)
        assert scenario_from_dict(scenario_to_dict(config)) == config

    def test_default_config_round_trips(self):
        config = ScenarioConfig()
        assert scenario_from_dict(scenario_to_dict(config)) == config

    def test_unknown_top_level_key_is_rejected(self):
        with pytest.raises(ScenarioError, match="pigeons"):
            scenario_from_dict({**MINIMAL, "pigeons": 3})

    def test_unknown_strategy_key_is_rejected(self):
        payload = {**MINIMAL, "strategyConfig": {"verbosity": 0.5}}
        with pytest.raises(ScenarioError, match="verbosity"):
            scenario_from_dict(payload)

    def test_bad_timeout_is_a_scenario_error(self):
        with pytest.raises(ScenarioError, match="initialTimeout"):
            scenario_from_dict({**MINIMAL, "initialTimeout": 0})

    def test_strategy_parameters_apply(self):
        payload = {**MINIMAL,
                   "strategyConfig": {"epsilon": 2, "n": 1.5, "lambda": 0.2}}
        config = scenario_from_dict(payload)
        assert config.strategy_config.fine_margin == 2
        assert config.strategy_config.distance_exponent == 1.5
        assert config.strategy_config.rich_penalty == 0.2

    def test_load_scenario_reads_json(self, tmp_path):
        path = write_scenario(tmp_path, LINE_SCENARIO)
        config = load_scenario(str(path))
        assert config.handheld_count == 3

    def test_load_scenario_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError):
            load_scenario(str(tmp_path / "absent.json"))

    def test_load_scenario_bad_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ScenarioError):
            load_scenario(str(path))

    def test_dump_scenario_writes_loadable_json(self, tmp_path):
        path = tmp_path / "dumped.json"
        config = scenario_from_dict(LINE_SCENARIO)
        dump_scenario(config, str(path))
        assert load_scenario(str(path)) == config


class TestMain:
    def run_main(self, tmp_path, extra=(), scenario=LINE_SCENARIO):
        path = write_scenario(tmp_path, scenario)
        out = tmp_path / "out"
        argv = ["--scenario", str(path), "--out", str(out), "--quiet", *extra]
        return main(argv), out

    def test_csv_run_writes_the_report(self, tmp_path):
        code, out = self.run_main(tmp_path)
        assert code == 0
        names = {p.name for p in out.iterdir()}
        assert {"metrics.csv", "ledger.csv", "transactions.csv", "summary.csv",
                "balances.png", "delivery.png", "outcomes.png"} <= names
        with open(out / "metrics.csv", newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["node", "balance", "bidsWon", "auctionsRun",
                           "dropped", "finesPaid"]
        assert len(rows) == 1 + 5

    def test_json_run_matches_the_csv_numbers(self, tmp_path):
        code, out = self.run_main(tmp_path, extra=["--format", "json"])
        assert code == 0
        payload = json.loads((out / "metrics.json").read_text())
        assert set(payload) == {"global", "perNode"}
        assert payload["global"]["totalTransactions"] == 10
        other = tmp_path / "csvout"
        path = write_scenario(tmp_path, LINE_SCENARIO, name="again.json")
        assert main(["--scenario", str(path), "--out", str(other), "--quiet"]) == 0
        with open(other / "metrics.csv", newline="") as handle:
            rows = {row["node"]: row for row in csv.DictReader(handle)}
        for node, stats in payload["perNode"].items():
            assert int(rows[node]["balance"]) == stats["balance"]
            assert int(rows[node]["bidsWon"]) == stats["bidsWon"]

    def test_seed_override_changes_the_outcome_stream(self, tmp_path):
        _, first = self.run_main(tmp_path)
        path = write_scenario(tmp_path, LINE_SCENARIO, name="s2.json")
        second = tmp_path / "out2"
        scenario = {**LINE_SCENARIO,
                    "handhelds": {**LINE_SCENARIO["handhelds"], "speed": 40.0},
                    "radioRadius": 150.0}
        seeded = write_scenario(tmp_path, scenario, name="s3.json")
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert main(["--scenario", str(seeded), "--out", str(out_a),
                     "--seed", "1", "--quiet"]) == 0
        assert main(["--scenario", str(seeded), "--out", str(out_b),
                     "--seed", "2", "--quiet"]) == 0
        a = (out_a / "transactions.csv").read_text()
        b = (out_b / "transactions.csv").read_text()
        assert a != b

    def test_same_invocation_is_byte_identical(self, tmp_path):
        _, first = self.run_main(tmp_path)
        path = write_scenario(tmp_path, LINE_SCENARIO, name="rerun.json")
        second = tmp_path / "rerun-out"
        assert main(["--scenario", str(path), "--out", str(second),
                     "--quiet"]) == 0
        for name in ("metrics.csv", "ledger.csv", "transactions.csv",
                     "summary.csv"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_rounds_override_applies(self, tmp_path):
        code, out = self.run_main(tmp_path, extra=["--rounds", "1"])
        assert code == 0
        with open(out / "transactions.csv", newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 5
        assert {row["round"] for row in rows} == {"0"}

    def test_usage_error_exits_one(self, capsys):
        assert main([]) == 1
        assert "usage error" in capsys.readouterr().err

    def test_scenario_error_exits_two(self, tmp_path, capsys):
        path = write_scenario(tmp_path, {**MINIMAL, "initialTimeout": 0})
        assert main(["--scenario", str(path), "--quiet"]) == 2
        assert "scenario error" in capsys.readouterr().err

    def test_missing_scenario_file_exits_two(self, tmp_path, capsys):
        assert main(["--scenario", str(tmp_path / "nope.json"),
                     "--quiet"]) == 2
        assert "scenario error" in capsys.readouterr().err

    def test_unwritable_output_exits_three(self, tmp_path, capsys):
        path = write_scenario(tmp_path, LINE_SCENARIO)
        blocker = tmp_path / "blocked"
        blocker.write_text("a file where the directory should go")
        assert main(["--scenario", str(path), "--out", str(blocker),
                     "--quiet"]) == 3
        assert "i/o error" in capsys.readouterr().err

    def test_summary_line_prints_by_default(self, tmp_path, capsys):
        path = write_scenario(tmp_path, LINE_SCENARIO)
        out = tmp_path / "loud"
        assert main(["--scenario", str(path), "--out", str(out)]) == 0
        captured = capsys.readouterr().out
        assert "delivered" in captured
        assert "wrote" in captured
