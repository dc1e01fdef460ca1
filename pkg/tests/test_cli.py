import csv
import json
from pathlib import Path

import pytest
from jsonschema import Draft7Validator
from referencing import Registry, Resource

import xorelay
from xorelay.cli import main, parse_policy, policy_to_dict
from xorelay.policies import Opportunistic, QThreshold, QueueOrWait, RandomizedQThreshold, WaitThreshold

SCHEMA_DIR = Path(xorelay.__file__).parent / "schemas"


def _validator(name: str) -> Draft7Validator:
    manifest = json.loads((SCHEMA_DIR / "manifest.schema.json").read_text())
    schema = json.loads((SCHEMA_DIR / name).read_text())
    registry = Registry().with_resource("manifest.schema.json", Resource.from_contents(manifest))
    return Draft7Validator(schema, registry=registry)


def _load(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


def _read_csv(path: Path) -> list[dict]:
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


class TestParsePolicy:
    @pytest.mark.parametrize(
        "spec",
        [
            Opportunistic(),
            QThreshold(1, 2),
            RandomizedQThreshold(1, 1, 0.25),
            WaitThreshold(3, 4),
            QueueOrWait(1, 2, 3, 4),
        ],
    )
    def test_roundtrip(self, spec):
        assert parse_policy(policy_to_dict(spec)) == spec

    def test_accepts_json_strings(self):
        assert parse_policy('{"family": "opportunistic"}') == Opportunistic()

    def test_rejects_unknown_family_and_missing_fields(self):
        with pytest.raises(ValueError):
            parse_policy({"family": "nope"})
        with pytest.raises(ValueError):
            parse_policy({"family": "q_threshold", "l1": 1})


class TestAnalyze:
    def test_writes_expected_row_and_valid_json(self, tmp_path):
        code = main([
            "analyze", "--p1", "0.5", "--p2", "0.5", "--c-transmit", "5",
            "--c-hold", "1", "--output", str(tmp_path),
        ])
        assert code == 0
        rows = _read_csv(tmp_path / "analyze.csv")
        origin = next(r for r in rows if r["L1"] == "0" and r["L2"] == "0")
        assert float(origin["tau"]) == pytest.approx(0.75)
        assert float(origin["lambda"]) == 0.0
        assert float(origin["cost_per_slot"]) == pytest.approx(3.75)
        assert float(origin["cost_per_packet"]) == pytest.approx(3.75)
        assert float(origin["mean_delay"]) == 0.0

        payload = _load(tmp_path / "analyze.json")
        _validator("analyze.schema.json").validate(payload)
        assert payload["optimal"]["l1"] == 1 and payload["optimal"]["l2"] == 1

    def test_degenerate_input_exits_2(self, tmp_path, capsys):
        code = main([
            "analyze", "--p1", "0", "--p2", "0", "--c-transmit", "5",
            "--c-hold", "1", "--output", str(tmp_path),
        ])
        assert code == 2
        assert "alpha" in capsys.readouterr().err

    def test_config_file_supplies_defaults(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"p1": 0.6, "p2": 0.3, "c_transmit": 5, "c_hold": 1}))
        out = tmp_path / "out"
        assert main(["analyze", "--config", str(cfg), "--output", str(out)]) == 0
        payload = _load(out / "analyze.json")
        assert payload["manifest"]["parameters"]["p1"] == 0.6

    def test_flag_overrides_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"p1": 0.6, "p2": 0.3, "c_transmit": 5, "c_hold": 1}))
        out = tmp_path / "out"
        assert main(["analyze", "--config", str(cfg), "--p1", "0.2", "--output", str(out)]) == 0
        assert _load(out / "analyze.json")["manifest"]["parameters"]["p1"] == 0.2


class TestSolve:
    def test_rvi_reports_threshold_policy(self, tmp_path):
        code = main([
            "solve", "--method", "rvi", "--p1", "0.5", "--p2", "0.5",
            "--c-transmit", "5", "--c-hold", "1", "--cap", "20",
            "--output", str(tmp_path),
        ])
        assert code == 0
        payload = _load(tmp_path / "solve.json")
        _validator("solve.schema.json").validate(payload)
        assert payload["solution"]["thresholds"] == {"l1": 1, "l2": 1}
        assert payload["solution"]["policy"]["0,0"] == "WAIT"

    def test_analyze_and_solve_agree(self, tmp_path):
        args = ["--p1", "0.6", "--p2", "0.3", "--c-transmit", "5", "--c-hold", "1"]
        assert main(["analyze", *args, "--output", str(tmp_path / "a")]) == 0
        assert main(["solve", "--method", "rvi", *args, "--cap", "30",
                     "--output", str(tmp_path / "s")]) == 0
        analytic = _load(tmp_path / "a" / "analyze.json")["optimal"]["cost_per_slot"]
        gain = _load(tmp_path / "s" / "solve.json")["solution"]["gain"]
        assert abs(analytic - gain) < 1e-3

    def test_lp_objective_close_to_rvi(self, tmp_path):
        args = ["--p1", "0.5", "--p2", "0.5", "--c-transmit", "5", "--c-hold", "1"]
        assert main(["solve", "--method", "rvi", *args, "--cap", "12",
                     "--output", str(tmp_path / "rvi")]) == 0
        assert main(["solve", "--method", "lp", *args, "--cap", "12", "--epsilon", "1e-6",
                     "--output", str(tmp_path / "lp")]) == 0
        gain = _load(tmp_path / "rvi" / "solve.json")["solution"]["gain"]
        objective = _load(tmp_path / "lp" / "solve.json")["solution"]["objective"]
        assert abs(gain - objective) < 1e-3

    def test_myopic_discount_zero(self, tmp_path):
        code = main([
            "solve", "--method", "dvi", "--beta", "0", "--p1", "0.5", "--p2", "0.5",
            "--c-transmit", "0.5", "--c-hold", "1", "--cap", "6",
            "--output", str(tmp_path),
        ])
        assert code == 0
        policy = _load(tmp_path / "solve.json")["solution"]["policy"]
        # One-step greedy: shedding a packet saves more holding than the
        # transmission costs, so every backlogged state transmits.
        for state, action in policy.items():
            if state != "0,0":
                assert action == "TRANSMIT"

    def test_missing_method_exits_2(self, tmp_path):
        assert main(["solve", "--p1", "0.5", "--p2", "0.5", "--output", str(tmp_path)]) == 2

    def test_non_convergence_exits_3(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"max_iterations": 3, "tol": 1e-12}))
        code = main([
            "solve", "--method", "rvi", "--config", str(cfg), "--p1", "0.5", "--p2", "0.5",
            "--c-transmit", "5", "--c-hold", "1", "--cap", "10", "--output", str(tmp_path),
        ])
        assert code == 3


class TestSimulate:
    def test_relay_comparison_outputs(self, tmp_path):
        code = main([
            "simulate", "--scenario", "relay", "--p1", "0.5", "--p2", "0.5",
            "--c-transmit", "5", "--c-hold", "1", "--slots", "20000", "--seed", "9",
            "--policy", '{"family": "opportunistic"}',
            "--policy", '{"family": "q_threshold", "l1": 1, "l2": 1}',
            "--output", str(tmp_path),
        ])
        assert code == 0
        payload = _load(tmp_path / "simulate.json")
        _validator("simulate.schema.json").validate(payload)
        assert len(payload["runs"]) == 2
        rows = _read_csv(tmp_path / "comparison.csv")
        assert len(rows) == 2
        assert {r["policy"] for r in rows} == {
            '{"family": "opportunistic"}',
            '{"family": "q_threshold", "l1": 1, "l2": 1}',
        }

    def test_line_needs_two_policies(self, tmp_path):
        code = main([
            "simulate", "--scenario", "line", "--p1", "0.5", "--p2", "0.5",
            "--slots", "1000", "--policy", '{"family": "opportunistic"}',
            "--output", str(tmp_path),
        ])
        assert code == 2

    def test_line_run_validates(self, tmp_path):
        code = main([
            "simulate", "--scenario", "line", "--p1", "0.5", "--p2", "0.5",
            "--c-transmit", "5", "--c-hold", "1", "--slots", "5000", "--seed", "2",
            "--policy", '{"family": "q_threshold", "l1": 1, "l2": 1}',
            "--policy", '{"family": "q_threshold", "l1": 1, "l2": 1}',
            "--output", str(tmp_path),
        ])
        assert code == 0
        payload = _load(tmp_path / "simulate.json")
        _validator("simulate.schema.json").validate(payload)
        report = payload["runs"][0]["report"]
        assert report["scenario"] == "line"
        assert len(report["per_relay"]) == 2

    def test_deterministic_given_manifest(self, tmp_path):
        args = [
            "simulate", "--scenario", "relay", "--p1", "0.4", "--p2", "0.6",
            "--c-transmit", "2", "--c-hold", "1", "--slots", "5000", "--seed", "33",
            "--policy", '{"family": "wait_threshold", "w1": 2, "w2": 2}',
        ]
        assert main([*args, "--output", str(tmp_path / "one")]) == 0
        assert main([*args, "--output", str(tmp_path / "two")]) == 0
        first = _load(tmp_path / "one" / "simulate.json")
        second = _load(tmp_path / "two" / "simulate.json")
        assert first["runs"] == second["runs"]

    def test_replications_use_derived_seeds(self, tmp_path):
        code = main([
            "simulate", "--scenario", "relay", "--p1", "0.5", "--p2", "0.5",
            "--c-transmit", "5", "--c-hold", "1", "--slots", "2000", "--seed", "1",
            "--replications", "3", "--policy", '{"family": "opportunistic"}',
            "--output", str(tmp_path),
        ])
        assert code == 0
        runs = _load(tmp_path / "simulate.json")["runs"]
        assert len(runs) == 3
        assert len({r["seed"] for r in runs}) == 3

    def test_unknown_family_exits_2(self, tmp_path):
        code = main([
            "simulate", "--scenario", "relay", "--p1", "0.5", "--p2", "0.5",
            "--slots", "100", "--policy", '{"family": "psychic"}',
            "--output", str(tmp_path),
        ])
        assert code == 2


class TestSweep:
    def test_empty_grid_writes_index_only(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"points": []}))
        out = tmp_path / "out"
        assert main(["sweep", "--config", str(cfg), "--output", str(out)]) == 0
        assert (out / "index.csv").exists()
        payload = _load(out / "index.json")
        _validator("sweep_index.schema.json").validate(payload)
        assert payload["total"] == 0

    def test_grid_produces_per_point_outputs(self, tmp_path):
        points = [
            {"mode": "analyze", "p1": p1, "p2": p2, "c_transmit": 5, "c_hold": 1}
            for p1, p2 in [(0.2, 0.2), (0.5, 0.5), (0.6, 0.3), (0.3, 0.6)]
        ]
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"points": points}))
        out = tmp_path / "out"
        assert main(["sweep", "--config", str(cfg), "--output", str(out), "--jobs", "2"]) == 0
        rows = _read_csv(out / "index.csv")
        assert len(rows) == 4
        for idx in range(4):
            assert (out / f"point_{idx:03d}" / "analyze.csv").exists()

    def test_partial_failure_exits_4_and_finishes_the_rest(self, tmp_path):
        points = [
            {"mode": "analyze", "p1": 0.5, "p2": 0.5, "c_transmit": 5, "c_hold": 1},
            {"mode": "analyze", "p1": 0.0, "p2": 0.0, "c_transmit": 5, "c_hold": 1},
            {"mode": "analyze", "p1": 0.4, "p2": 0.4, "c_transmit": 5, "c_hold": 1},
        ]
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"points": points}))
        out = tmp_path / "out"
        assert main(["sweep", "--config", str(cfg), "--output", str(out)]) == 4
        rows = _read_csv(out / "index.csv")
        assert [r["status"] for r in rows] == ["ok", "failed", "ok"]
        assert (out / "point_002" / "analyze.json").exists()
        payload = _load(out / "index.json")
        assert payload["failed"][0]["point"] == 1

    def test_point_results_do_not_depend_on_grid_order(self, tmp_path):
        sim_point = {
            "mode": "simulate", "scenario": "relay", "p1": 0.5, "p2": 0.5,
            "c_transmit": 5, "c_hold": 1, "slots": 3000,
            "policies": [{"family": "opportunistic"}],
        }
        other = {"mode": "analyze", "p1": 0.3, "p2": 0.4, "c_transmit": 5, "c_hold": 1}
        for name, points in [("fwd", [sim_point, other]), ("rev", [other, sim_point])]:
            cfg = tmp_path / f"{name}.json"
            cfg.write_text(json.dumps({"points": points}))
            assert main(["sweep", "--config", str(cfg), "--output", str(tmp_path / name)]) == 0
        fwd = _load(tmp_path / "fwd" / "point_000" / "simulate.json")["runs"]
        rev = _load(tmp_path / "rev" / "point_001" / "simulate.json")["runs"]
        assert fwd == rev
