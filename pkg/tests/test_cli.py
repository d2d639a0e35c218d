import csv
import json

import numpy as np
import pytest

from qmcmarginals.cli import main
from qmcmarginals.pointsets import read_binary, read_csv


def run(tmp_path, *args):
    return main(["--out-dir", str(tmp_path), *args])


class TestLattice:
    def test_korobov_points(self, tmp_path):
        assert run(tmp_path, "lattice", "--N", "8", "--dims", "2", "--generator", "korobov:5") == 0
        expected = [[0, 0], [0.125, 0.625], [0.25, 0.25], [0.375, 0.875],
                    [0.5, 0.5], [0.625, 0.125], [0.75, 0.75], [0.875, 0.375]]
        np.testing.assert_array_equal(read_csv(tmp_path / "points.csv"), expected)
        np.testing.assert_array_equal(read_binary(tmp_path / "points.bin"), expected)
        assert json.loads((tmp_path / "vector.json").read_text())["z"] == [1, 5]

    def test_weighted_from_report(self, tmp_path):
        assert run(tmp_path, "fanova", "--target", "gamma10") == 0
        report = tmp_path / "variance_report.json"
        assert run(tmp_path, "lattice", "--N", "1024", "--dims", "10", "--weights", f"from:{report}") == 0
        vec = json.loads((tmp_path / "vector.json").read_text())
        assert len(vec["z"]) == 10 and max(vec["gamma"]) == 1.0

    def test_budget_expression(self, tmp_path):
        assert run(tmp_path, "--budget", "2^8", "lattice", "--N", "512", "--dims", "2") == 2

    def test_missing_required(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            run(tmp_path, "lattice", "--N", "64")
        assert info.value.code == 2


class TestEstimate:
    def test_outputs(self, tmp_path, capsys):
        assert run(tmp_path, "estimate", "--target", "exp2", "--points", "korobov", "--N", "1024") == 0
        for k in (1, 2):
            assert (tmp_path / f"fit_axis{k}.json").exists()
            assert (tmp_path / f"marginal_axis{k}.csv").exists()
        rows = list(csv.DictReader(open(tmp_path / "scores.csv")))
        assert {r["metric"] for r in rows} == {"hellinger", "sup_error"}
        assert "hellinger" in capsys.readouterr().out

    def test_grid_needs_n(self, tmp_path):
        with pytest.raises(SystemExit):
            run(tmp_path, "estimate", "--target", "exp2", "--points", "grid")

    def test_grid_over_budget(self, tmp_path, capsys):
        assert run(tmp_path, "estimate", "--target", "gamma10", "--points", "grid", "--n", "5") == 2
        assert "9,765,625" in capsys.readouterr().err

    def test_unknown_target(self, tmp_path):
        assert run(tmp_path, "estimate", "--target", "nope", "--N", "64") == 2

    def test_axes_subset(self, tmp_path):
        assert run(tmp_path, "estimate", "--target", "exp4", "--N", "512", "--axes", "2,4") == 0
        assert sorted(p.name for p in tmp_path.glob("fit_axis*.json")) == ["fit_axis2.json", "fit_axis4.json"]


class TestFanova:
    def test_table(self, tmp_path, capsys):
        assert run(tmp_path, "fanova", "--target", "gamma10") == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert out[0].split() == ["marginal", "weight(%)"] and len(out) == 11
        data = json.loads((tmp_path / "variance_report.json").read_text())
        assert sum(data["percent"]) == pytest.approx(100)

    def test_unfactorized(self, tmp_path):
        with pytest.raises(SystemExit):
            run(tmp_path, "fanova", "--target", "beta4")


class TestBench:
    def test_runs_and_series(self, tmp_path):
        assert run(tmp_path, "bench", "--target", "exp2", "--runs", "grid:5", "korobov:2^8", "--series") == 0
        rows = list(csv.reader(open(tmp_path / "bench.csv")))
        assert rows[0] == ["marginal", "weight_percent", "method", "N", "hellinger", "sup_error", "wall_ms"]
        assert [r[2] for r in rows[1:]] == ["grid", "grid", "korobov", "korobov"]
        assert (tmp_path / "convergence.csv").exists()

    def test_timing(self, tmp_path):
        assert run(tmp_path, "bench", "--target", "exp2", "--runs", "korobov:256", "--timing") == 0
        assert "korobov-2^8" in json.loads((tmp_path / "timings.json").read_text())


class TestDiscrepancy:
    def test_generated(self, tmp_path):
        assert run(tmp_path, "discrepancy", "--N", "8", "--dims", "2", "--generator", "korobov:5") == 0
        data = json.loads((tmp_path / "discrepancy.json").read_text())
        assert data == {"value": pytest.approx(0.234375), "exact": True}

    def test_from_file(self, tmp_path):
        run(tmp_path, "lattice", "--N", "8", "--dims", "2", "--generator", "korobov:5")
        assert run(tmp_path, "discrepancy", "--points", str(tmp_path / "points.bin")) == 0


class TestConfig:
    def test_config_supplies_options(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"lattice": {"N": 16, "dims": 3, "generator": "korobov:3"}}))
        assert run(tmp_path, "--config", str(cfg), "lattice") == 0
        assert json.loads((tmp_path / "vector.json").read_text())["z"] == [1, 3, 9]

    def test_flags_override_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"N": 16, "dims": 3, "generator": "korobov:3"}))
        assert run(tmp_path, "--config", str(cfg), "lattice", "--generator", "korobov:5") == 0
        assert json.loads((tmp_path / "vector.json").read_text())["z"] == [1, 5, 9]

    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"lattice": {"N": 16, "colour": "red"}}))
        with pytest.raises(SystemExit, match="colour"):
            run(tmp_path, "--config", str(cfg), "lattice")


class TestGlobalFlags:
    def test_after_verb(self, tmp_path):
        assert main(["lattice", "--N", "8", "--dims", "2", "--generator", "korobov:5", "--out-dir", str(tmp_path)]) == 0
        assert (tmp_path / "points.csv").exists()
        assert main(["lattice", "--N", "512", "--dims", "2", "--budget", "2^8", "--out-dir", str(tmp_path)]) == 2

    def test_position_does_not_change_result(self, tmp_path):
        args = ["--target", "exp2", "--points", "random", "--N", "256"]
        a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
        assert main(["--seed", "3", "--out-dir", str(a), "estimate", *args]) == 0
        assert main(["estimate", *args, "--seed", "3", "--out-dir", str(b)]) == 0
        assert main(["--out-dir", str(c), "estimate", *args]) == 0
        assert (a / "scores.csv").read_bytes() == (b / "scores.csv").read_bytes()
        assert (a / "scores.csv").read_bytes() != (c / "scores.csv").read_bytes()

    def test_flag_before_verb_beats_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 7, "target": "exp2", "points": "random", "N": 256}))
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["--seed", "3", "--out-dir", str(a), "--config", str(cfg), "estimate"]) == 0
        assert main(["--seed", "3", "--out-dir", str(b), "estimate", "--target", "exp2", "--points", "random",
                     "--N", "256"]) == 0
        assert (a / "scores.csv").read_bytes() == (b / "scores.csv").read_bytes()
        c = tmp_path / "c"
        assert main(["--out-dir", str(c), "--config", str(cfg), "estimate"]) == 0
        assert (a / "scores.csv").read_bytes() != (c / "scores.csv").read_bytes()
