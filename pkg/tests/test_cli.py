import json

import numpy as np
import pytest

from lrbandit.cli import main
from lrbandit.oracle import MatrixOracle, save_matrix


@pytest.fixture
def toy_csv(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text(
        "method,q1,q2,q3,q4\n"
        "alpha,0.9,0.8,0.9,1.0\n"
        "beta,0.1,0.2,0.0,0.1\n"
        "gamma,0.5,0.6,0.4,0.5\n"
    )
    return path


@pytest.fixture
def rank1_csv(tmp_path):
    rng = np.random.default_rng(0)
    u = rng.uniform(0.2, 0.9, 8)
    v = rng.uniform(0.3, 1.0, 12)
    s = np.outer(u, v)
    oracle = MatrixOracle(s / s.max())
    path = tmp_path / "rank1.csv"
    save_matrix(oracle, path)
    return path


class TestRun:
    def test_full_budget_prints_exact_argmax(self, toy_csv, capsys):
        code = main(["run", "--matrix", str(toy_csv), "--algo", "ucb-e",
                     "--budget-frac", "1.0", "--batch", "4"])
        out = capsys.readouterr().out
        assert code == 0
        assert "best method: alpha (index 0)" in out
        assert "estimated mean: 0.9" in out

    def test_trajectory_file(self, toy_csv, tmp_path, capsys):
        out_path = tmp_path / "traj.json"
        code = main(["run", "--matrix", str(toy_csv), "--algo", "row-mean",
                     "--budget-frac", "0.5", "--seed", "5", "--out", str(out_path)])
        assert code == 0
        blob = json.loads(out_path.read_text())
        assert blob["algorithm"] == "row-mean"
        assert len(blob["pairs"]) == 6

    def test_warmup_exceeding_budget_exits_2(self, toy_csv):
        with pytest.raises(SystemExit) as err:
            main(["run", "--matrix", str(toy_csv), "--algo", "ucb-e-lrf",
                  "--budget-frac", "0.04", "--warmup-frac", "0.05"])
        assert err.value.code == 2

    def test_unknown_flag_exits_2(self, toy_csv):
        with pytest.raises(SystemExit) as err:
            main(["run", "--matrix", str(toy_csv), "--algo", "ucb-e", "--bogus"])
        assert err.value.code == 2

    def test_missing_matrix_file_exits_1(self, tmp_path, capsys):
        code = main(["run", "--matrix", str(tmp_path / "absent.csv"), "--algo", "ucb-e"])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_seeded_runs_are_byte_identical(self, toy_csv, capsys):
        args = ["run", "--matrix", str(toy_csv), "--algo", "ucb-e-lrf",
                "--budget-frac", "1.0", "--seed", "3", "--warmup-frac", "0.2",
                "--ensemble", "4", "--batch", "4"]
        main(args)
        first = capsys.readouterr().out
        main(args)
        assert capsys.readouterr().out == first

    def test_defaults_documented_in_help(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["run", "--help"])
        assert err.value.code == 0
        text = capsys.readouterr().out
        for fragment in ("default 1", "default 64", "default 0.05", "default 5",
                         "default 32", "default 0.1"):
            assert fragment in text


class TestExperiment:
    def test_inline_experiment_writes_reports(self, toy_csv, tmp_path, capsys):
        csv_out = tmp_path / "agg.csv"
        json_out = tmp_path / "full.json"
        code = main([
            "experiment", "--matrix", str(toy_csv),
            "--algos", "ucb-e,row-mean",
            "--trials", "2",
            "--checkpoints", "0.5,1.0",
            "--eps", "0.01", "--pvals", "0.1", "--ndcg-k", "2",
            "--out-csv", str(csv_out), "--out-json", str(json_out),
        ])
        assert code == 0
        assert csv_out.exists() and json_out.exists()
        lines = csv_out.read_text().strip().splitlines()
        # 2 algos x 2 checkpoints x 3 metrics + header
        assert len(lines) == 1 + 12

    def test_spec_file_experiment(self, toy_csv, tmp_path):
        spec = {
            "oracle": {"kind": "matrix", "path": str(toy_csv)},
            "algorithms": [{"name": "row-mean", "config": {"batch_size": 4}}],
            "checkpoints": [1.0],
            "trials": 2,
            "master_seed": 1,
            "metrics": {"epsilons": [0.01], "p_levels": [0.1], "ndcg_k": 2},
            "output": {"csv": str(tmp_path / "r.csv"), "json": None, "timing": None},
        }
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(spec))
        assert main(["experiment", "--spec", str(spec_path)]) == 0
        assert (tmp_path / "r.csv").exists()

    def test_default_trials_is_fifty(self, capsys):
        with pytest.raises(SystemExit):
            main(["experiment", "--help"])
        assert "default 50" in capsys.readouterr().out


class TestMetricsCommand:
    def test_gap_precision_lines(self, tmp_path, capsys):
        path = tmp_path / "m.csv"
        oracle = MatrixOracle(np.tile(np.array([[0.9], [0.8], [0.5]]), (1, 6)))
        save_matrix(oracle, path)
        code = main(["metrics", "--matrix", str(path), "--prediction", "0"])
        out = capsys.readouterr().out
        assert code == 0
        assert "precision (gap eps=0.001): 1" in out
        assert "precision (gap eps=0.01): 1" in out
        assert "hardness: 106.25" in out

    def test_ranking_ndcg(self, tmp_path, capsys):
        path = tmp_path / "m.csv"
        oracle = MatrixOracle(np.tile(np.array([[0.9], [0.8], [0.5]]), (1, 6)))
        save_matrix(oracle, path)
        code = main(["metrics", "--matrix", str(path), "--prediction", "2",
                     "--ranking", "2,0,1", "--ndcg-k", "2"])
        out = capsys.readouterr().out
        assert code == 0
        assert "ndcg@2: 0.760165" in out


class TestSynthCommand:
    def test_sidecar_hardness_matches_hand_formula(self, tmp_path, capsys):
        out = tmp_path / "synth.csv"
        code = main(["synth", "--m", "40", "--n", "25",
                     "--means", "linspace:0.3,0.7", "--seed", "7",
                     "--out", str(out)])
        assert code == 0
        sidecar = json.loads((tmp_path / "synth.csv.truth.json").read_text())
        means = np.linspace(0.3, 0.7, 40)
        gaps = means - means.max()
        expected = float(np.sum(1.0 / gaps[gaps != 0] ** 2))
        assert sidecar["hardness"] == pytest.approx(expected, rel=1e-9)
        assert sidecar["best_index"] == 39

    def test_generated_file_loads(self, tmp_path):
        out = tmp_path / "synth.csv"
        main(["synth", "--m", "5", "--n", "10", "--means", "linspace:0.2,0.8",
              "--noise", "bernoulli", "--seed", "1", "--out", str(out)])
        assert main(["inspect", "--matrix", str(out)]) == 0

    def test_seeded_synth_is_byte_identical(self, tmp_path):
        args = lambda name: ["synth", "--m", "4", "--n", "8",
                             "--means", "linspace:0.2,0.8", "--noise", "bernoulli",
                             "--seed", "9", "--out", str(tmp_path / name)]
        main(args("a.csv"))
        main(args("b.csv"))
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert (
            json.loads((tmp_path / "a.csv.truth.json").read_text())
            == json.loads((tmp_path / "b.csv.truth.json").read_text())
        )


class TestInspectCommand:
    def test_rank1_diagnostics(self, rank1_csv, capsys):
        code = main(["inspect", "--matrix", str(rank1_csv)])
        out = capsys.readouterr().out
        assert code == 0
        assert "methods: 8" in out
        assert "examples: 12" in out
        sigma2_line = [l for l in out.splitlines() if l.startswith("sigma2/sigma1")][0]
        assert float(sigma2_line.split(":")[1]) < 1e-6

    def test_reports_hardness_and_best(self, toy_csv, capsys):
        main(["inspect", "--matrix", str(toy_csv)])
        out = capsys.readouterr().out
        assert "best method: alpha (index 0)" in out
        assert "hardness:" in out
