import json

import pytest

from nphf.cli import main
from nphf.oracle import read_oracle


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A 2x2 pipeline: domain -> oracle -> dataset -> tiny model."""
    root = tmp_path_factory.mktemp("cli")
    assert main(["gen-domain", "--n", "2", "--kind", "canonical", "--out", str(root / "c2.json")]) == 0
    assert main(["oracle", "--domain", str(root / "c2.json"), "--out", str(root / "c2.oracle")]) == 0
    assert (
        main(
            [
                "gen-data",
                "--protocol",
                "data3",
                "--n",
                "2",
                "--seed",
                "3",
                "--kinds",
                "canonical",
                "--states",
                "12",
                "--walk-max",
                "10",
                "--out-dir",
                str(root / "data"),
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "train",
                "--n",
                "2",
                "--mode",
                "fixed",
                "--fixed-kind",
                "canonical",
                "--examples",
                "20000",
                "--batch-size",
                "64",
                "--max-scramble",
                "8",
                "--seed",
                "1",
                "--config",
                str(_write_net_config(root)),
                "--out",
                str(root / "m.nphf"),
                "--log",
                str(root / "train.csv"),
            ]
        )
        == 0
    )
    return root


def _write_net_config(root):
    path = root / "train.json"
    path.write_text(json.dumps({"net": {"first_hidden": 32, "block_width": 16, "num_blocks": 1}}))
    return path


class TestUsageErrors:
    def test_missing_required_flag(self, capsys):
        assert main(["gen-domain", "--n", "3"]) == 64
        assert "usage" in capsys.readouterr().err

    def test_unknown_command(self):
        assert main(["frobnicate"]) == 64

    def test_unknown_flag(self):
        assert main(["gen-domain", "--n", "3", "--kind", "all", "--out", "x", "--bogus"]) == 64

    def test_help_exits_zero(self):
        assert main(["--help"]) == 0


class TestExitCodes:
    def test_bad_input_is_one(self, tmp_path):
        assert main(["gen-domain", "--n", "1", "--kind", "canonical", "--out", str(tmp_path / "d.json")]) == 1

    def test_capacity_is_two(self, tmp_path):
        assert main(["gen-domain", "--n", "3", "--kind", "canonical", "--out", str(tmp_path / "d.json")]) == 0
        assert (
            main(
                [
                    "oracle",
                    "--domain",
                    str(tmp_path / "d.json"),
                    "--out",
                    str(tmp_path / "d.oracle"),
                    "--cap",
                    "10",
                ]
            )
            == 2
        )


class TestDomainCommands:
    def test_gen_domain_writes_manifest(self, workspace):
        manifest = json.loads((workspace / "c2.json.manifest.json").read_text())
        assert manifest["command"] == "gen-domain"
        assert "domain" in manifest["outputs"]
        assert manifest["outputs"]["domain"]["digest"].startswith("sha256:")

    def test_gen_domain_deterministic(self, tmp_path):
        for name in ("a.json", "b.json"):
            assert (
                main(["gen-domain", "--n", "3", "--kind", "random", "--seed", "9", "--out", str(tmp_path / name)])
                == 0
            )
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_gen_domains_batch(self, tmp_path):
        out = tmp_path / "doms"
        assert main(["gen-domains", "--n", "3", "--count", "4", "--seed-base", "100", "--out-dir", str(out)]) == 0
        files = sorted(p.name for p in out.glob("domain_*.json"))
        assert files == ["domain_100.json", "domain_101.json", "domain_102.json", "domain_103.json"]
        assert (out / "manifest.json").exists()


class TestOracleVi:
    def test_vi_table_equals_oracle_table(self, workspace, tmp_path):
        assert main(["vi", "--domain", str(workspace / "c2.json"), "--out", str(tmp_path / "c2.vi")]) == 0
        assert (workspace / "c2.oracle").read_bytes() == (tmp_path / "c2.vi").read_bytes()

    def test_oracle_readable(self, workspace):
        domain, table = read_oracle(workspace / "c2.oracle")
        assert domain.n == 2
        assert len(table) == 12


class TestTrain:
    def test_model_and_log_exist(self, workspace):
        assert (workspace / "m.nphf").exists()
        lines = (workspace / "train.csv").read_text().strip().splitlines()
        assert lines[0] == "step,examples,loss,target_updates,wall_secs"
        manifest = json.loads((workspace / "m.nphf.manifest.json").read_text())
        assert manifest["config"]["mode"] == "fixed_domain"
        assert manifest["config"]["single_worker"] is True


class TestSolve:
    def test_model_solve_results(self, workspace, tmp_path):
        out = tmp_path / "results.csv"
        rc = main(
            [
                "solve",
                "--states",
                str(workspace / "data" / "data.jsonl"),
                "--model",
                str(workspace / "m.nphf"),
                "--lambda",
                "0.8",
                "--batch",
                "16",
                "--time-limit",
                "30",
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "instance_id,solved,cost,optimal_cost,nodes,secs"
        assert len(lines) == 13

    def test_oracle_solve(self, workspace, tmp_path):
        out = tmp_path / "results.csv"
        rc = main(
            [
                "solve",
                "--states",
                str(workspace / "data" / "data.jsonl"),
                "--heuristic",
                "oracle",
                "--oracle",
                str(workspace / "c2.oracle"),
                "--lambda",
                "1.0",
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        rows = out.read_text().strip().splitlines()[1:]
        for row in rows:
            _, solved, cost, optimal, _, _ = row.split(",")
            assert solved == "1"
            assert cost == optimal

    def test_empty_dataset_errors(self, workspace, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        assert (
            main(
                [
                    "solve",
                    "--states",
                    str(empty),
                    "--model",
                    str(workspace / "m.nphf"),
                    "--out",
                    str(tmp_path / "r.csv"),
                ]
            )
            == 1
        )


class TestEvalBench:
    def test_eval_outputs(self, workspace, tmp_path):
        scatter = tmp_path / "scatter.csv"
        metrics = tmp_path / "metrics.json"
        rc = main(
            [
                "eval",
                "--model",
                str(workspace / "m.nphf"),
                "--data",
                str(workspace / "data" / "data.jsonl"),
                "--out",
                str(scatter),
                "--metrics",
                str(metrics),
            ]
        )
        assert rc == 0
        result = json.loads(metrics.read_text())
        assert set(result) >= {"ccc", "r_squared", "count"}
        assert result["count"] == 12
        # a converged 2x2 model correlates almost perfectly
        assert result["ccc"] > 0.9

    def test_bench_outputs(self, workspace, tmp_path):
        out_dir = tmp_path / "bench"
        rc = main(
            [
                "bench",
                "--data",
                str(workspace / "data" / "data.jsonl"),
                "--model",
                str(workspace / "m.nphf"),
                "--lambda",
                "0.8",
                "--batch",
                "16",
                "--label",
                "2-Puzzle (C)",
                "--out-dir",
                str(out_dir),
            ]
        )
        assert rc == 0
        report = (out_dir / "report.csv").read_text().strip().splitlines()
        assert report[0] == "Domain,Solver,Len,Opt,Nodes,Secs,Nodes/Sec,Solved"
        assert report[1].startswith("2-Puzzle (C),model,")
        assert (out_dir / "metrics.json").exists()
        assert (out_dir / "scatter.csv").exists()
        assert (out_dir / "manifest.json").exists()

    def test_bench_oracle_row_full_opt(self, workspace, tmp_path):
        out_dir = tmp_path / "bench_oracle"
        rc = main(
            [
                "bench",
                "--data",
                str(workspace / "data" / "data.jsonl"),
                "--model",
                str(workspace / "m.nphf"),
                "--heuristic",
                "oracle",
                "--oracle",
                str(workspace / "c2.oracle"),
                "--lambda",
                "1.0",
                "--batch",
                "16",
                "--solver-name",
                "oracle",
                "--out-dir",
                str(out_dir),
            ]
        )
        assert rc == 0
        row = (out_dir / "report.csv").read_text().strip().splitlines()[1]
        fields = row.split(",")
        assert fields[1] == "oracle"
        assert fields[3] == "100.0%"
        assert fields[7] == "100.0%"


class TestGradcheck:
    def test_passes(self, capsys):
        assert main(["gradcheck", "--seed", "0"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "max relative error" in out

    def test_fails_with_zero_tolerance(self, capsys):
        assert main(["gradcheck", "--seed", "0", "--tolerance", "0"]) == 1
        assert "FAIL" in capsys.readouterr().out
