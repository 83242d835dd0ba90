"""Command-line interface: exit codes, determinism, file plumbing."""

import json

import pytest

from aceseq.cli import main

pytestmark = pytest.mark.filterwarnings("ignore::ResourceWarning")


def run_cli(*argv):
    return main(list(argv))


class TestGenData:
    def test_same_flags_same_bytes(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        base = ["gen-data", "--task", "seq1d", "--seed", "5", "--count", "10",
                "--timesteps", "12", "--max-len", "4"]
        assert run_cli(*base, "--out", str(a)) == 0
        assert run_cli(*base, "--out", str(b)) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_line_count_header_plus_samples(self, tmp_path):
        out = tmp_path / "d.jsonl"
        assert run_cli("gen-data", "--task", "seq1d", "--count", "25",
                       "--out", str(out)) == 0
        assert len(out.read_text(encoding="utf-8").splitlines()) == 26

    def test_flags_echoed_into_header(self, tmp_path):
        out = tmp_path / "d.jsonl"
        run_cli("gen-data", "--task", "seq1d", "--count", "3", "--seed", "9",
                "--out", str(out))
        header = json.loads(out.read_text(encoding="utf-8").splitlines()[0])
        assert header["params"]["seed"] == 9
        assert header["params"]["count"] == 3

    def test_capacity_error_exits_2(self, tmp_path, capsys):
        code = run_cli("gen-data", "--task", "seq1d", "--count", "1",
                       "--timesteps", "4", "--max-len", "9",
                       "--out", str(tmp_path / "x.jsonl"))
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_unknown_flag_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            run_cli("gen-data", "--task", "seq1d", "--out",
                    str(tmp_path / "x.jsonl"), "--frobnicate", "1")
        assert info.value.code == 2

    def test_grid_task(self, tmp_path):
        out = tmp_path / "g.jsonl"
        assert run_cli("gen-data", "--task", "grid2d", "--count", "5",
                       "--height", "3", "--width", "4", "--max-objects", "4",
                       "--layout", "lines", "--out", str(out)) == 0
        record = json.loads(out.read_text(encoding="utf-8").splitlines()[1])
        assert record["shape"] == [3, 4]


class TestGradCheck:
    def test_passes_and_exits_zero(self, capsys):
        assert run_cli("grad-check", "--loss", "ace-ce", "--trials", "5") == 0
        out = json.loads(capsys.readouterr().out)
        assert out["passed"] is True

    def test_ctc_report_includes_enumeration_oracle(self, capsys):
        assert run_cli("grad-check", "--loss", "ctc", "--trials", "5") == 0
        out = json.loads(capsys.readouterr().out)
        assert out["enumeration_oracle_max_gap"] <= 1e-10

    def test_perturbed_gradient_exits_one(self, capsys):
        code = run_cli("grad-check", "--loss", "ace-ce", "--trials", "3",
                       "--perturb", "1e-3")
        assert code == 1
        captured = capsys.readouterr()
        assert "FAIL" in captured.err
        assert "max" in captured.err


class TestTrainEvalLoss:
    @pytest.fixture()
    def small_dataset(self, tmp_path):
        path = tmp_path / "train.jsonl"
        run_cli("gen-data", "--task", "seq1d", "--count", "30", "--timesteps",
                "10", "--max-len", "4", "--noise-sigma", "0.0", "--out", str(path))
        return path

    def test_train_then_eval_roundtrip(self, tmp_path, small_dataset, capsys):
        model_path = tmp_path / "model.json"
        log_path = tmp_path / "log.jsonl"
        code = run_cli("train", "--data", str(small_dataset), "--loss", "ace-ce",
                       "--epochs", "3", "--out-model", str(model_path),
                       "--log", str(log_path))
        assert code == 0
        assert model_path.exists()
        log_lines = log_path.read_text(encoding="utf-8").splitlines()
        assert len(log_lines) == 3
        entry = json.loads(log_lines[-1])
        assert set(entry) == {"epoch", "loss", "cer", "seq_acc", "count_acc"}
        capsys.readouterr()

        assert run_cli("eval", "--data", str(small_dataset),
                       "--model", str(model_path)) == 0
        out = json.loads(capsys.readouterr().out)
        assert {"cer", "seq_acc", "count_acc"} <= set(out)

    def test_loss_command(self, small_dataset, capsys):
        assert run_cli("loss", "--data", str(small_dataset), "--loss", "ace-ce") == 0
        out = json.loads(capsys.readouterr().out)
        assert out["samples"] == 30
        assert out["mean_loss"] > 0

    def test_eval_counting(self, tmp_path, capsys):
        data = tmp_path / "count.jsonl"
        run_cli("gen-data", "--task", "count", "--count", "20", "--height", "4",
                "--width", "4", "--max-objects", "5", "--noise-sigma", "0.0",
                "--out", str(data))
        model_path = tmp_path / "model.json"
        run_cli("train", "--data", str(data), "--loss", "ace-ce", "--epochs", "2",
                "--out-model", str(model_path))
        capsys.readouterr()
        assert run_cli("eval", "--data", str(data), "--model", str(model_path),
                       "--counting") == 0
        out = json.loads(capsys.readouterr().out)
        assert "m_rmse" in out and "baseline_m_rmse" in out

    def test_missing_data_file_exits_2(self, tmp_path):
        assert run_cli("loss", "--data", str(tmp_path / "nope.jsonl"),
                       "--loss", "ace-ce") == 2


class TestBenchCommand:
    def test_bench_prints_table_and_csv(self, tmp_path, capsys):
        csv_path = tmp_path / "bench.csv"
        code = run_cli("bench", "--timesteps", "10", "--classes", "6",
                       "--batch", "2", "--seq-len", "3", "--repeats", "2",
                       "--csv", str(csv_path))
        assert code == 0
        out = capsys.readouterr().out
        assert "median_ms" in out
        assert csv_path.read_text(encoding="utf-8").startswith("loss,")

    def test_infeasible_spec_exits_2(self):
        assert run_cli("bench", "--timesteps", "4", "--seq-len", "9") == 2


class TestShuffleExp:
    def test_table_has_all_requested_cells(self, capsys):
        code = run_cli("shuffle-exp", "--ratios", "0,1.0", "--losses", "ace-ce",
                       "--seeds", "1", "--train-count", "20", "--test-count", "10",
                       "--timesteps", "10", "--max-len", "3", "--epochs", "1")
        assert code == 0
        lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("ace_ce")]
        assert len(lines) == 2  # 2 ratios x 1 loss x 1 seed

    def test_unknown_loss_rejected(self):
        assert run_cli("shuffle-exp", "--losses", "attention", "--seeds", "1") == 2


class TestUsage:
    def test_no_command_exits_2(self):
        with pytest.raises(SystemExit) as info:
            run_cli()
        assert info.value.code == 2

    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as info:
            run_cli("frobnicate")
        assert info.value.code == 2
