import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from aurc.cli import main
from aurc.dataio import write_dataset


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def csv_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def dataset(tmp_path):
    rng = np.random.default_rng(0)
    z = rng.normal(size=(300, 5)) * 2
    y = rng.integers(0, 5, 300)
    path = tmp_path / "data.csv"
    write_dataset(path, z, y)
    return path


class TestEvaluate:
    def test_default_estimators(self, capsys, dataset):
        code, out, _ = run(capsys, "evaluate", "-i", str(dataset))
        assert code == 0
        rows = csv_rows(out)
        assert [r["estimator"] for r in rows] == ["plugin_alpha_hat", "plugin_alpha_prime", "sele", "sele_times_two"]
        assert all(r["n"] == "300" and r["csf_kind"] == "msp" for r in rows)

    def test_five_estimators(self, capsys, dataset):
        code, out, _ = run(capsys, "evaluate", "-i", str(dataset), "--weights", "alpha,alpha-prime,sele,sele2,naive")
        assert code == 0
        rows = csv_rows(out)
        assert len(rows) == 5
        vals = {r["estimator"]: float(r["value"]) for r in rows}
        assert vals["naive_empirical"] == pytest.approx(vals["plugin_alpha_hat"], abs=1e-10)

    def test_jsonl_and_json_output(self, capsys, tmp_path):
        path = tmp_path / "d.jsonl"
        write_dataset(path, np.array([[2.0, 0.0], [0.0, 1.0], [1.0, 3.0]]), np.array([0, 0, 1]))
        out_path = tmp_path / "r.json"
        code, _, _ = run(capsys, "evaluate", "-i", str(path), "--loss", "ce", "-o", str(out_path))
        assert code == 0
        doc = json.loads(out_path.read_text())
        assert doc["kind"] == "estimator_report"
        assert doc["provenance"]["seed"] == 42
        assert doc["rows"][0]["loss_kind"] == "cross_entropy"

    def test_monotone_equivalent_csfs_agree(self, capsys, tmp_path):
        # for two classes msp and neg_gini induce the same ordering
        rng = np.random.default_rng(1)
        path = tmp_path / "b.csv"
        write_dataset(path, rng.normal(size=(200, 2)), rng.integers(0, 2, 200))
        _, a, _ = run(capsys, "evaluate", "-i", str(path), "--csf", "msp")
        _, b, _ = run(capsys, "evaluate", "-i", str(path), "--csf", "neg_gini")
        assert [r["value"] for r in csv_rows(a)] == [r["value"] for r in csv_rows(b)]

    def test_empty_file_is_usage_error(self, capsys, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("label,logit_0,logit_1\n")
        code, _, err = run(capsys, "evaluate", "-i", str(path))
        assert code == 2
        assert "no records" in err

    def test_bad_row_reports_line(self, capsys, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("label,logit_0,logit_1\n0,1,2\n7,1,2\n")
        code, _, err = run(capsys, "evaluate", "-i", str(path))
        assert code == 2
        assert ":3:" in err

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, "evaluate", "-i", str(tmp_path / "none.csv"))[0] == 2

    def test_naive_capped(self, capsys, tmp_path):
        path = tmp_path / "big.csv"
        write_dataset(path, np.zeros((20001, 2)), np.zeros(20001, dtype=int))
        code, _, err = run(capsys, "evaluate", "-i", str(path), "--weights", "naive")
        assert code == 2
        assert "capped" in err

    def test_tie_policy_flag(self, capsys, tmp_path):
        path = tmp_path / "ties.csv"
        write_dataset(path, np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]), np.array([1, 0, 0]))
        _, s, _ = run(capsys, "evaluate", "-i", str(path), "--tie", "stable", "--weights", "alpha")
        _, a, _ = run(capsys, "evaluate", "-i", str(path), "--tie", "average", "--weights", "alpha")
        assert csv_rows(a)[0]["tie_policy"] == "average"
        assert float(csv_rows(a)[0]["value"]) != float(csv_rows(s)[0]["value"])


class TestBias:
    def test_sign_change_at_n8(self, capsys):
        code, out, _ = run(capsys, "bias", "--n", "8", "--weights", "alpha")
        assert code == 0
        rows = csv_rows(out)
        assert len(rows) == 19
        assert "mc_estimate" not in rows[0]
        assert float(rows[0]["closed_form"]) > 0 > float(rows[-1]["closed_form"])

    def test_mc_columns(self, capsys):
        code, out, _ = run(capsys, "bias", "--n", "8", "--betas", "0.5", "--weights", "sele", "--mc", "2000")
        rows = csv_rows(out)
        assert code == 0 and len(rows) == 1
        assert rows[0]["mc_reps"] == "2000"

    def test_grid_syntax(self, capsys):
        _, out, _ = run(capsys, "bias", "--n", "4", "--betas", "0.1:0.3:0.1", "--weights", "alpha")
        assert [float(r["beta_or_rank"]) for r in csv_rows(out)] == [0.1, 0.2, 0.3]

    def test_deterministic(self, capsys):
        argv = ("bias", "--n", "16", "--betas", "0.2,0.8", "--mc", "500", "--seed", "3")
        assert run(capsys, *argv)[1] == run(capsys, *argv)[1]

    @pytest.mark.parametrize("betas", ["1.0", "-0.1", "abc"])
    def test_bad_betas(self, capsys, betas):
        assert run(capsys, "bias", "--betas", betas)[0] == 2


class TestMse:
    def test_curves_and_bound(self, capsys):
        code, out, _ = run(capsys, "mse", "--n", "8", "--betas", "0.5")
        rows = csv_rows(out)
        assert code == 0
        assert len(rows) == 3
        assert float(rows[0]["closed_form"]) == pytest.approx(0.103811, abs=1e-6)

    def test_all_ranks(self, capsys):
        _, out, _ = run(capsys, "mse", "--n", "5", "--all-ranks", "--weights", "alpha", "--betas", "0.5")
        assert len(csv_rows(out)) == 5 + 1

    def test_sele_rejected(self, capsys):
        assert run(capsys, "mse", "--weights", "sele")[0] == 2


class TestConverge:
    def test_synthetic_json(self, capsys):
        code, out, _ = run(capsys, "converge", "--population-size", "4096", "--sizes", "8,64",
                           "--reps", "2", "--output-format", "json", "--threads", "1")
        assert code == 0
        doc = json.loads(out)
        assert doc["kind"] == "convergence_table"
        assert "plugin_alpha_hat" in doc["rate_slopes"]
        assert doc["reference"] == pytest.approx(0.25, abs=0.02)
        assert len(doc["rows"]) == 8

    def test_thread_independent(self, capsys):
        argv = ["converge", "--population-size", "2048", "--sizes", "8,32", "--reps", "2"]
        assert run(capsys, *argv, "--threads", "1")[1] == run(capsys, *argv, "--threads", "3")[1]

    def test_dataset_input(self, capsys, dataset):
        code, out, _ = run(capsys, "converge", "-i", str(dataset), "--sizes", "8,32", "--reps", "1",
                           "--output-format", "json")
        assert code == 0
        assert json.loads(out)["reference_kind"] == "empirical_full"

    def test_batch_larger_than_data(self, capsys, dataset):
        assert run(capsys, "converge", "-i", str(dataset), "--sizes", "1024")[0] == 2


class TestCounterexample:
    def test_prints_and_succeeds(self, capsys):
        code, out, _ = run(capsys, "counterexample")
        assert code == 0
        assert "2.283333" in out and "0.456667" in out and "0.400000" in out

    def test_zero_loss_fails(self, capsys):
        assert run(capsys, "counterexample", "--loss-value", "0")[0] == 1


class TestParser:
    def test_help(self, capsys):
        code, out, _ = run(capsys, "--help")
        assert code == 0
        assert "evaluate" in out and "converge" in out

    def test_unknown_flag(self, capsys):
        assert run(capsys, "bias", "--bogus")[0] == 2

    def test_missing_command(self, capsys):
        assert run(capsys)[0] == 2

    def test_unknown_estimator(self, capsys, dataset):
        assert run(capsys, "evaluate", "-i", str(dataset), "--weights", "magic")[0] == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "aurc", "counterexample"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "holds" in proc.stdout
