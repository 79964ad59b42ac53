"""Command-line entry points: exit codes, report bytes, output hygiene."""
import numpy as np
import pytest

from privcause.cli import main
from privcause.data_io import SamplePairs, write_pairs_file
from privcause.experiments import CSV_HEADER


def test_requires_a_subcommand():
    with pytest.raises(SystemExit):
        main([])


def test_infer_non_private(capsys):
    code = main(["infer", "--synthetic", "cubic", "--n-total", "200", "--score", "kendall",
                 "--bandwidth", "0.08", "--lambda", "0.02"])
    out = capsys.readouterr().out
    assert code == 0
    assert "synth-cubic-n200-noise0.3" in out
    assert "non-private decision: x->y" in out


def test_infer_private_test_release(capsys):
    code = main(
        ["infer", "--synthetic", "cubic", "--n-total", "200", "--score", "kendall",
         "--epsilon", "1.0", "--target", "test"]
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "budget:" in out
    assert "private[test]" in out


def test_infer_iqr_abstains_with_exit_code_two(capsys):
    code = main(
        ["infer", "--synthetic", "cubic", "--n-total", "200", "--score", "iqr",
         "--epsilon", "1.0", "--target", "test"]
    )
    out = capsys.readouterr().out
    assert code == 2
    assert "abstain" in out


def test_infer_reads_pairs_files(tmp_path, capsys):
    rng = np.random.default_rng(3)
    x = rng.uniform(-1, 1, 120)
    y = np.clip(x**3 + 0.2 * rng.uniform(-1, 1, 120), -1, 1)
    write_pairs_file(SamplePairs(x, y, id="demo", ground_truth="x->y"), tmp_path / "demo.txt")
    code = main(["infer", "--pairs-dir", str(tmp_path), "--score", "spearman"])
    out = capsys.readouterr().out
    assert code == 0
    assert "demo" in out


def test_missing_data_sources_fail_cleanly(capsys):
    code = main(["infer", "--pairs-dir", "/nonexistent", "--score", "kendall"])
    err = capsys.readouterr().err
    assert code == 1
    assert err.startswith("error:")


def test_sweep_deterministic_bytes(tmp_path, capsys):
    args = ["sweep", "--synthetic", "cubic", "--n-total", "60", "--score", "kendall,hsic",
            "--epsilon", "0.5,2.0", "--trials", "2", "--seed", "5", "--bandwidth", "0.08",
            "--lambda", "0.02"]
    one = tmp_path / "one.csv"
    two = tmp_path / "two.csv"
    assert main(args + ["--out", str(one)]) == 0
    assert main(args + ["--out", str(two), "--jobs", "2"]) == 0
    capsys.readouterr()
    assert one.read_bytes() == two.read_bytes()
    lines = one.read_text().splitlines()
    assert lines[0] == CSV_HEADER
    # 2 scores x 2 epsilons x (2 trials + aggregate)
    assert len(lines) == 1 + 12


def test_sweep_all_abstain_exit_code(tmp_path):
    code = main(
        ["sweep", "--synthetic", "cubic", "--n-total", "60", "--score", "iqr",
         "--epsilon", "1.0", "--trials", "2", "--target", "test",
         "--out", str(tmp_path / "abstain.csv")]
    )
    assert code == 2


def test_private_report_hides_raw_samples(tmp_path, capsys):
    rng = np.random.default_rng(9)
    x = np.round(rng.uniform(-1, 1, 80), 7)
    x[0] = 0.7321415  # distinctive marker value
    y = np.clip(np.tanh(3 * x) + 0.2 * rng.uniform(-1, 1, 80), -1, 1)
    write_pairs_file(SamplePairs(x, y, id="secret"), tmp_path / "secret.txt")
    out_file = tmp_path / "rows.csv"
    code = main(
        ["sweep", "--pairs-dir", str(tmp_path), "--score", "kendall", "--epsilon", "1.0",
         "--trials", "2", "--out", str(out_file)]
    )
    stdout = capsys.readouterr().out
    assert code == 0
    for text in (out_file.read_text(), stdout):
        assert "0.7321415" not in text


def test_verify_utility_command(capsys):
    code = main(["verify-utility", "--gamma", "0.1", "--sigma", "0.1", "--draws", "100000"])
    out = capsys.readouterr().out
    assert code == 0
    assert "pass" in out
    assert main(["verify-utility", "--draws", "100"]) == 1
    assert "error:" in capsys.readouterr().err


def test_verify_sensitivity_command(capsys):
    code = main(
        ["verify-sensitivity", "--m-grid", "10", "--instances", "4", "--grid-points", "9"]
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "ratio" in out


def test_json_format(tmp_path):
    out = tmp_path / "rows.json"
    code = main(
        ["sweep", "--synthetic", "sigmoid", "--n-total", "60", "--score", "spearman",
         "--trials", "1", "--format", "json", "--out", str(out)]
    )
    assert code == 0
    assert out.read_text().lstrip().startswith("[")
