import numpy as np
import pytest

from repalign.cli import main
from repalign.formats import write_kernel
from repalign.domain import SimilarityMatrix, synthetic_scores
from repalign.kernels import score_kernel


@pytest.fixture(scope="module")
def demo(tmp_path_factory):
    out = tmp_path_factory.mktemp("demo")
    assert main(["demo-data", "--out", str(out), "--models", "3"]) == 0
    return out


def test_help_documents_flags(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["synthetic", "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for flag in ("--agent", "--runs", "--seed", "--jobs", "--out"):
        assert flag in text


def test_unknown_flag_exit_one(capsys):
    assert main(["synthetic", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err
    assert main([]) == 1


def test_theory_check(capsys):
    assert main(["theory-check", "--specs", "500", "--trials", "20000"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "7/7 passed" in out


def test_align_self(tmp_path, capsys, demo):
    assert main(["align", str(demo / "human_kernel.csv"), str(demo / "human_kernel.csv")]) == 0
    out = capsys.readouterr().out
    assert "full\t1.000000" in out


def test_align_undefined(tmp_path, capsys, demo):
    write_kernel(tmp_path / "ones.csv", SimilarityMatrix(np.ones((50, 50))))
    assert main(["align", str(tmp_path / "ones.csv"), str(demo / "human_kernel.csv")]) == 0
    assert "full\tundefined" in capsys.readouterr().out


def test_validation_errors_exit_one(tmp_path, demo):
    (tmp_path / "bad.csv").write_text("0,1\n1,0.5\n")
    assert main(["align", str(tmp_path / "bad.csv"), str(demo / "human_kernel.csv")]) == 1
    assert main(["align", str(tmp_path / "missing.csv"), str(tmp_path / "bad.csv")]) == 1
    assert main(["synthetic", "--runs", "0", "--out", str(tmp_path)]) == 1
    assert main(["human-values", "--value", "nope", "--scores", str(demo / "scores.csv"),
                 "--kernels-dir", str(demo / "kernels"), "--human-kernel",
                 str(demo / "human_kernel.csv"), "--out", str(tmp_path)]) == 1


def test_synthetic_deterministic(tmp_path):
    args = ["synthetic", "--agent", "svr", "--runs", "12", "--seed", "7",
            "--max-steps", "60", "--permutations", "100"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
    for name in ("runs.csv", "summary.csv", "binned.tsv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_human_values(tmp_path, demo):
    code = main(["human-values", "--value", "morality", "--value", "honesty",
                 "--scores", str(demo / "scores.csv"), "--kernels-dir", str(demo / "kernels"),
                 "--human-kernel", str(demo / "human_kernel.csv"), "--runs", "2",
                 "--max-steps", "30", "--permutations", "50", "--out", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "runs.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 3 * 2 * 2


def test_interpolate_and_control(tmp_path, demo):
    assert main(["interpolate", "--steps", "3", "--runs", "2", "--max-steps", "30",
                 "--permutations", "50", "--out", str(tmp_path / "i")]) == 0
    assert len((tmp_path / "i" / "runs.csv").read_text().splitlines()) == 1 + 3 * 2 * 2
    assert main(["interpolate", "--base", str(demo / "human_kernel.csv")]) == 1
    assert main(["control", "--runs", "2", "--max-steps", "30", "--permutations", "50",
                 "--human-kernel", str(demo / "human_kernel.csv"),
                 "--scores", str(demo / "scores.csv"), "--value", "morality",
                 "--out", str(tmp_path / "c")]) == 0
    assert len((tmp_path / "c" / "runs.csv").read_text().splitlines()) == 1 + 2 * 3 * 2 * 2


def test_runtime_failure_exit_two(tmp_path, monkeypatch):
    import repalign.cli as cli

    def boom(*args, **kwargs):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(cli, "run_theory_checks", boom)
    assert main(["theory-check"]) == 2
