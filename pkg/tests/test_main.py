import json

import pandas as pd
import pytest

from almlab import __version__
from almlab.instances import tangent_problem
from almlab.main import build_parser, main
from almlab.models import problem_to_file


@pytest.fixture
def out_dir(tmp_path, monkeypatch):
    """Output directory with no environment override"""
    monkeypatch.delenv("ALMLAB_OUT_DIR", raising=False)
    return tmp_path / "out"


@pytest.fixture
def solved(toy_file, out_dir, capsys):
    """Toy problem solved into out_dir"""
    assert main(["--run-id", "solve-run", "solve", str(toy_file), "--out-dir", str(out_dir)]) == 0
    capsys.readouterr()
    return out_dir / "summary.json"


def _error_report(stderr: str) -> dict:
    """Last error report line on stderr"""
    reports = [json.loads(line) for line in stderr.splitlines() if line.startswith('{"error"')]
    assert reports
    return reports[-1]


class TestParser:
    """Test argument handling"""

    def test_version(self, capsys):
        """Test --version exits cleanly"""
        assert main(["--version"]) == 0
        assert __version__ in capsys.readouterr().out

    def test_missing_command(self, capsys):
        """Test a missing command is an input error"""
        assert main([]) == 1
        assert "error" in _error_report(capsys.readouterr().err)

    def test_unknown_option(self, capsys):
        """Test unknown options are input errors"""
        assert main(["solve", "p.json", "--bogus"]) == 1

    def test_bad_meshes(self, capsys):
        """Test non-integer meshes are rejected"""
        assert main(["ocp", "--meshes", "7,x"]) == 1

    def test_defaults(self):
        """Test ocp defaults"""
        args = build_parser().parse_args(["ocp"])
        assert args.meshes == [15, 31, 63]
        assert args.constraint == "control"
        assert args.beta is None


class TestSolveCommand:
    """Test the solve command"""

    def test_solve_toy(self, solved):
        """Test summary and trace files"""
        summary = json.loads(solved.read_text())
        assert summary["run_id"] == "solve-run"
        assert summary["solution"]["converged"] is True
        assert summary["solution"]["u_final"][0] == pytest.approx(1.0, abs=1e-8)
        assert summary["multiplier_report"]["lambda_star"] == pytest.approx([-0.2, -0.4], abs=1e-8)
        assert summary["problem"]["set"]["type"] == "singleton"
        trace = pd.read_csv(summary["trace_path"])
        outer = summary["solution"]["outer_iterations"]
        assert summary["trace_rows"] == outer + 1
        assert list(trace["k"]) == list(range(1, outer + 2))

    def test_not_converged(self, toy_file, out_dir, capsys):
        """Test hitting max-outer exits with 2"""
        code = main(["solve", str(toy_file), "--out-dir", str(out_dir), "--max-outer", "3", "--tol-primal", "1e-15"])
        assert code == 2
        summary = json.loads((out_dir / "summary.json").read_text())
        assert summary["solution"]["termination_reason"] == "max_outer"
        assert summary["multiplier_report"] is None

    def test_environment_overrides_out_dir(self, toy_file, tmp_path, monkeypatch, capsys):
        """Test ALMLAB_OUT_DIR wins over --out-dir"""
        monkeypatch.setenv("ALMLAB_OUT_DIR", str(tmp_path / "env"))
        assert main(["solve", str(toy_file), "--out-dir", str(tmp_path / "flag")]) == 0
        assert (tmp_path / "env" / "summary.json").is_file()
        assert not (tmp_path / "flag").exists()

    def test_malformed_json(self, tmp_path, out_dir, capsys):
        """Test syntax errors exit with 1 and report the position"""
        path = tmp_path / "bad.json"
        path.write_text('{"objective": }')
        assert main(["solve", str(path), "--out-dir", str(out_dir)]) == 1
        report = _error_report(capsys.readouterr().err)
        assert report["details"]["line"] == 1
        assert "column" in report["error"]

    def test_missing_file(self, tmp_path, out_dir, capsys):
        """Test absent problem files exit with 1"""
        assert main(["solve", str(tmp_path / "nope.json"), "--out-dir", str(out_dir)]) == 1

    def test_invalid_problem(self, tmp_path, toy_document, out_dir, capsys):
        """Test invariant violations exit with 1"""
        toy_document["objective"]["Q"] = [[-1.0]]
        path = tmp_path / "neg.json"
        path.write_text(json.dumps(toy_document))
        assert main(["solve", str(path), "--out-dir", str(out_dir)]) == 1
        assert "positive definite" in _error_report(capsys.readouterr().err)["error"]

    def test_infeasible_problem(self, tmp_path, out_dir, capsys):
        """Test a stalled residual exits with 2 and keeps the partial trace"""
        document = {
            "objective": {"Q": [[1.0, 0.0], [0.0, 1.0]], "b": [0.0, 0.0]},
            "operator": {"kind": "dense", "matrix": [[1.0, 0.0], [0.0, 0.0]]},
            "set": {"type": "ball", "center": [0.0, 2.0], "radius": 1.0},
        }
        path = tmp_path / "infeasible.json"
        path.write_text(json.dumps(document))
        assert main(["solve", str(path), "--out-dir", str(out_dir)]) == 2
        report = _error_report(capsys.readouterr().err)
        assert "infeasible" in report["error"]
        assert (out_dir / "trace.csv").is_file()

    def test_trace_rows_and_reproducibility(self, tmp_path, monkeypatch, capsys):
        """Test one start row plus one row per outer step, byte-identical for a fixed seed"""
        monkeypatch.delenv("ALMLAB_OUT_DIR", raising=False)
        path = tmp_path / "tangent.json"
        path.write_text(problem_to_file(tangent_problem(1.0)).model_dump_json(by_alias=True), encoding="utf-8")
        traces = []
        for name in ("first", "second"):
            out = tmp_path / name
            args = ["solve", str(path), "--out-dir", str(out), "--max-outer", "300", "--probes", "3", "--seed", "7"]
            assert main(args) == 2
            summary = json.loads((out / "summary.json").read_text())
            assert summary["solution"]["outer_iterations"] == 300
            trace = pd.read_csv(out / "trace.csv")
            assert len(trace) == 301
            assert list(trace["k"]) == list(range(1, 302))
            assert trace["k"].iloc[0] == 1 and trace["inner_iterations"].iloc[0] == 0
            traces.append((out / "trace.csv").read_bytes())
        assert traces[0] == traces[1]


class TestExampleCommand:
    """Test the example command"""

    def test_toy_passes(self, capsys):
        """Test a passing example exits with 0"""
        assert main(["example", "alm-toy"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("example alm-toy")
        assert "verdict: pass" in out

    def test_unknown_example(self, capsys):
        """Test unknown names exit with 1"""
        assert main(["example", "ex9"]) == 1
        assert "Available examples" in _error_report(capsys.readouterr().err)["error"]

    def test_validation_failure(self, capsys):
        """Test invalid parameters exit with 1"""
        assert main(["example", "ex2-k3", "--alpha", "0.4", "--r", "0.25"]) == 1
        report = _error_report(capsys.readouterr().err)
        assert report["error"] == "Validation failed"
        assert report["details"]["field"] == "alpha"


class TestOcpCommand:
    """Test the mesh study command"""

    def test_single_mesh(self, capsys):
        """Test one mesh is not a study"""
        assert main(["ocp", "--meshes", "15"]) == 1

    def test_control_study(self, tmp_path, capsys):
        """Test the study CSV and trend line"""
        out = tmp_path / "study.csv"
        assert main(["ocp", "--meshes", "15,7", "--out", str(out)]) == 0
        assert list(pd.read_csv(out)["n"]) == [7, 15]
        assert "control multiplier norms: bounded" in capsys.readouterr().out


class TestDiagnoseCommand:
    """Test the diagnose command"""

    def test_diagnose_solution(self, solved, capsys):
        """Test the default point is the stored solution"""
        assert main(["diagnose", str(solved), "--candidate", "[-0.2, -0.4]"]) == 0
        report = json.loads((solved.parent / "diagnosis.json").read_text())
        assert report["multiplier_report"]["lambda_star"] == pytest.approx([-0.2, -0.4], abs=1e-8)
        assert report["candidate_analysis"]["passes"] is True
        assert "proper" in capsys.readouterr().out

    def test_other_candidates(self, solved, tmp_path, capsys):
        """Test every point of the multiplier line is proper and others are not"""
        out = tmp_path / "diag.json"
        assert main(["diagnose", str(solved), "--candidate", "[-1.0, 0.0]", "--out", str(out)]) == 0
        analysis = json.loads(out.read_text())["candidate_analysis"]
        assert analysis["restriction_gap"] == pytest.approx(0.0, abs=1e-8)
        assert analysis["passes"] is True
        assert main(["diagnose", str(solved), "--candidate", "[1.0, 0.0]", "--out", str(out)]) == 0
        analysis = json.loads(out.read_text())["candidate_analysis"]
        assert analysis["stationarity"] == pytest.approx(2.0)
        assert analysis["passes"] is False

    def test_infeasible_point(self, solved, capsys):
        """Test infeasible points exit with 1"""
        assert main(["diagnose", str(solved), "--point", "[0.5]"]) == 1

    def test_bad_vector(self, solved, capsys):
        """Test malformed vectors exit with 1"""
        assert main(["diagnose", str(solved), "--candidate", "abc"]) == 1
        assert "JSON vector" in _error_report(capsys.readouterr().err)["error"]

    def test_missing_summary(self, tmp_path, capsys):
        """Test absent summaries exit with 1"""
        assert main(["diagnose", str(tmp_path / "summary.json")]) == 1
