import json
import sys
from unittest.mock import patch
from almlab.audit.logger import AuditLogger


class TestAuditLogger:
    """Test audit logger functionality"""

    def test_log_success(self):
        """Test logging a finished solve"""
        with patch('builtins.print') as mock_print:
            AuditLogger.log(
                run_id="test-id",
                command="solve",
                parameters={"beta": 1.0},
                termination="converged",
                outer_iterations=12,
                latency_ms=123.456,
                final_outcome="success"
            )

            assert mock_print.called
            call_args = mock_print.call_args[0][0]
            log_data = json.loads(call_args)

            assert log_data["runId"] == "test-id"
            assert log_data["command"] == "solve"
            assert log_data["parameters"]["beta"] == 1.0
            assert log_data["termination"] == "converged"
            assert log_data["outerIterations"] == 12
            assert log_data["latencyMs"] == 123.46
            assert log_data["finalOutcome"] == "success"

    def test_log_error(self):
        """Test logging a failed command"""
        with patch('builtins.print') as mock_print:
            AuditLogger.log(
                run_id="test-id",
                command="diagnose",
                final_outcome="error",
                error="summary file not found"
            )

            log_data = json.loads(mock_print.call_args[0][0])

            assert log_data["finalOutcome"] == "error"
            assert log_data["error"] == "summary file not found"
            assert "termination" not in log_data

    def test_log_minimal_fields(self):
        """Test logging with minimal fields"""
        with patch('builtins.print') as mock_print:
            AuditLogger.log(
                run_id="test-id",
                command="example"
            )

            log_data = json.loads(mock_print.call_args[0][0])

            assert log_data["runId"] == "test-id"
            assert log_data["command"] == "example"
            assert log_data["timestamp"].endswith("Z")
            assert "outerIterations" not in log_data

    def test_zero_iterations_kept(self):
        """Test a zero iteration count is still logged"""
        with patch('builtins.print') as mock_print:
            AuditLogger.log(run_id="test-id", command="ocp-mesh", outer_iterations=0)

            assert json.loads(mock_print.call_args[0][0])["outerIterations"] == 0

    def test_writes_to_stderr(self):
        """Test log lines do not go to stdout"""
        with patch('builtins.print') as mock_print:
            AuditLogger.log(run_id="test-id", command="solve")

            assert mock_print.call_args[1]["file"] is sys.stderr
