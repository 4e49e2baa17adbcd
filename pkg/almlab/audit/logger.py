import json
import sys
from typing import Optional, Dict, Any
from datetime import datetime, timezone


class AuditLogger:
    """Structured audit logger for solver runs"""

    @staticmethod
    def log(
            run_id: str,
            command: str,
            parameters: Optional[Dict[str, Any]] = None,
            termination: Optional[str] = None,
            outer_iterations: Optional[int] = None,
            latency_ms: Optional[float] = None,
            final_outcome: Optional[str] = None,
            error: Optional[str] = None
    ):

        log_entry = {
            "runId": run_id,
            "timestamp": datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
            "command": command,
        }

        if parameters:
            log_entry["parameters"] = parameters

        if termination:
            log_entry["termination"] = termination

        if outer_iterations is not None:
            log_entry["outerIterations"] = outer_iterations

        if latency_ms is not None:
            log_entry["latencyMs"] = round(latency_ms, 2)

        if final_outcome:
            log_entry["finalOutcome"] = final_outcome

        if error:
            log_entry["error"] = error

        # stdout carries reports
        print(json.dumps(log_entry, default=str), file=sys.stderr)
