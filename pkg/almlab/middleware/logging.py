import argparse
import json
import sys
import time
import uuid
from typing import Any, Callable, Dict

PREVIEW_LIMIT = 200

# Namespace entries that are plumbing, not parameters
INTERNAL_OPTIONS = {
    "handler",
    "func",
}


class CommandLoggingMiddleware:
    """Wraps a CLI command handler and logs command and result metadata"""

    def __init__(self, handler: Callable[[argparse.Namespace, str], int]):
        self.handler = handler

    def __call__(self, args: argparse.Namespace) -> int:
        run_id = getattr(args, "run_id", None) or str(uuid.uuid4())

        start_time = time.time()
        self._log_command(args, run_id)

        exit_code = self.handler(args, run_id)

        latency_ms = (time.time() - start_time) * 1000
        self._log_result(args, run_id, exit_code, latency_ms)

        return exit_code

    @staticmethod
    def _sanitize(args: argparse.Namespace) -> Dict[str, Any]:
        sanitized = {}
        for key, value in vars(args).items():
            if key in INTERNAL_OPTIONS:
                continue
            text = str(value)
            sanitized[key] = text[:PREVIEW_LIMIT] if len(text) > PREVIEW_LIMIT else value
        return sanitized

    @classmethod
    def _log_command(cls, args: argparse.Namespace, run_id: str):
        """Log inbound command metadata"""
        log_entry = {
            "type": "command",
            "runId": run_id,
            "command": getattr(args, "command", None),
            "arguments": cls._sanitize(args),
        }

        print(json.dumps(log_entry, default=str), file=sys.stderr)

    @staticmethod
    def _log_result(args: argparse.Namespace, run_id: str, exit_code: int, latency_ms: float):
        """Log command outcome metadata"""
        log_entry = {
            "type": "result",
            "runId": run_id,
            "command": getattr(args, "command", None),
            "exitCode": exit_code,
            "latencyMs": round(latency_ms, 2),
        }

        print(json.dumps(log_entry), file=sys.stderr)
