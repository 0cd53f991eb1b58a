"""SQLite ledger of CLI runs."""

from __future__ import annotations

import csv
import io
import json
import sqlite3
from pathlib import Path
from typing import Any

from .config import get_config

SCHEMA = """
CREATE TABLE IF NOT EXISTS runs (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    timestamp TEXT DEFAULT (datetime('now')),
    subcommand TEXT NOT NULL,
    exit_code INTEGER DEFAULT 0,
    elapsed_ms INTEGER DEFAULT 0,
    manifest_path TEXT,
    lines_in INTEGER DEFAULT 0,
    lines_out INTEGER DEFAULT 0
);

CREATE INDEX IF NOT EXISTS idx_runs_timestamp ON runs(timestamp);
CREATE INDEX IF NOT EXISTS idx_runs_subcommand ON runs(subcommand);
"""


class RunHistory:
    """Records one row per CLI invocation."""

    def __init__(self, db_path: Path | None = None):
        self.db_path = db_path or get_config().database_path
        self._ensure_db()

    def _ensure_db(self) -> None:
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        with sqlite3.connect(self.db_path) as conn:
            conn.executescript(SCHEMA)

    def _time_filter(self, days: int) -> tuple[str, list[Any]]:
        """WHERE clause restricting to the last `days` days (0 = all time)."""
        if days > 0:
            return "WHERE timestamp >= datetime('now', ?)", [f"-{days} days"]
        return "", []

    def record(
        self,
        subcommand: str,
        exit_code: int = 0,
        elapsed_ms: int = 0,
        manifest_path: str | None = None,
        lines_in: int = 0,
        lines_out: int = 0,
    ) -> int:
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.execute(
                """
                INSERT INTO runs
                (subcommand, exit_code, elapsed_ms, manifest_path, lines_in, lines_out)
                VALUES (?, ?, ?, ?, ?, ?)
                """,
                (subcommand, exit_code, elapsed_ms, manifest_path, lines_in, lines_out),
            )
            return cursor.lastrowid or 0

    def get_summary(self, days: int = 0) -> dict[str, Any]:
        with sqlite3.connect(self.db_path) as conn:
            conn.row_factory = sqlite3.Row
            where, params = self._time_filter(days)
            row = conn.execute(
                f"""
                SELECT
                    COUNT(*) as total_runs,
                    SUM(CASE WHEN exit_code = 0 THEN 1 ELSE 0 END) as succeeded,
                    SUM(elapsed_ms) as total_ms,
                    SUM(lines_in) as lines_in,
                    SUM(lines_out) as lines_out
                FROM runs
                {where}
                """,
                params,
            ).fetchone()

            total = row["total_runs"] or 0
            succeeded = row["succeeded"] or 0
            return {
                "total_runs": total,
                "succeeded": succeeded,
                "failed": total - succeeded,
                "total_elapsed_ms": row["total_ms"] or 0,
                "lines_in": row["lines_in"] or 0,
                "lines_out": row["lines_out"] or 0,
            }

    def get_history(
        self, limit: int = 50, subcommand: str | None = None
    ) -> list[dict[str, Any]]:
        with sqlite3.connect(self.db_path) as conn:
            conn.row_factory = sqlite3.Row
            where = ""
            params: list[Any] = []
            if subcommand:
                where = "WHERE subcommand = ?"
                params = [subcommand]
            rows = conn.execute(
                f"""
                SELECT * FROM runs
                {where}
                ORDER BY id DESC
                LIMIT ?
                """,
                params + [limit],
            ).fetchall()
            return [dict(row) for row in rows]

    def get_by_subcommand(self, days: int = 0) -> dict[str, dict[str, Any]]:
        with sqlite3.connect(self.db_path) as conn:
            conn.row_factory = sqlite3.Row
            where, params = self._time_filter(days)
            rows = conn.execute(
                f"""
                SELECT
                    subcommand,
                    COUNT(*) as runs,
                    SUM(CASE WHEN exit_code != 0 THEN 1 ELSE 0 END) as failures,
                    AVG(elapsed_ms) as avg_ms,
                    SUM(lines_out) as lines_out
                FROM runs
                {where}
                GROUP BY subcommand
                ORDER BY runs DESC, subcommand
                """,
                params,
            ).fetchall()
            return {
                row["subcommand"]: {
                    "runs": row["runs"],
                    "failures": row["failures"] or 0,
                    "avg_ms": round(row["avg_ms"] or 0),
                    "lines_out": row["lines_out"] or 0,
                }
                for row in rows
            }

    def export(self, format: str = "json", output_path: Path | None = None) -> str:
        history = self.get_history(limit=10000)
        if format == "json":
            data = json.dumps(history, indent=2, default=str)
        else:
            output = io.StringIO()
            if history:
                writer = csv.DictWriter(output, fieldnames=list(history[0].keys()))
                writer.writeheader()
                writer.writerows(history)
            data = output.getvalue()
        if output_path:
            output_path.write_text(data)
        return data

    def clear(self, older_than_days: int = 0) -> int:
        with sqlite3.connect(self.db_path) as conn:
            if older_than_days > 0:
                cursor = conn.execute(
                    "DELETE FROM runs WHERE timestamp < datetime('now', ?)",
                    [f"-{older_than_days} days"],
                )
            else:
                cursor = conn.execute("DELETE FROM runs")
            return cursor.rowcount


_history: RunHistory | None = None


def get_history() -> RunHistory:
    """Get the global run-history instance."""
    global _history
    if _history is None:
        _history = RunHistory()
    return _history


def reset_history() -> None:
    global _history
    _history = None
