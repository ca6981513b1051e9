"""
Experiment ledger.

Uses SQLite to persist:
- Runs (train / attack / eval / transfer / sweep) with their config fingerprint
- Transfer-report cells
- Sweep points
"""

import os
import json
import sqlite3
import logging
from datetime import datetime
from typing import Optional

from .evaluation import TransferReport
from .sweep import SweepResult

logger = logging.getLogger(__name__)


class ExperimentLedger:
    """SQLite record of every experiment the CLI runs."""

    def __init__(self, db_path: str):
        self.db_path = db_path
        directory = os.path.dirname(db_path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        self._init_schema()

    def _connect(self) -> sqlite3.Connection:
        conn = sqlite3.connect(self.db_path)
        conn.row_factory = sqlite3.Row
        conn.execute("PRAGMA journal_mode=WAL")
        conn.execute("PRAGMA foreign_keys=ON")
        return conn

    def _init_schema(self):
        conn = self._connect()
        conn.executescript("""
            CREATE TABLE IF NOT EXISTS runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                kind TEXT NOT NULL,
                fingerprint TEXT DEFAULT '',
                config_json TEXT DEFAULT '{}',
                started_at TEXT DEFAULT (datetime('now')),
                completed_at TEXT,
                total_items INTEGER DEFAULT 0,
                succeeded INTEGER DEFAULT 0,
                failed INTEGER DEFAULT 0,
                output_path TEXT DEFAULT '',
                status TEXT DEFAULT 'running',
                error TEXT DEFAULT ''
            );

            CREATE INDEX IF NOT EXISTS idx_runs_kind ON runs(kind);
            CREATE INDEX IF NOT EXISTS idx_runs_fingerprint ON runs(fingerprint);

            CREATE TABLE IF NOT EXISTS report_cells (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                run_id INTEGER NOT NULL,
                surrogate TEXT NOT NULL,
                target TEXT NOT NULL,
                success_rate REAL NOT NULL,
                n INTEGER DEFAULT 0,
                white_box INTEGER DEFAULT 0,
                FOREIGN KEY (run_id) REFERENCES runs(id)
            );

            CREATE INDEX IF NOT EXISTS idx_cells_pair ON report_cells(surrogate, target);

            CREATE TABLE IF NOT EXISTS sweep_points (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                run_id INTEGER NOT NULL,
                parameter TEXT NOT NULL,
                value REAL NOT NULL,
                target TEXT NOT NULL,
                success_rate REAL NOT NULL,
                FOREIGN KEY (run_id) REFERENCES runs(id)
            );
        """)
        conn.commit()
        conn.close()

    # ── Runs ────────────────────────────────────────────────────────

    def start_run(self, kind: str, fingerprint: str = "", config: Optional[dict] = None,
                  total_items: int = 0) -> int:
        conn = self._connect()
        conn.execute(
            "INSERT INTO runs (kind, fingerprint, config_json, total_items) VALUES (?, ?, ?, ?)",
            (kind, fingerprint, json.dumps(config or {}, sort_keys=True), total_items),
        )
        run_id = conn.execute("SELECT last_insert_rowid()").fetchone()[0]
        conn.commit()
        conn.close()
        return run_id

    def update_run(self, run_id: int, **kwargs):
        if not kwargs:
            return
        conn = self._connect()
        sets = ", ".join(f"{k} = ?" for k in kwargs)
        conn.execute(
            f"UPDATE runs SET {sets} WHERE id = ?",
            list(kwargs.values()) + [run_id],
        )
        conn.commit()
        conn.close()

    def complete_run(self, run_id: int, **kwargs):
        kwargs["completed_at"] = datetime.now().isoformat()
        kwargs["status"] = kwargs.get("status", "completed")
        self.update_run(run_id, **kwargs)

    def get_runs(self, kind: str = "", limit: int = 50) -> list[dict]:
        conn = self._connect()
        if kind:
            rows = conn.execute(
                "SELECT * FROM runs WHERE kind = ? ORDER BY id DESC LIMIT ?", (kind, limit)
            ).fetchall()
        else:
            rows = conn.execute(
                "SELECT * FROM runs ORDER BY id DESC LIMIT ?", (limit,)
            ).fetchall()
        conn.close()
        return [dict(r) for r in rows]

    # ── Results ─────────────────────────────────────────────────────

    def record_report(self, run_id: int, report: TransferReport):
        conn = self._connect()
        conn.executemany(
            "INSERT INTO report_cells (run_id, surrogate, target, success_rate, n, white_box) "
            "VALUES (?, ?, ?, ?, ?, ?)",
            [(run_id, s, t, rate, n, 1 if wb else 0) for s, t, rate, n, wb in report.cells()],
        )
        conn.commit()
        conn.close()

    def record_sweep(self, run_id: int, result: SweepResult):
        conn = self._connect()
        conn.executemany(
            "INSERT INTO sweep_points (run_id, parameter, value, target, success_rate) "
            "VALUES (?, ?, ?, ?, ?)",
            [(run_id, result.parameter, value, target, result.rates[i][j])
             for i, value in enumerate(result.grid)
             for j, target in enumerate(result.targets)],
        )
        conn.commit()
        conn.close()

    def get_report_cells(self, run_id: int) -> list[dict]:
        conn = self._connect()
        rows = conn.execute(
            "SELECT * FROM report_cells WHERE run_id = ? ORDER BY id", (run_id,)
        ).fetchall()
        conn.close()
        return [dict(r) for r in rows]

    def get_sweep_points(self, run_id: int) -> list[dict]:
        conn = self._connect()
        rows = conn.execute(
            "SELECT * FROM sweep_points WHERE run_id = ? ORDER BY id", (run_id,)
        ).fetchall()
        conn.close()
        return [dict(r) for r in rows]

    # ── Statistics ──────────────────────────────────────────────────

    def get_stats(self) -> dict:
        conn = self._connect()
        total = conn.execute("SELECT COUNT(*) FROM runs").fetchone()[0]
        by_kind = conn.execute(
            "SELECT kind, COUNT(*) as cnt FROM runs GROUP BY kind"
        ).fetchall()
        by_status = conn.execute(
            "SELECT status, COUNT(*) as cnt FROM runs GROUP BY status"
        ).fetchall()
        cells = conn.execute("SELECT COUNT(*) FROM report_cells").fetchone()[0]
        avg_black_box = conn.execute(
            "SELECT COALESCE(AVG(success_rate), 0) FROM report_cells WHERE white_box = 0"
        ).fetchone()[0]
        avg_white_box = conn.execute(
            "SELECT COALESCE(AVG(success_rate), 0) FROM report_cells WHERE white_box = 1"
        ).fetchone()[0]
        sweep_points = conn.execute("SELECT COUNT(*) FROM sweep_points").fetchone()[0]
        fingerprints = conn.execute(
            "SELECT COUNT(DISTINCT fingerprint) FROM runs WHERE fingerprint != ''"
        ).fetchone()[0]
        conn.close()

        return {
            "total_runs": total,
            "by_kind": {r["kind"]: r["cnt"] for r in by_kind},
            "by_status": {r["status"]: r["cnt"] for r in by_status},
            "report_cells": cells,
            "avg_black_box_rate": round(avg_black_box, 2),
            "avg_white_box_rate": round(avg_white_box, 2),
            "sweep_points": sweep_points,
            "distinct_configs": fingerprints,
        }
