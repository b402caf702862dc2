"""Read-only query execution over embedded SQLite datasets.

Defense in depth on top of the statement guard: connections are opened in
read-only mode AND an authorizer callback denies every state-changing
operation, counting each attempt. The counter staying at zero across a whole
benchmark run is the observable form of the no-writes guarantee.

Result canonicalization exists so that two statements can be compared by what
they return: reals rounded to six significant digits, column names dropped,
and row order erased unless the caller says order matters.
"""

from __future__ import annotations

import hashlib
import json
import math
import sqlite3
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import quote

from .guard import SanitizationVerdict, sanitize

DEFAULT_ROW_LIMIT = 10_000
DEFAULT_TIMEOUT_MS = 5_000

Value = None | int | float | str | bytes


class UnknownDatasetError(KeyError):
    """Dataset id was never registered with the engine."""


class GuardRejectedError(ValueError):
    """execute() was handed a statement the sanitizer rejects; the engine
    refuses to run it rather than trusting the caller."""

    def __init__(self, verdict: SanitizationVerdict):
        super().__init__("statement rejected by sanitizer")
        self.verdict = verdict


class QueryTimeoutError(RuntimeError):
    """Execution exceeded the configured wall-clock budget."""


class QueryExecutionError(RuntimeError):
    """SQLite reported an error (bad syntax, unknown table, denied op, ...)."""


@dataclass(frozen=True)
class ResultTable:
    columns: tuple[str, ...]
    rows: tuple[tuple[Value, ...], ...]
    row_count: int
    truncated: bool = False

    def __post_init__(self) -> None:
        if self.row_count != len(self.rows):
            raise ValueError("row_count must equal len(rows)")
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError("row width must equal column count")


@dataclass(frozen=True)
class ResultSignature:
    """Canonical text plus its digest; equal digests mean equal canonical forms."""

    digest: str
    canonical_form: str


# SQLite authorizer action codes that change state. Resolved via getattr so a
# build lacking one of the rarer codes does not break import.
_WRITE_ACTIONS = frozenset(
    code
    for code in (
        getattr(sqlite3, name, None)
        for name in (
            "SQLITE_INSERT",
            "SQLITE_UPDATE",
            "SQLITE_DELETE",
            "SQLITE_CREATE_INDEX",
            "SQLITE_CREATE_TABLE",
            "SQLITE_CREATE_TEMP_INDEX",
            "SQLITE_CREATE_TEMP_TABLE",
            "SQLITE_CREATE_TEMP_TRIGGER",
            "SQLITE_CREATE_TEMP_VIEW",
            "SQLITE_CREATE_TRIGGER",
            "SQLITE_CREATE_VIEW",
            "SQLITE_CREATE_VTABLE",
            "SQLITE_DROP_INDEX",
            "SQLITE_DROP_TABLE",
            "SQLITE_DROP_TEMP_INDEX",
            "SQLITE_DROP_TEMP_TABLE",
            "SQLITE_DROP_TEMP_TRIGGER",
            "SQLITE_DROP_TEMP_VIEW",
            "SQLITE_DROP_TRIGGER",
            "SQLITE_DROP_VIEW",
            "SQLITE_DROP_VTABLE",
            "SQLITE_ALTER_TABLE",
            "SQLITE_REINDEX",
            "SQLITE_ANALYZE",
            "SQLITE_ATTACH",
            "SQLITE_DETACH",
            "SQLITE_PRAGMA",
        )
    )
    if code is not None
)


class QueryEngine:
    """Executes sanitized SELECT statements against registered datasets."""

    def __init__(self) -> None:
        self._datasets: dict[str, Path] = {}
        self._lock = threading.Lock()
        self._write_attempts = 0

    @property
    def write_counter(self) -> int:
        """Number of state-changing operations SQLite was asked to authorize.

        Stays 0 as long as only sanitized statements reach execute().
        """
        return self._write_attempts

    def register_dataset(self, dataset_id: str, db_path: str | Path) -> None:
        path = Path(db_path)
        if not path.is_file():
            raise FileNotFoundError(f"database file not found: {path}")
        with self._lock:
            self._datasets[dataset_id] = path

    def known_datasets(self) -> tuple[str, ...]:
        return tuple(sorted(self._datasets))

    def has_dataset(self, dataset_id: str) -> bool:
        return dataset_id in self._datasets

    def db_path(self, dataset_id: str) -> Path:
        try:
            return self._datasets[dataset_id]
        except KeyError:
            raise UnknownDatasetError(dataset_id) from None

    def _authorizer(self, action: int, *_args) -> int:
        if action in _WRITE_ACTIONS:
            with self._lock:
                self._write_attempts += 1
            return sqlite3.SQLITE_DENY
        return sqlite3.SQLITE_OK

    def execute(
        self,
        sql: str,
        dataset_id: str,
        timeout_ms: int = DEFAULT_TIMEOUT_MS,
        row_limit: int = DEFAULT_ROW_LIMIT,
    ) -> ResultTable:
        """Run one read-only statement and materialize up to row_limit rows.

        The sanitizer is re-applied here as a contract check; a rejected
        statement raises GuardRejectedError instead of being executed. One
        connection per call, closed before returning.
        """
        verdict = sanitize(sql)
        if not verdict.allowed:
            raise GuardRejectedError(verdict)
        path = self.db_path(dataset_id)
        if row_limit < 1:
            raise ValueError("row_limit must be positive")

        uri = f"file:{quote(str(path))}?mode=ro"
        deadline = time.monotonic() + timeout_ms / 1000.0
        conn = sqlite3.connect(uri, uri=True)
        try:
            conn.set_authorizer(self._authorizer)
            conn.set_progress_handler(
                lambda: 1 if time.monotonic() > deadline else 0, 5_000
            )
            try:
                cursor = conn.execute(sql)
                rows = cursor.fetchmany(row_limit)
                truncated = cursor.fetchone() is not None
            except sqlite3.OperationalError as exc:
                if "interrupted" in str(exc).lower():
                    raise QueryTimeoutError(
                        f"query exceeded {timeout_ms} ms"
                    ) from exc
                raise QueryExecutionError(str(exc)) from exc
            except sqlite3.DatabaseError as exc:
                raise QueryExecutionError(str(exc)) from exc
            columns = tuple(d[0] for d in cursor.description or ())
            return ResultTable(
                columns=columns,
                rows=tuple(tuple(row) for row in rows),
                row_count=len(rows),
                truncated=truncated,
            )
        finally:
            conn.close()


def _canonical_value(value: Value) -> str:
    if value is None:
        return "null"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        text = format(value, ".6g")
        return "0" if text == "-0" else text
    if isinstance(value, bytes):
        return "0x" + value.hex()
    return json.dumps(value, ensure_ascii=False)


def normalize_result(table: ResultTable, order_sensitive: bool = False) -> ResultSignature:
    """Reduce a result table to a canonical text and digest.

    Column names are dropped; reals are rounded to 6 significant digits; rows
    are sorted unless order_sensitive. Two tables with the same signature are
    considered the same answer.
    """
    rendered = ["[" + ",".join(_canonical_value(v) for v in row) + "]" for row in table.rows]
    if not order_sensitive:
        rendered.sort()
    canonical = "\n".join(rendered)
    digest = hashlib.sha256(canonical.encode("utf-8")).hexdigest()
    return ResultSignature(digest=digest, canonical_form=canonical)


def build_database(db_path: str | Path, schema_sql: list[str], rows: dict[str, list[tuple]]) -> None:
    """Create a SQLite file from CREATE statements and row tuples per table.

    Used by fixture tooling only; the serving path never writes.
    """
    path = Path(db_path)
    if path.exists():
        path.unlink()
    conn = sqlite3.connect(path)
    try:
        for statement in schema_sql:
            conn.execute(statement)
        for table, table_rows in rows.items():
            if not table_rows:
                continue
            placeholders = ",".join("?" for _ in table_rows[0])
            conn.executemany(
                f"INSERT INTO {table} VALUES ({placeholders})", table_rows
            )
        conn.commit()
    finally:
        conn.close()
