"""Statement persistence in the three-table schema (statement, tag, statement_tag).

Two interchangeable backends implement :class:`StatementStore`: a pure-Python
in-memory store and a single-file SQLite store.  Both assign ids monotonically
from 1 and are safe to share between threads (reads and writes are serialized
internally; writers never interleave).
"""

from __future__ import annotations

import sqlite3
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Union


class StorageError(Exception):
    """Base class for storage failures."""


class SchemaMismatch(StorageError):
    """File is a SQLite database but does not contain the expected tables."""


class CorruptFile(StorageError):
    """File exists but cannot be read as a SQLite database."""


class StoreWriteFailure(StorageError):
    """The persistence layer rejected a write."""


def utcnow_iso() -> str:
    """Current UTC time as ISO-8601 text with seconds precision."""
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class Statement:
    """One stored utterance: a node of the response graph.

    ``in_response_to`` holds the prompt text this statement answers (None for
    conversation starters).  ``conversation`` is "training" for trainer-inserted
    rows and "" for live-learned rows.
    """

    id: int
    text: str
    in_response_to: Optional[str]
    conversation: str
    created_at: str
    tags: frozenset[str] = field(default_factory=frozenset)


class _AbsentType:
    """Sentinel: filter for rows where the field has no value."""

    def __repr__(self) -> str:  # pragma: no cover
        return "ABSENT"


ABSENT = _AbsentType()

# in_response_to criterion: None = not set, ABSENT = match rows with no value.
_IrtCriterion = Union[str, None, _AbsentType]


@dataclass(frozen=True)
class FilterCriteria:
    """Conjunctive statement query. Unset fields match everything.

    ``created_before``/``created_after`` compare strictly against the stored
    ISO-8601 text, which orders chronologically.
    """

    text_equals: Optional[str] = None
    in_response_to_equals: _IrtCriterion = None
    conversation_equals: Optional[str] = None
    has_tag: Optional[str] = None
    created_before: Optional[str] = None
    created_after: Optional[str] = None

    def matches(self, stmt: Statement) -> bool:
        if self.text_equals is not None and stmt.text != self.text_equals:
            return False
        if self.in_response_to_equals is not None:
            if isinstance(self.in_response_to_equals, _AbsentType):
                if stmt.in_response_to is not None:
                    return False
            elif stmt.in_response_to != self.in_response_to_equals:
                return False
        if self.conversation_equals is not None and stmt.conversation != self.conversation_equals:
            return False
        if self.has_tag is not None and self.has_tag not in stmt.tags:
            return False
        if self.created_before is not None and not stmt.created_at < self.created_before:
            return False
        if self.created_after is not None and not stmt.created_at > self.created_after:
            return False
        return True


class StatementStore:
    """Interface both backends implement. Ids start at 1 and are never reused."""

    path: Optional[Path] = None

    def add_statement(
        self,
        text: str,
        in_response_to: Optional[str] = None,
        conversation: str = "",
        created_at: Optional[str] = None,
        tags: Iterable[str] = (),
    ) -> int:
        raise NotImplementedError

    def filter_statements(self, criteria: Optional[FilterCriteria] = None) -> list[Statement]:
        raise NotImplementedError

    def count_statements(self) -> int:
        raise NotImplementedError

    def distinct_texts(self) -> set[str]:
        raise NotImplementedError

    def close(self) -> None:
        pass


class MemoryStore(StatementStore):
    """Volatile store backed by a plain list."""

    def __init__(self) -> None:
        self._rows: list[Statement] = []
        self._next_id = 1
        self._lock = threading.RLock()

    def add_statement(self, text, in_response_to=None, conversation="", created_at=None, tags=()):
        if not text:
            raise ValueError("statement text must be non-empty")
        with self._lock:
            stmt = Statement(
                id=self._next_id,
                text=text,
                in_response_to=in_response_to,
                conversation=conversation,
                created_at=created_at or utcnow_iso(),
                tags=frozenset(tags),
            )
            self._rows.append(stmt)
            self._next_id += 1
            return stmt.id

    def filter_statements(self, criteria=None):
        with self._lock:
            if criteria is None:
                return list(self._rows)
            return [s for s in self._rows if criteria.matches(s)]

    def count_statements(self):
        with self._lock:
            return len(self._rows)

    def distinct_texts(self):
        with self._lock:
            return {s.text for s in self._rows}


_SCHEMA = """
CREATE TABLE statement (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    text TEXT NOT NULL,
    in_response_to TEXT,
    conversation TEXT NOT NULL DEFAULT '',
    created_at TEXT NOT NULL
);
CREATE TABLE tag (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    name TEXT NOT NULL UNIQUE
);
CREATE TABLE statement_tag (
    statement_id INTEGER NOT NULL REFERENCES statement(id),
    tag_id INTEGER NOT NULL REFERENCES tag(id),
    PRIMARY KEY (statement_id, tag_id)
);
"""

_REQUIRED_TABLES = {"statement", "tag", "statement_tag"}


class SqliteStore(StatementStore):
    """Single-file SQLite store (.sqlite3).

    Each add_statement is one committed transaction, so a crash mid-write
    leaves the file openable.  All access goes through one connection guarded
    by a lock.
    """

    def __init__(self, path: Union[str, Path], read_only: bool = False) -> None:
        self.path = Path(path)
        self.read_only = read_only
        self._lock = threading.RLock()
        existed = self.path.exists()
        if read_only and not existed:
            raise CorruptFile(f"{self.path}: no such database file")
        if read_only:
            self._conn = sqlite3.connect(
                f"file:{self.path}?mode=ro", uri=True, check_same_thread=False
            )
        else:
            self._conn = sqlite3.connect(self.path, check_same_thread=False)
        try:
            if existed:
                self._validate_schema()
            else:
                self._conn.executescript(_SCHEMA)
                self._conn.commit()
        except StorageError:
            self._conn.close()
            raise
        # Crash still leaves a consistent journal; skip the second fsync.
        self._conn.execute("PRAGMA synchronous=NORMAL")

    def _validate_schema(self) -> None:
        try:
            rows = self._conn.execute(
                "SELECT name FROM sqlite_master WHERE type = 'table'"
            ).fetchall()
        except sqlite3.DatabaseError as exc:
            raise CorruptFile(f"{self.path}: {exc}") from exc
        names = {r[0] for r in rows}
        missing = _REQUIRED_TABLES - names
        if missing:
            raise SchemaMismatch(f"{self.path}: missing tables {sorted(missing)}")

    def add_statement(self, text, in_response_to=None, conversation="", created_at=None, tags=()):
        if not text:
            raise ValueError("statement text must be non-empty")
        with self._lock:
            try:
                cur = self._conn.execute(
                    "INSERT INTO statement (text, in_response_to, conversation, created_at)"
                    " VALUES (?, ?, ?, ?)",
                    (text, in_response_to, conversation, created_at or utcnow_iso()),
                )
                statement_id = cur.lastrowid
                for name in sorted(set(tags)):
                    self._conn.execute("INSERT OR IGNORE INTO tag (name) VALUES (?)", (name,))
                    tag_id = self._conn.execute(
                        "SELECT id FROM tag WHERE name = ?", (name,)
                    ).fetchone()[0]
                    self._conn.execute(
                        "INSERT INTO statement_tag (statement_id, tag_id) VALUES (?, ?)",
                        (statement_id, tag_id),
                    )
                self._conn.commit()
            except sqlite3.Error as exc:
                self._conn.rollback()
                raise StoreWriteFailure(f"{self.path}: {exc}") from exc
            return statement_id

    def _tag_map(self) -> dict[int, set[str]]:
        rows = self._conn.execute(
            "SELECT st.statement_id, tag.name FROM statement_tag st"
            " JOIN tag ON tag.id = st.tag_id"
        ).fetchall()
        out: dict[int, set[str]] = {}
        for statement_id, name in rows:
            out.setdefault(statement_id, set()).add(name)
        return out

    def filter_statements(self, criteria=None):
        where = []
        params: list = []
        if criteria is not None:
            if criteria.text_equals is not None:
                where.append("s.text = ?")
                params.append(criteria.text_equals)
            if criteria.in_response_to_equals is not None:
                if isinstance(criteria.in_response_to_equals, _AbsentType):
                    where.append("s.in_response_to IS NULL")
                else:
                    where.append("s.in_response_to = ?")
                    params.append(criteria.in_response_to_equals)
            if criteria.conversation_equals is not None:
                where.append("s.conversation = ?")
                params.append(criteria.conversation_equals)
            if criteria.has_tag is not None:
                where.append(
                    "EXISTS (SELECT 1 FROM statement_tag st JOIN tag ON tag.id = st.tag_id"
                    " WHERE st.statement_id = s.id AND tag.name = ?)"
                )
                params.append(criteria.has_tag)
            if criteria.created_before is not None:
                where.append("s.created_at < ?")
                params.append(criteria.created_before)
            if criteria.created_after is not None:
                where.append("s.created_at > ?")
                params.append(criteria.created_after)
        sql = "SELECT s.id, s.text, s.in_response_to, s.conversation, s.created_at FROM statement s"
        if where:
            sql += " WHERE " + " AND ".join(where)
        sql += " ORDER BY s.id"
        with self._lock:
            rows = self._conn.execute(sql, params).fetchall()
            tags = self._tag_map()
        return [
            Statement(
                id=r[0],
                text=r[1],
                in_response_to=r[2],
                conversation=r[3],
                created_at=r[4],
                tags=frozenset(tags.get(r[0], ())),
            )
            for r in rows
        ]

    def count_statements(self):
        with self._lock:
            return self._conn.execute("SELECT COUNT(*) FROM statement").fetchone()[0]

    def distinct_texts(self):
        with self._lock:
            rows = self._conn.execute("SELECT DISTINCT text FROM statement").fetchall()
        return {r[0] for r in rows}

    def close(self):
        with self._lock:
            self._conn.close()


MEMORY = ":memory:"


def open_store(location: Union[str, Path, None] = None, read_only: bool = False) -> StatementStore:
    """Open (or create) a statement store.

    ``location`` of None or ":memory:" yields an in-memory store; anything else
    is treated as a path to a single-file SQLite database, created with the
    three-table schema if it does not exist yet.

    Raises CorruptFile if the file is unreadable as SQLite, SchemaMismatch if
    it is a database without the expected tables.
    """
    if location is None or str(location) == MEMORY:
        return MemoryStore()
    return SqliteStore(Path(location), read_only=read_only)
