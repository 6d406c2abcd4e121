"""Merge learned statements from several database files into one target.

Only rows with a blank conversation field travel; duplicates are dropped by
comparing every field except the id. Sources are opened read-only and never
modified.
"""

from __future__ import annotations

import fcntl
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from coursebot.storage import (
    SqliteStore,
    Statement,
    StatementStore,
    StorageError,
    StoreWriteFailure,
    open_store,
)

logger = logging.getLogger(__name__)

SUPPORTED_EXTENSION = ".sqlite3"


def statement_key(stmt: Statement) -> tuple:
    """Identity of a statement for dedup: every field except the id."""
    return (
        stmt.text,
        stmt.in_response_to,
        stmt.conversation,
        stmt.created_at,
        tuple(sorted(stmt.tags)),
    )


@dataclass
class SourceReport:
    path: str
    scanned: int = 0
    copied: int = 0
    skipped_training: int = 0
    skipped_duplicate: int = 0


@dataclass
class MergeReport:
    target: str
    sources: list[SourceReport] = field(default_factory=list)
    partial: bool = False
    error: Optional[str] = None

    @property
    def total_copied(self) -> int:
        return sum(s.copied for s in self.sources)


def discover_databases(directory: Union[str, Path]) -> list[Path]:
    """Valid .sqlite3 database files directly inside directory, sorted.

    Files that fail to open or lack the expected schema are logged and
    left out.
    """
    directory = Path(directory)
    found = []
    for path in sorted(directory.iterdir()):
        if not path.is_file() or path.suffix != SUPPORTED_EXTENSION:
            continue
        try:
            open_store(path, read_only=True).close()
        except StorageError as exc:
            logger.warning("skipping %s: %s", path, exc)
            continue
        found.append(path)
    return found


def merge_into(target: StatementStore, sources: Sequence[StatementStore]) -> MergeReport:
    """Copy blank-conversation statements from each source into target.

    A row is copied only when no target row already has an equal
    statement_key. A write failure stops the merge; rows copied up to that
    point stay, and the report is marked partial.
    """
    if any(src is target for src in sources):
        raise ValueError("target must not be among the sources")
    seen = {statement_key(s) for s in target.filter_statements()}
    report = MergeReport(target=str(target.path or ":memory:"))
    for source in sources:
        src_report = SourceReport(path=str(source.path or ":memory:"))
        report.sources.append(src_report)
        rows = source.filter_statements()
        src_report.skipped_training = sum(1 for s in rows if s.conversation != "")
        candidates = [s for s in rows if s.conversation == ""]
        for stmt in candidates:
            key = statement_key(stmt)
            if key in seen:
                src_report.scanned += 1
                src_report.skipped_duplicate += 1
                continue
            try:
                target.add_statement(
                    stmt.text,
                    in_response_to=stmt.in_response_to,
                    conversation=stmt.conversation,
                    created_at=stmt.created_at,
                    tags=stmt.tags,
                )
            except StoreWriteFailure as exc:
                report.partial = True
                report.error = str(exc)
                logger.error("merge aborted: %s", exc)
                return report
            seen.add(key)
            src_report.scanned += 1
            src_report.copied += 1
    return report


def format_report(report: MergeReport, fmt: str = "text") -> str:
    if fmt == "json":
        doc = {
            "sources": [asdict(s) for s in report.sources],
            "partial": report.partial,
            "error": report.error,
            "total_copied": report.total_copied,
            "target": report.target,
        }
        return json.dumps(doc, indent=2)
    lines = []
    for s in report.sources:
        lines.append(
            f"{s.path}: scanned {s.scanned} learned statements, copied {s.copied},"
            f" skipped {s.skipped_duplicate} duplicates,"
            f" ignored {s.skipped_training} training rows"
        )
    if report.partial:
        lines.append(f"merge aborted early: {report.error}")
    lines.append(f"merged {report.total_copied} statements into {report.target}")
    return "\n".join(lines)


def _choose_target(paths: list[Path]) -> Optional[Path]:
    print("Databases found:")
    for i, path in enumerate(paths, start=1):
        print(f"  {i}. {path}")
    while True:
        try:
            answer = input(f"Merge into which database? [1-{len(paths)}] ")
        except EOFError:
            return None
        answer = answer.strip()
        if answer.isdigit() and 1 <= int(answer) <= len(paths):
            return paths[int(answer) - 1]
        print(f"Please enter a number between 1 and {len(paths)}.")


def run_merge(
    directory: Union[str, Path] = ".",
    target: Optional[Union[str, Path]] = None,
    assume_yes: bool = False,
    report_format: str = "text",
    out=None,
) -> int:
    """Discover databases in directory and merge all into one chosen target.

    Exit codes: 0 merged, 2 not enough databases, 1 other failure.
    """
    out = out if out is not None else sys.stdout
    directory = Path(directory)
    if not directory.is_dir():
        print(f"error: no such directory: {directory}", file=out)
        return 1
    paths = discover_databases(directory)
    if len(paths) <= 1:
        print(
            f"not enough databases to merge: found {len(paths)} in {directory}"
            f" (supported database type: {SUPPORTED_EXTENSION})",
            file=out,
        )
        return 2
    if target is not None:
        target_path = Path(target)
        if target_path not in paths and target_path.resolve() not in [
            p.resolve() for p in paths
        ]:
            print(f"error: target not found among databases: {target_path}", file=out)
            return 1
        chosen = next(p for p in paths if p.resolve() == target_path.resolve())
    elif assume_yes:
        chosen = paths[0]
    else:
        selected = _choose_target(paths)
        if selected is None:
            print("error: no target selected", file=out)
            return 1
        chosen = selected
    source_paths = [p for p in paths if p != chosen]

    lock_fd = os.open(chosen, os.O_RDWR)
    try:
        fcntl.flock(lock_fd, fcntl.LOCK_EX)
        target_store = SqliteStore(chosen)
        sources = [SqliteStore(p, read_only=True) for p in source_paths]
        try:
            report = merge_into(target_store, sources)
        finally:
            target_store.close()
            for s in sources:
                s.close()
    finally:
        fcntl.flock(lock_fd, fcntl.LOCK_UN)
        os.close(lock_fd)

    print(format_report(report, report_format), file=out)
    return 1 if report.partial else 0
