"""Corpus parsing/serialization and trainers.

A corpus file is a YAML mapping with `categories:` (list of tag names) and
`conversations:` (list of lists of utterances). Training inserts each
conversation as a chain: every utterance answers the one before it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import yaml

from coursebot.engine import clean_whitespace
from coursebot.storage import FilterCriteria, StatementStore

logger = logging.getLogger(__name__)


class EmptyUtterance(ValueError):
    """A training text was empty after whitespace cleaning."""


class MalformedCorpus(ValueError):
    def __init__(self, reason: str, line: Optional[int] = None) -> None:
        suffix = f" (line {line})" if line is not None else ""
        super().__init__(f"{reason}{suffix}")
        self.reason = reason
        self.line = line


@dataclass(frozen=True)
class Corpus:
    categories: tuple[str, ...]
    conversations: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        # categories behave as an ordered set
        seen: dict[str, None] = {}
        for name in self.categories:
            seen.setdefault(name)
        object.__setattr__(self, "categories", tuple(seen))
        object.__setattr__(
            self, "conversations", tuple(tuple(c) for c in self.conversations)
        )


def parse_corpus(data: bytes) -> Corpus:
    """Parse corpus file bytes. Utterances are kept verbatim.

    Raises MalformedCorpus for YAML errors (with a line number when the
    parser provides one), missing keys, or wrong shapes.
    """
    try:
        doc = yaml.safe_load(data)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise MalformedCorpus(f"invalid YAML: {exc}", line) from exc
    if not isinstance(doc, dict):
        raise MalformedCorpus("corpus must be a mapping")
    for key in ("categories", "conversations"):
        if key not in doc:
            raise MalformedCorpus(f"missing key: {key}")
    categories = doc["categories"]
    conversations = doc["conversations"]
    if not isinstance(categories, list) or not all(isinstance(c, str) for c in categories):
        raise MalformedCorpus("categories must be a sequence of strings")
    if not isinstance(conversations, list):
        raise MalformedCorpus("conversations must be a sequence")
    parsed: list[tuple[str, ...]] = []
    for i, conv in enumerate(conversations):
        if not isinstance(conv, list) or not conv:
            raise MalformedCorpus(f"conversation {i} must be a non-empty sequence")
        for utterance in conv:
            if not isinstance(utterance, str):
                raise MalformedCorpus(f"conversation {i} holds a non-string utterance")
            if not clean_whitespace(utterance):
                raise MalformedCorpus(f"conversation {i} holds an empty utterance")
        parsed.append(tuple(conv))
    return Corpus(categories=tuple(categories), conversations=tuple(parsed))


def serialize_corpus(corpus: Corpus) -> bytes:
    """Emit corpus file bytes such that parse_corpus inverts this exactly."""
    doc = {
        "categories": list(corpus.categories),
        "conversations": [list(c) for c in corpus.conversations],
    }
    return yaml.safe_dump(
        doc, allow_unicode=True, sort_keys=False, default_flow_style=False
    ).encode("utf-8")


def _training_keys(store: StatementStore) -> set[tuple]:
    rows = store.filter_statements(FilterCriteria(conversation_equals="training"))
    return {(s.text, s.in_response_to, tuple(sorted(s.tags))) for s in rows}


def train_list(
    store: StatementStore,
    texts: Sequence[str],
    tags: Iterable[str] = (),
    dedupe: bool = False,
) -> int:
    """Insert one conversation: texts[i] answers texts[i-1].

    All texts are validated before anything is written. With dedupe, rows
    whose (text, in_response_to, tags) already exist as training rows are
    skipped. Returns the number of utterances processed.
    """
    cleaned = [clean_whitespace(t) for t in texts]
    for raw, text in zip(texts, cleaned):
        if not text:
            raise EmptyUtterance(f"empty utterance: {raw!r}")
    tags = tuple(tags)
    existing = _training_keys(store) if dedupe else set()
    prev: Optional[str] = None
    for text in cleaned:
        key = (text, prev, tuple(sorted(set(tags))))
        if not (dedupe and key in existing):
            store.add_statement(text, in_response_to=prev, conversation="training", tags=tags)
            existing.add(key)
        prev = text
    return len(cleaned)


@dataclass
class TrainingStats:
    files: int = 0
    conversations: int = 0
    statements: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)


def train_corpus(
    store: StatementStore, path: Union[str, Path], dedupe: bool = False
) -> TrainingStats:
    """Train every corpus file under path (a file, or a directory scanned
    non-recursively for *.yml / *.yaml in lexicographic order).

    A malformed or empty file is reported in stats.failures and skipped;
    the remaining files still train. Each file's categories become tags on
    all statements trained from it.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such corpus path: {path}")
    if path.is_dir():
        files = sorted(
            p for p in path.iterdir() if p.is_file() and p.suffix in (".yml", ".yaml")
        )
    else:
        files = [path]
    stats = TrainingStats()
    for file in files:
        try:
            corpus = parse_corpus(file.read_bytes())
        except MalformedCorpus as exc:
            logger.warning("skipping %s: %s", file, exc)
            stats.failures.append((str(file), str(exc)))
            continue
        if not corpus.conversations:
            logger.warning("skipping %s: no conversations", file)
            stats.failures.append((str(file), "no conversations"))
            continue
        for conv in corpus.conversations:
            stats.statements += train_list(store, conv, tags=corpus.categories, dedupe=dedupe)
            stats.conversations += 1
        stats.files += 1
    return stats
