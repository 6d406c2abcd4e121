"""Response engine: preprocess, match, select, learn.

The pipeline for one exchange is clean_whitespace -> unescape_html ->
best_match -> threshold check -> select_response, then the user input is
written back to the store so future exchanges can retrieve it.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from typing import Optional

from coursebot.storage import FilterCriteria, Statement, StatementStore, StoreWriteFailure

DEFAULT_THRESHOLD = 0.30
DEFAULT_FALLBACK = "I do not understand yet."


@dataclass(frozen=True)
class EngineConfig:
    similarity_threshold: float = DEFAULT_THRESHOLD
    fallback_response: str = DEFAULT_FALLBACK
    read_only: bool = False
    random_seed: Optional[int] = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.similarity_threshold <= 1.0:
            raise ValueError("similarity_threshold must be in [0, 1]")


@dataclass
class SessionState:
    """Per-conversation state: the bot's last output links learned replies."""

    session_id: str
    last_bot_text: Optional[str] = None
    transcript_length: int = 0


@dataclass(frozen=True)
class ResponseResult:
    text: str
    confidence: float
    matched_prompt: Optional[str]
    is_fallback: bool

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence out of range")
        if (self.confidence == 0.0) != self.is_fallback:
            raise ValueError("confidence is 0 exactly on the fallback path")
        if (self.matched_prompt is None) != self.is_fallback:
            raise ValueError("matched_prompt present exactly when not fallback")


class LearnWriteFailed(StoreWriteFailure):
    """Learn-write was rejected; the computed response is still attached."""

    def __init__(self, result: ResponseResult, detail: str) -> None:
        super().__init__(detail)
        self.result = result


def clean_whitespace(text: str) -> str:
    """Trim and collapse every internal whitespace run to one space."""
    return " ".join(text.split())


_ENTITY_RE = re.compile(r"&(?:(amp|lt|gt|quot|apos)|#(\d+)|#[xX]([0-9A-Fa-f]+));")
_NAMED = {"amp": "&", "lt": "<", "gt": ">", "quot": '"', "apos": "'"}


def unescape_html(text: str) -> str:
    """Decode the five XML entities and numeric character references.

    Single pass; malformed or unknown references are left verbatim.
    """

    def repl(m: re.Match) -> str:
        if m.group(1):
            return _NAMED[m.group(1)]
        code = int(m.group(2)) if m.group(2) else int(m.group(3), 16)
        if code > 0x10FFFF or 0xD800 <= code <= 0xDFFF:
            return m.group(0)
        return chr(code)

    return _ENTITY_RE.sub(repl, text)


def levenshtein(a: str, b: str) -> int:
    """Edit distance over code points, two-row dynamic programming."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost))
        prev = cur
    return prev[-1]


def _fold(text: str) -> str:
    return clean_whitespace(text).lower()


def similarity(a: str, b: str) -> float:
    """1 - distance/max-length over folded text; 1.0 when both fold empty."""
    fa, fb = _fold(a), _fold(b)
    if not fa and not fb:
        return 1.0
    return 1.0 - levenshtein(fa, fb) / max(len(fa), len(fb))


def best_match(input_text: str, store: StatementStore) -> Optional[tuple[str, float]]:
    """Most similar distinct statement text, ties to the lexicographically
    smallest. None iff the store is empty."""
    texts = store.distinct_texts()
    if not texts:
        return None
    best_text = ""
    best_score = -1.0
    for text in sorted(texts):
        score = similarity(input_text, text)
        if score > best_score:
            best_text, best_score = text, score
    return best_text, best_score


def select_response(
    matched_text: str, store: StatementStore, config: EngineConfig
) -> Optional[Statement]:
    """Pick a statement answering matched_text.

    Default ranking over distinct response texts: occurrence count, then most
    recent created_at, then lexicographically smallest. With random_seed set,
    a deterministic uniform draw over the distinct texts instead.
    """
    rows = store.filter_statements(FilterCriteria(in_response_to_equals=matched_text))
    if not rows:
        return None
    groups: dict[str, list[Statement]] = {}
    for row in rows:
        groups.setdefault(row.text, []).append(row)
    texts = sorted(groups)
    if config.random_seed is not None:
        rng = random.Random(f"{config.random_seed}:{matched_text}")
        chosen = rng.choice(texts)
    else:
        # max keeps the first (lex-smallest) text on count/recency ties
        chosen = max(
            texts,
            key=lambda t: (len(groups[t]), max(r.created_at for r in groups[t])),
        )
    return max(groups[chosen], key=lambda r: (r.created_at, r.id))


def get_response(
    session: SessionState,
    raw_input: str,
    store: StatementStore,
    config: EngineConfig,
) -> ResponseResult:
    """Answer one user input and learn from it.

    The learn-write links the input to the bot's previous output in this
    session. If the write fails, LearnWriteFailed is raised with the computed
    result attached and the session left unadvanced.
    """
    text = unescape_html(clean_whitespace(raw_input))
    if not text:
        raise ValueError("input must be non-empty after whitespace cleaning")
    result: Optional[ResponseResult] = None
    match = best_match(text, store)
    if match is not None:
        matched_text, score = match
        # score 0 is never a usable match, even with threshold 0
        if score >= config.similarity_threshold and score > 0.0:
            chosen = select_response(matched_text, store, config)
            if chosen is not None:
                result = ResponseResult(
                    text=chosen.text,
                    confidence=score,
                    matched_prompt=matched_text,
                    is_fallback=False,
                )
    if result is None:
        result = ResponseResult(
            text=config.fallback_response,
            confidence=0.0,
            matched_prompt=None,
            is_fallback=True,
        )
    if not config.read_only:
        try:
            store.add_statement(text, in_response_to=session.last_bot_text, conversation="")
        except StoreWriteFailure as exc:
            raise LearnWriteFailed(result, str(exc)) from exc
    session.last_bot_text = result.text
    session.transcript_length += 2
    return result
