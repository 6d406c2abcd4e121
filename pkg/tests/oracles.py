"""Independent reference implementations used to check the package.

Everything here is written from first principles (full-matrix DP, plain
dict scans, raw SQL) and deliberately shares no code with the package
under test.
"""

from __future__ import annotations

import sqlite3


def levenshtein_reference(a: str, b: str) -> int:
    """Full-matrix edit distance, the textbook way."""
    m, n = len(a), len(b)
    d = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        d[i][0] = i
    for j in range(n + 1):
        d[0][j] = j
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            d[i][j] = min(
                d[i - 1][j] + 1,
                d[i][j - 1] + 1,
                d[i - 1][j - 1] + cost,
            )
    return d[m][n]


def similarity_reference(a: str, b: str) -> float:
    """Normalized similarity over whitespace-cleaned, casefolded text."""
    fa = " ".join(a.split()).lower()
    fb = " ".join(b.split()).lower()
    if not fa and not fb:
        return 1.0
    return 1.0 - levenshtein_reference(fa, fb) / max(len(fa), len(fb))


def filter_reference(rows: list[dict], criteria: dict) -> list[dict]:
    """Scan plain dict rows against a criteria dict.

    Criteria keys: text_equals, in_response_to_equals (the string "ABSENT"
    means: no value set), conversation_equals, has_tag, created_before,
    created_after.  Missing keys match everything.
    """
    out = []
    for row in rows:
        if "text_equals" in criteria and row["text"] != criteria["text_equals"]:
            continue
        if "in_response_to_equals" in criteria:
            want = criteria["in_response_to_equals"]
            if want == "ABSENT":
                if row["in_response_to"] is not None:
                    continue
            elif row["in_response_to"] != want:
                continue
        if "conversation_equals" in criteria and row["conversation"] != criteria["conversation_equals"]:
            continue
        if "has_tag" in criteria and criteria["has_tag"] not in row["tags"]:
            continue
        if "created_before" in criteria and row["created_at"] >= criteria["created_before"]:
            continue
        if "created_after" in criteria and row["created_at"] <= criteria["created_after"]:
            continue
        out.append(row)
    return out


def read_keys_sqlite(path, conversation=None):
    """Statement keys (all fields except id) straight from a database file.

    Returns a set of (text, in_response_to, conversation, created_at,
    sorted-tags-tuple), optionally restricted to one conversation value.
    """
    conn = sqlite3.connect(path)
    try:
        rows = conn.execute(
            "SELECT id, text, in_response_to, conversation, created_at FROM statement"
        ).fetchall()
        tag_rows = conn.execute(
            "SELECT st.statement_id, tag.name FROM statement_tag st"
            " JOIN tag ON tag.id = st.tag_id"
        ).fetchall()
    finally:
        conn.close()
    tags = {}
    for sid, name in tag_rows:
        tags.setdefault(sid, []).append(name)
    keys = set()
    for sid, text, irt, conv, created in rows:
        if conversation is not None and conv != conversation:
            continue
        keys.add((text, irt, conv, created, tuple(sorted(tags.get(sid, [])))))
    return keys
