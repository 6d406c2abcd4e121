"""Terminal chat loop: read a line, print "Bot: " plus the response."""

from __future__ import annotations

import sys

from coursebot.engine import EngineConfig, LearnWriteFailed, SessionState, get_response
from coursebot.storage import StatementStore

QUIT_COMMAND = "/quit"


def run_repl(store: StatementStore, config: EngineConfig, input_fn=None, out=None) -> int:
    """Chat until end-of-input or /quit. One persistent session, so each
    reply is learned as an answer to the bot's previous line. Always 0."""
    input_fn = input_fn if input_fn is not None else input
    out = out if out is not None else sys.stdout
    session = SessionState(session_id="terminal")
    while True:
        try:
            line = input_fn("You: ")
        except (EOFError, KeyboardInterrupt):
            print(file=out)
            return 0
        line = line.strip()
        if not line:
            continue
        if line == QUIT_COMMAND:
            return 0
        try:
            result = get_response(session, line, store, config)
        except LearnWriteFailed as exc:
            print(f"Bot: {exc.result.text}", file=out)
            print(f"warning: could not store this exchange: {exc}", file=out)
            continue
        except Exception as exc:
            print(f"error: {exc}", file=out)
            continue
        print(f"Bot: {result.text}", file=out)
