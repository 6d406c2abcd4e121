"""Command line entry point: train, merge, scrape, serve, repl."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from coursebot.engine import DEFAULT_FALLBACK, DEFAULT_THRESHOLD, EngineConfig
from coursebot.merge import run_merge
from coursebot.repl import run_repl
from coursebot.scraper import load_templates, run_scrape
from coursebot.service import build_service_config, serve
from coursebot.storage import StorageError, open_store
from coursebot.training import train_corpus


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coursebot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="load corpus files into a database")
    train.add_argument("paths", nargs="+", metavar="PATH", help="corpus file or directory")
    train.add_argument("--db", default=":memory:", help="database file (default: in-memory)")
    train.add_argument("--dedupe", action="store_true", help="skip already-trained rows")

    merge = sub.add_parser("merge", help="merge learned statements between databases")
    merge.add_argument("dir", nargs="?", default=".", metavar="DIR")
    merge.add_argument("--target", help="merge into this database instead of asking")
    merge.add_argument("--yes", action="store_true", help="no prompt; default to the first database")
    merge.add_argument("--report", choices=("text", "json"), default="text")

    scrape = sub.add_parser("scrape", help="turn web pages into corpus files")
    scrape.add_argument("urls", nargs="+", metavar="URL")
    scrape.add_argument("--cookie", help="Cookie header value for protected pages")
    scrape.add_argument("--out", default=".", help="output directory")
    scrape.add_argument("--depth", type=int, choices=(0, 1), default=0)
    scrape.add_argument("--templates", help="file with one question template per line")
    scrape.add_argument("--delay", type=float, default=0.5, help="seconds between requests")
    scrape.add_argument("--force", action="store_true", help="accept non-HTML content types")

    serve_cmd = sub.add_parser("serve", help="run the HTTP chat service")
    serve_cmd.add_argument("--config", help="config file (key = value lines)")
    serve_cmd.add_argument("--host")
    serve_cmd.add_argument("--port", type=int)
    serve_cmd.add_argument("--db")
    serve_cmd.add_argument("--read-only", action="store_const", const=True, default=None)
    serve_cmd.add_argument("--threshold", type=float)
    serve_cmd.add_argument("--fallback")
    serve_cmd.add_argument("--seed", type=int)

    repl = sub.add_parser("repl", help="chat in the terminal")
    repl.add_argument("--db", default=":memory:")
    repl.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    repl.add_argument("--fallback", default=DEFAULT_FALLBACK)
    repl.add_argument("--seed", type=int)
    repl.add_argument("--read-only", action="store_true")

    return parser


def _cmd_train(args) -> int:
    store = open_store(args.db)
    try:
        total_files = total_conversations = total_statements = 0
        failures = []
        for path in args.paths:
            stats = train_corpus(store, path, dedupe=args.dedupe)
            total_files += stats.files
            total_conversations += stats.conversations
            total_statements += stats.statements
            failures.extend(stats.failures)
        print(
            f"trained {total_statements} statements"
            f" from {total_conversations} conversations in {total_files} files"
        )
        for path, reason in failures:
            print(f"failed: {path}: {reason}", file=sys.stderr)
        return 0 if not failures else 1
    finally:
        store.close()


def _cmd_serve(args) -> int:
    config = build_service_config(
        args.config,
        host=args.host,
        port=args.port,
        db=args.db,
        read_only=args.read_only,
        similarity_threshold=args.threshold,
        fallback_response=args.fallback,
        random_seed=args.seed,
    )
    serve(config)
    return 0


def _cmd_repl(args) -> int:
    store = open_store(args.db, read_only=args.read_only)
    config = EngineConfig(
        similarity_threshold=args.threshold,
        fallback_response=args.fallback,
        read_only=args.read_only,
        random_seed=args.seed,
    )
    try:
        return run_repl(store, config)
    finally:
        store.close()


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING)
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "merge":
            return run_merge(
                args.dir, target=args.target, assume_yes=args.yes, report_format=args.report
            )
        if args.command == "scrape":
            templates = load_templates(args.templates) if args.templates else None
            return run_scrape(
                args.urls,
                cookie=args.cookie,
                out_dir=args.out,
                depth=args.depth,
                templates=templates,
                delay=args.delay,
                force=args.force,
            )
        if args.command == "serve":
            return _cmd_serve(args)
        if args.command == "repl":
            return _cmd_repl(args)
    except (StorageError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
