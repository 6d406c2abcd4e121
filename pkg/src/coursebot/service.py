"""HTTP chat service: /api/chat and /api/health on top of the engine.

Sessions are held in memory with idle expiry; the learn-write for each
exchange is persisted by the engine before the response goes out. Cross-origin
callers are checked against an allow list (the widget runs on another origin).
"""

from __future__ import annotations

import logging
import secrets
import sys
import threading
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from coursebot.engine import (
    DEFAULT_FALLBACK,
    DEFAULT_THRESHOLD,
    EngineConfig,
    LearnWriteFailed,
    SessionState,
    clean_whitespace,
    get_response,
)
from coursebot.storage import StatementStore, open_store

logger = logging.getLogger("coursebot.service")


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    db: Optional[str] = None
    similarity_threshold: float = DEFAULT_THRESHOLD
    fallback_response: str = DEFAULT_FALLBACK
    read_only: bool = False
    random_seed: Optional[int] = None
    allowed_origins: tuple[str, ...] = ("*",)
    max_input_length: int = 1000
    session_idle_minutes: float = 60.0

    def __post_init__(self) -> None:
        if not 1 <= self.port <= 65535:
            raise ValueError("port must be in [1, 65535]")
        if self.max_input_length < 1:
            raise ValueError("max_input_length must be at least 1")

    def engine_config(self) -> EngineConfig:
        return EngineConfig(
            similarity_threshold=self.similarity_threshold,
            fallback_response=self.fallback_response,
            read_only=self.read_only,
            random_seed=self.random_seed,
        )


class SessionRegistry:
    """Sessions keyed by token. Expired or unknown tokens silently become
    fresh sessions; per-session locks serialize same-session requests."""

    def __init__(self, idle_minutes: float) -> None:
        self._idle_seconds = idle_minutes * 60.0
        self._lock = threading.Lock()
        self._sessions: dict[str, tuple[SessionState, float, threading.Lock]] = {}

    def acquire(self, session_id: Optional[str]) -> tuple[SessionState, threading.Lock]:
        now = time.monotonic()
        with self._lock:
            self._purge(now)
            if not session_id:
                session_id = secrets.token_urlsafe(16)
            entry = self._sessions.get(session_id)
            if entry is None:
                entry = (SessionState(session_id=session_id), now, threading.Lock())
            self._sessions[session_id] = (entry[0], now, entry[2])
            return entry[0], entry[2]

    def _purge(self, now: float) -> None:
        dead = [
            sid
            for sid, (_, last_seen, _) in self._sessions.items()
            if now - last_seen >= self._idle_seconds
        ]
        for sid in dead:
            del self._sessions[sid]

    def __len__(self) -> int:
        with self._lock:
            return len(self._sessions)


class ChatIn(BaseModel):
    session_id: Optional[str] = None
    text: str


def _cors_headers(origin: str) -> dict[str, str]:
    return {
        "Access-Control-Allow-Origin": origin,
        "Access-Control-Allow-Methods": "GET, POST, OPTIONS",
        "Access-Control-Allow-Headers": "Content-Type",
        "Vary": "Origin",
    }


def _origin_allowed(origin: str, allowed: tuple[str, ...]) -> bool:
    return "*" in allowed or origin in allowed


def create_app(config: ServiceConfig, store: Optional[StatementStore] = None) -> FastAPI:
    """Build the service app. A store may be injected; otherwise config.db
    is opened (in-memory when unset)."""
    owned_store = store is None
    if store is None:
        store = open_store(config.db, read_only=config.read_only)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        if owned_store:
            store.close()

    app = FastAPI(title="coursebot", docs_url=None, redoc_url=None, lifespan=lifespan)
    app.state.config = config
    app.state.store = store
    app.state.engine_config = config.engine_config()
    app.state.registry = SessionRegistry(config.session_idle_minutes)
    app.state.started_at = time.monotonic()

    @app.exception_handler(RequestValidationError)
    async def invalid_request(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"error": "invalid request", "detail": str(exc.errors()[:1])},
        )

    @app.middleware("http")
    async def origin_guard_and_log(request: Request, call_next):
        origin = request.headers.get("origin")
        if origin is not None and not _origin_allowed(origin, config.allowed_origins):
            logger.info("%s %s -> 403 (origin %s)", request.method, request.url.path, origin)
            return JSONResponse(
                status_code=403,
                content={"error": "origin not allowed", "detail": origin},
            )
        if request.method == "OPTIONS" and origin is not None:
            return Response(status_code=204, headers=_cors_headers(origin))
        started = time.monotonic()
        response = await call_next(request)
        if origin is not None:
            for name, value in _cors_headers(origin).items():
                response.headers[name] = value
        logger.info(
            "%s %s -> %d (%.1f ms)",
            request.method,
            request.url.path,
            response.status_code,
            (time.monotonic() - started) * 1000,
        )
        return response

    @app.post("/api/chat")
    def chat(body: ChatIn):
        text = clean_whitespace(body.text)
        if not text:
            return JSONResponse(
                status_code=400,
                content={"error": "empty text", "detail": "text is empty after whitespace cleaning"},
            )
        if len(text) > config.max_input_length:
            return JSONResponse(
                status_code=400,
                content={
                    "error": "text too long",
                    "detail": f"max {config.max_input_length} characters",
                },
            )
        session, lock = app.state.registry.acquire(body.session_id)
        with lock:
            try:
                result = get_response(session, text, app.state.store, app.state.engine_config)
            except LearnWriteFailed as exc:
                logger.error("learn-write failed for session %s: %s", session.session_id, exc)
                return JSONResponse(
                    status_code=500,
                    content={"error": "store write failed", "detail": str(exc)},
                )
        return {
            "session_id": session.session_id,
            "response": result.text,
            "confidence": result.confidence,
            "is_fallback": result.is_fallback,
        }

    @app.get("/api/health")
    def health():
        store = app.state.store
        status = "ok"
        if store.path is not None and not Path(store.path).exists():
            status = "degraded"
        try:
            count = store.count_statements()
        except Exception:
            status = "degraded"
            count = 0
        return {
            "status": status,
            "statement_count": count,
            "uptime_seconds": time.monotonic() - app.state.started_at,
        }

    return app


def serve(config: ServiceConfig, store: Optional[StatementStore] = None) -> None:
    """Run the service until interrupted. Request log goes to stdout."""
    import uvicorn

    logging.basicConfig(
        stream=sys.stdout,
        level=logging.INFO,
        format="%(asctime)s %(name)s %(message)s",
    )
    app = create_app(config, store=store)
    uvicorn.run(app, host=config.host, port=config.port, access_log=False, log_level="info")


_CONFIG_KEYS = {
    "host",
    "port",
    "db",
    "threshold",
    "fallback",
    "read_only",
    "seed",
    "allowed_origins",
    "max_input_length",
    "session_idle_minutes",
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def parse_config_file(path: Union[str, Path]) -> dict[str, str]:
    """Read `key = value` lines; # starts a comment, blank lines ignored."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def _parse_bool(value: str) -> bool:
    lowered = value.lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ValueError(f"not a boolean: {value!r}")


def build_service_config(
    config_path: Optional[Union[str, Path]] = None, **overrides
) -> ServiceConfig:
    """ServiceConfig from an optional config file plus flag overrides
    (override keys mirror the file keys; None means not given)."""
    values: dict = {}
    if config_path is not None:
        raw = parse_config_file(config_path)
        if "host" in raw:
            values["host"] = raw["host"]
        if "port" in raw:
            values["port"] = int(raw["port"])
        if "db" in raw:
            values["db"] = raw["db"]
        if "threshold" in raw:
            values["similarity_threshold"] = float(raw["threshold"])
        if "fallback" in raw:
            values["fallback_response"] = raw["fallback"]
        if "read_only" in raw:
            values["read_only"] = _parse_bool(raw["read_only"])
        if "seed" in raw:
            values["random_seed"] = int(raw["seed"])
        if "allowed_origins" in raw:
            values["allowed_origins"] = tuple(
                o.strip() for o in raw["allowed_origins"].split(",") if o.strip()
            )
        if "max_input_length" in raw:
            values["max_input_length"] = int(raw["max_input_length"])
        if "session_idle_minutes" in raw:
            values["session_idle_minutes"] = float(raw["session_idle_minutes"])
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    return ServiceConfig(**values)
