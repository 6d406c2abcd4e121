"""coursebot: retrieval-based educational chatbot.

Engine, storage backends, corpus trainers, a page scraper, a database merge
tool, and an HTTP chat service.
"""

from coursebot.storage import (
    ABSENT,
    CorruptFile,
    FilterCriteria,
    MemoryStore,
    SchemaMismatch,
    SqliteStore,
    Statement,
    StatementStore,
    StorageError,
    StoreWriteFailure,
    open_store,
)

__all__ = [
    "ABSENT",
    "CorruptFile",
    "FilterCriteria",
    "MemoryStore",
    "SchemaMismatch",
    "SqliteStore",
    "Statement",
    "StatementStore",
    "StorageError",
    "StoreWriteFailure",
    "open_store",
]

__version__ = "0.1.0"
