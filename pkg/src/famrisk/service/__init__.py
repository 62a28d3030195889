"""Multi-user persistence, authentication, the run queue, and the HTTP
JSON API consumed by the browser UI and the CLI."""

from famrisk.service.app import create_app
from famrisk.service.auth import Authenticator, hash_password, verify_password
from famrisk.service.queue import RunQueue
from famrisk.service.storage import FileStore, SQLStore, Storage

__all__ = [
    "Authenticator",
    "FileStore",
    "RunQueue",
    "SQLStore",
    "Storage",
    "create_app",
    "hash_password",
    "verify_password",
]
