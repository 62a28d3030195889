"""Persistence behind the service.

Two interchangeable stores: a zero-dependency file-backed store (default)
whose every acknowledged mutation is an atomic file replace, and a SQL
store for deployments that already run a database.  Records are plain
JSON-compatible dicts so both stores serialize the same bytes; neither
store interprets pedigree documents beyond their identifying keys.

Deletion is hard everywhere: a deleted pedigree's document, run records,
and notifications are removed from the backing files or rows, not
tombstoned.
"""

from __future__ import annotations

import json
import os
import threading
from abc import ABC, abstractmethod
from pathlib import Path

import sqlalchemy as sa

from famrisk.errors import DuplicateUser


class Storage(ABC):
    """CRUD over users, pedigree documents, run records, notifications."""

    # users ----------------------------------------------------------------

    @abstractmethod
    def create_user(self, record: dict) -> None:
        """Insert; raises DuplicateUser when the username is taken."""

    @abstractmethod
    def update_user(self, record: dict) -> None: ...

    @abstractmethod
    def get_user(self, user_id: str) -> dict | None: ...

    @abstractmethod
    def get_user_by_name(self, username: str) -> dict | None: ...

    @abstractmethod
    def count_users(self) -> int: ...

    # pedigrees ------------------------------------------------------------

    @abstractmethod
    def put_pedigree(self, user_id: str, doc: dict) -> None: ...

    @abstractmethod
    def get_pedigree(self, user_id: str, pedigree_id: str) -> dict | None: ...

    @abstractmethod
    def list_pedigrees(self, user_id: str) -> list[dict]: ...

    @abstractmethod
    def delete_pedigree(self, user_id: str, pedigree_id: str) -> bool: ...

    # runs -----------------------------------------------------------------

    @abstractmethod
    def put_run(self, record: dict) -> None: ...

    @abstractmethod
    def get_run(self, job_id: str) -> dict | None: ...

    @abstractmethod
    def list_runs(self, user_id: str) -> list[dict]: ...

    @abstractmethod
    def delete_runs_for_pedigree(
        self, user_id: str, pedigree_id: str
    ) -> list[str]:
        """Remove run records for one pedigree; returns deleted job ids."""

    # notifications ----------------------------------------------------------

    @abstractmethod
    def add_notification(self, record: dict) -> None: ...

    @abstractmethod
    def list_notifications(self, user_id: str) -> list[dict]: ...

    @abstractmethod
    def delete_notifications_for_jobs(self, job_ids: list[str]) -> None: ...


# ---------------------------------------------------------------- file store


def _atomic_write(path: Path, data: dict):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(data, sort_keys=True, indent=1))
    os.replace(tmp, path)


class FileStore(Storage):
    """Directory of JSON files; acknowledged writes are already on disk."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "pedigrees").mkdir(exist_ok=True)
        (self.root / "runs").mkdir(exist_ok=True)
        self._lock = threading.RLock()

    def _read(self, name: str) -> dict:
        path = self.root / name
        if not path.exists():
            return {}
        return json.loads(path.read_text())

    def _write(self, name: str, data: dict):
        _atomic_write(self.root / name, data)

    # users ----------------------------------------------------------------

    def create_user(self, record: dict):
        with self._lock:
            users = self._read("users.json")
            taken = any(
                u["username"] == record["username"] for u in users.values()
            )
            if taken:
                raise DuplicateUser(f"username {record['username']!r} taken")
            users[record["user_id"]] = record
            self._write("users.json", users)

    def update_user(self, record: dict):
        with self._lock:
            users = self._read("users.json")
            users[record["user_id"]] = record
            self._write("users.json", users)

    def get_user(self, user_id: str):
        with self._lock:
            return self._read("users.json").get(user_id)

    def get_user_by_name(self, username: str):
        with self._lock:
            for record in self._read("users.json").values():
                if record["username"] == username:
                    return record
        return None

    def count_users(self) -> int:
        with self._lock:
            return len(self._read("users.json"))

    # pedigrees ------------------------------------------------------------

    def _pedigree_path(self, user_id: str, pedigree_id: str) -> Path:
        safe = pedigree_id.replace("/", "_")
        return self.root / "pedigrees" / user_id / f"{safe}.json"

    def put_pedigree(self, user_id: str, doc: dict):
        with self._lock:
            path = self._pedigree_path(user_id, doc["pedigree_id"])
            path.parent.mkdir(parents=True, exist_ok=True)
            _atomic_write(path, doc)

    def get_pedigree(self, user_id: str, pedigree_id: str):
        with self._lock:
            path = self._pedigree_path(user_id, pedigree_id)
            if not path.exists():
                return None
            return json.loads(path.read_text())

    def list_pedigrees(self, user_id: str):
        with self._lock:
            folder = self.root / "pedigrees" / user_id
            if not folder.exists():
                return []
            docs = [json.loads(f.read_text()) for f in folder.glob("*.json")]
        return sorted(docs, key=lambda d: d["pedigree_id"])

    def delete_pedigree(self, user_id: str, pedigree_id: str) -> bool:
        with self._lock:
            path = self._pedigree_path(user_id, pedigree_id)
            if not path.exists():
                return False
            path.unlink()
            return True

    # runs -----------------------------------------------------------------

    def put_run(self, record: dict):
        with self._lock:
            _atomic_write(
                self.root / "runs" / f"{record['job_id']}.json", record
            )

    def get_run(self, job_id: str):
        with self._lock:
            path = self.root / "runs" / f"{job_id}.json"
            if not path.exists():
                return None
            return json.loads(path.read_text())

    def list_runs(self, user_id: str):
        with self._lock:
            records = [
                json.loads(f.read_text())
                for f in (self.root / "runs").glob("*.json")
            ]
        mine = [r for r in records if r["user_id"] == user_id]
        return sorted(mine, key=lambda r: r["enqueued_at"])

    def delete_runs_for_pedigree(self, user_id, pedigree_id):
        deleted = []
        with self._lock:
            for f in (self.root / "runs").glob("*.json"):
                record = json.loads(f.read_text())
                if (
                    record["user_id"] == user_id
                    and record["pedigree_id"] == pedigree_id
                ):
                    f.unlink()
                    deleted.append(record["job_id"])
        return deleted

    # notifications ----------------------------------------------------------

    def add_notification(self, record: dict):
        with self._lock:
            data = self._read("notifications.json")
            data[record["notification_id"]] = record
            self._write("notifications.json", data)

    def list_notifications(self, user_id: str):
        with self._lock:
            records = list(self._read("notifications.json").values())
        mine = [r for r in records if r["user_id"] == user_id]
        return sorted(mine, key=lambda r: r["created_at"], reverse=True)

    def delete_notifications_for_jobs(self, job_ids):
        wanted = set(job_ids)
        with self._lock:
            data = self._read("notifications.json")
            keep = {
                k: v for k, v in data.items() if v.get("job_id") not in wanted
            }
            if len(keep) != len(data):
                self._write("notifications.json", keep)


# ----------------------------------------------------------------- SQL store


class SQLStore(Storage):
    """Same contract on a SQL database (tested against SQLite)."""

    def __init__(self, url: str = "sqlite://"):
        self.engine = sa.create_engine(url)
        meta = sa.MetaData()
        self.users = sa.Table(
            "users", meta,
            sa.Column("user_id", sa.String, primary_key=True),
            sa.Column("username", sa.String, unique=True, nullable=False),
            sa.Column("record", sa.Text, nullable=False),
        )
        self.pedigrees = sa.Table(
            "pedigrees", meta,
            sa.Column("user_id", sa.String, primary_key=True),
            sa.Column("pedigree_id", sa.String, primary_key=True),
            sa.Column("doc", sa.Text, nullable=False),
        )
        self.runs = sa.Table(
            "runs", meta,
            sa.Column("job_id", sa.String, primary_key=True),
            sa.Column("user_id", sa.String, index=True),
            sa.Column("pedigree_id", sa.String),
            sa.Column("enqueued_at", sa.Float),
            sa.Column("record", sa.Text, nullable=False),
        )
        self.notifications = sa.Table(
            "notifications", meta,
            sa.Column("notification_id", sa.String, primary_key=True),
            sa.Column("user_id", sa.String, index=True),
            sa.Column("job_id", sa.String),
            sa.Column("created_at", sa.Float),
            sa.Column("record", sa.Text, nullable=False),
        )
        meta.create_all(self.engine)

    # users ----------------------------------------------------------------

    def create_user(self, record: dict):
        with self.engine.begin() as conn:
            row = conn.execute(
                sa.select(self.users.c.user_id).where(
                    self.users.c.username == record["username"]
                )
            ).first()
            if row is not None:
                raise DuplicateUser(f"username {record['username']!r} taken")
            conn.execute(self.users.insert().values(
                user_id=record["user_id"],
                username=record["username"],
                record=json.dumps(record),
            ))

    def update_user(self, record: dict):
        with self.engine.begin() as conn:
            conn.execute(
                self.users.update()
                .where(self.users.c.user_id == record["user_id"])
                .values(record=json.dumps(record))
            )

    def get_user(self, user_id: str):
        with self.engine.connect() as conn:
            row = conn.execute(
                sa.select(self.users.c.record).where(
                    self.users.c.user_id == user_id
                )
            ).first()
        return json.loads(row[0]) if row else None

    def get_user_by_name(self, username: str):
        with self.engine.connect() as conn:
            row = conn.execute(
                sa.select(self.users.c.record).where(
                    self.users.c.username == username
                )
            ).first()
        return json.loads(row[0]) if row else None

    def count_users(self) -> int:
        with self.engine.connect() as conn:
            return conn.execute(
                sa.select(sa.func.count()).select_from(self.users)
            ).scalar_one()

    # pedigrees ------------------------------------------------------------

    def put_pedigree(self, user_id: str, doc: dict):
        with self.engine.begin() as conn:
            update = (
                self.pedigrees.update()
                .where(self.pedigrees.c.user_id == user_id)
                .where(self.pedigrees.c.pedigree_id == doc["pedigree_id"])
                .values(doc=json.dumps(doc))
            )
            if conn.execute(update).rowcount == 0:
                conn.execute(self.pedigrees.insert().values(
                    user_id=user_id,
                    pedigree_id=doc["pedigree_id"],
                    doc=json.dumps(doc),
                ))

    def get_pedigree(self, user_id: str, pedigree_id: str):
        with self.engine.connect() as conn:
            row = conn.execute(
                sa.select(self.pedigrees.c.doc)
                .where(self.pedigrees.c.user_id == user_id)
                .where(self.pedigrees.c.pedigree_id == pedigree_id)
            ).first()
        return json.loads(row[0]) if row else None

    def list_pedigrees(self, user_id: str):
        with self.engine.connect() as conn:
            rows = conn.execute(
                sa.select(self.pedigrees.c.doc)
                .where(self.pedigrees.c.user_id == user_id)
                .order_by(self.pedigrees.c.pedigree_id)
            ).all()
        return [json.loads(r[0]) for r in rows]

    def delete_pedigree(self, user_id: str, pedigree_id: str) -> bool:
        with self.engine.begin() as conn:
            result = conn.execute(
                self.pedigrees.delete()
                .where(self.pedigrees.c.user_id == user_id)
                .where(self.pedigrees.c.pedigree_id == pedigree_id)
            )
        return result.rowcount > 0

    # runs -----------------------------------------------------------------

    def put_run(self, record: dict):
        with self.engine.begin() as conn:
            update = (
                self.runs.update()
                .where(self.runs.c.job_id == record["job_id"])
                .values(record=json.dumps(record))
            )
            if conn.execute(update).rowcount == 0:
                conn.execute(self.runs.insert().values(
                    job_id=record["job_id"],
                    user_id=record["user_id"],
                    pedigree_id=record["pedigree_id"],
                    enqueued_at=record["enqueued_at"],
                    record=json.dumps(record),
                ))

    def get_run(self, job_id: str):
        with self.engine.connect() as conn:
            row = conn.execute(
                sa.select(self.runs.c.record).where(
                    self.runs.c.job_id == job_id
                )
            ).first()
        return json.loads(row[0]) if row else None

    def list_runs(self, user_id: str):
        with self.engine.connect() as conn:
            rows = conn.execute(
                sa.select(self.runs.c.record)
                .where(self.runs.c.user_id == user_id)
                .order_by(self.runs.c.enqueued_at)
            ).all()
        return [json.loads(r[0]) for r in rows]

    def delete_runs_for_pedigree(self, user_id, pedigree_id):
        with self.engine.begin() as conn:
            rows = conn.execute(
                sa.select(self.runs.c.job_id)
                .where(self.runs.c.user_id == user_id)
                .where(self.runs.c.pedigree_id == pedigree_id)
            ).all()
            job_ids = [r[0] for r in rows]
            if job_ids:
                conn.execute(
                    self.runs.delete().where(self.runs.c.job_id.in_(job_ids))
                )
        return job_ids

    # notifications ----------------------------------------------------------

    def add_notification(self, record: dict):
        with self.engine.begin() as conn:
            conn.execute(self.notifications.insert().values(
                notification_id=record["notification_id"],
                user_id=record["user_id"],
                job_id=record.get("job_id"),
                created_at=record["created_at"],
                record=json.dumps(record),
            ))

    def list_notifications(self, user_id: str):
        with self.engine.connect() as conn:
            rows = conn.execute(
                sa.select(self.notifications.c.record)
                .where(self.notifications.c.user_id == user_id)
                .order_by(self.notifications.c.created_at.desc())
            ).all()
        return [json.loads(r[0]) for r in rows]

    def delete_notifications_for_jobs(self, job_ids):
        if not job_ids:
            return
        with self.engine.begin() as conn:
            conn.execute(
                self.notifications.delete().where(
                    self.notifications.c.job_id.in_(list(job_ids))
                )
            )
