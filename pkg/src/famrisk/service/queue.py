"""FIFO run queue with a fixed worker pool and calibrated wait estimates.

Predicted duration of a job scales with member count x genotype-state
count x imputation count; the scale factor is calibrated by an
exponential moving average over completed jobs, so estimates track the
host machine.  The wait estimate for a job is the predicted work of
everything ahead of it divided by the worker count, plus its own
predicted duration.

Completion writes a notification record (and fires the optional webhook,
best effort) before the job flips to done, giving at-least-once delivery.
"""

from __future__ import annotations

import threading
import time
import uuid
from collections import deque
from dataclasses import asdict
from typing import Callable

from famrisk.engine import RunSettings, build_state_space, run_model
from famrisk.errors import FamriskError, NotFound, QuotaExceeded
from famrisk.kb import KnowledgeBase
from famrisk.pedigree import pedigree_from_dict
from famrisk.service.storage import Storage

#: starting seconds per (member x state x table) work unit
_INITIAL_RATE = 3e-5
_EMA_WEIGHT = 0.3
_MIN_PREDICTED = 0.02


def _new_id(prefix: str) -> str:
    return f"{prefix}-{uuid.uuid4().hex[:12]}"


class RunQueue:
    """Jobs start strictly in enqueue order whenever a worker is free."""

    def __init__(
        self,
        storage: Storage,
        kb: KnowledgeBase,
        workers: int = 2,
        job_quota: int = 4,
        webhook: Callable[[dict], None] | None = None,
    ):
        self.storage = storage
        self.kb = kb
        self.workers = max(1, workers)
        self.job_quota = job_quota
        self.webhook = webhook
        self._cond = threading.Condition()
        self._pending: deque[str] = deque()
        self._running: dict[str, float] = {}  # job id -> started monotonic
        self._rate = _INITIAL_RATE
        self._stopping = False
        self._threads = [
            threading.Thread(target=self._worker, daemon=True)
            for _ in range(self.workers)
        ]
        for t in self._threads:
            t.start()

    # sizing -----------------------------------------------------------------

    def predicted_seconds(self, settings: RunSettings, member_count: int) -> float:
        resolved = settings.resolve(self.kb)
        states = len(build_state_space(resolved))
        units = member_count * states * resolved.imputations
        with self._cond:
            rate = self._rate
        return max(_MIN_PREDICTED, rate * units)

    # queue ops ----------------------------------------------------------------

    def enqueue(
        self, user_id: str, pedigree_doc: dict, settings: RunSettings
    ) -> dict:
        active = sum(
            1
            for r in self.storage.list_runs(user_id)
            if r["status"] in ("queued", "running")
        )
        if active >= self.job_quota:
            raise QuotaExceeded(
                f"at most {self.job_quota} queued or running jobs per user"
            )
        predicted = self.predicted_seconds(
            settings, len(pedigree_doc["members"])
        )
        record = {
            "schema": 1,
            "job_id": _new_id("job"),
            "user_id": user_id,
            "pedigree_id": pedigree_doc["pedigree_id"],
            "pedigree_revision": pedigree_doc["revision"],
            "pedigree_doc": pedigree_doc,
            "settings": asdict(settings),
            "status": "queued",
            "enqueued_at": time.time(),
            "started_at": None,
            "finished_at": None,
            "predicted_seconds": predicted,
            "result": None,
            "error": None,
        }
        self.storage.put_run(record)
        with self._cond:
            self._pending.append(record["job_id"])
            self._cond.notify()
        return record

    def estimate_seconds(self, job_id: str) -> float | None:
        """Expected wait until completion; None once the job finished."""
        record = self.storage.get_run(job_id)
        if record is None:
            raise NotFound(f"no job {job_id}")
        if record["status"] in ("done", "failed"):
            return None
        with self._cond:
            ahead = 0.0
            now = time.monotonic()
            for running_id, started in self._running.items():
                if running_id == job_id:
                    return record["predicted_seconds"]
                run_rec = self.storage.get_run(running_id)
                if run_rec is not None:
                    left = run_rec["predicted_seconds"] - (now - started)
                    ahead += max(0.0, left)
            for pending_id in self._pending:
                if pending_id == job_id:
                    break
                pending_rec = self.storage.get_run(pending_id)
                if pending_rec is not None:
                    ahead += pending_rec["predicted_seconds"]
        return ahead / self.workers + record["predicted_seconds"]

    def drain(self, timeout: float = 60.0):
        """Block until nothing is queued or running (tests, shutdown)."""
        deadline = time.monotonic() + timeout
        with self._cond:
            while self._pending or self._running:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise TimeoutError("queue did not drain in time")
                self._cond.wait(remaining)

    def stop(self):
        with self._cond:
            self._stopping = True
            self._cond.notify_all()
        for t in self._threads:
            t.join(timeout=5)

    # worker -----------------------------------------------------------------

    def _worker(self):
        while True:
            with self._cond:
                while not self._pending and not self._stopping:
                    self._cond.wait()
                if self._stopping:
                    return
                job_id = self._pending.popleft()
                self._running[job_id] = time.monotonic()
            try:
                self._execute(job_id)
            finally:
                with self._cond:
                    self._running.pop(job_id, None)
                    self._cond.notify_all()

    def _execute(self, job_id: str):
        record = self.storage.get_run(job_id)
        if record is None:  # pedigree deleted while queued
            return
        record["status"] = "running"
        record["started_at"] = time.time()
        self.storage.put_run(record)

        started = time.monotonic()
        try:
            pedigree = pedigree_from_dict(record["pedigree_doc"])
            settings = RunSettings.from_dict(record["settings"])
            result = run_model(pedigree, self.kb, settings)
        except FamriskError as exc:
            record["status"] = "failed"
            record["error"] = {"code": exc.wire_code, "message": str(exc)}
            record["finished_at"] = time.time()
            self._notify(record, "run_failed", str(exc))
            self.storage.put_run(record)
            return

        duration = time.monotonic() - started
        self._calibrate(record, duration)
        record["status"] = "done"
        record["result"] = result.to_dict()
        record["finished_at"] = time.time()
        self._notify(record, "run_completed", "results are ready")
        self.storage.put_run(record)

    def _calibrate(self, record: dict, duration: float):
        settings = RunSettings.from_dict(record["settings"])
        resolved = settings.resolve(self.kb)
        states = len(build_state_space(resolved))
        units = len(record["pedigree_doc"]["members"]) * states
        units *= resolved.imputations
        observed = duration / max(1, units)
        with self._cond:
            self._rate += _EMA_WEIGHT * (observed - self._rate)

    def _notify(self, record: dict, kind: str, message: str):
        note = {
            "schema": 1,
            "notification_id": _new_id("note"),
            "user_id": record["user_id"],
            "job_id": record["job_id"],
            "kind": kind,
            "message": (
                f"run {record['job_id']} on pedigree "
                f"{record['pedigree_id']}: {message}"
            ),
            "created_at": time.time(),
            "read": False,
        }
        self.storage.add_notification(note)
        if self.webhook is not None:
            try:
                self.webhook(dict(note))
            except Exception:
                pass  # delivery is best effort; the record already persists
