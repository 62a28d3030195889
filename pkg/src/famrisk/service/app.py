"""HTTP JSON API over storage, auth, the queue, and the report builders.

Every error body is ``{"code", "message"}`` with the code drawn from the
shared exception taxonomy.  Authorization is total by construction: each
handler resolves the acting user, then one of the two gate helpers
(read-level or mutate-level) decides owner/manager/admin access, so every
endpoint x role combination takes a defined branch.

Pedigree ids live in a per-account namespace.  Managers and admins reach
another account's data by passing ``?owner=<user_id>``; managers get
read-level access only, so every mutating endpoint refuses them.  One
mutating session holds a pedigree's lock at a time (taken on first
mutation, refreshed on each, expiring after ``lock_ttl`` seconds).
"""

from __future__ import annotations

import threading
import time
import uuid

from fastapi import Body, Depends, FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from famrisk.engine import RunSettings
from famrisk.engine.runner import RunResult
from famrisk.errors import (
    BadCredentials,
    Conflict,
    DuplicatePedigreeId,
    FamriskError,
    Forbidden,
    LockHeld,
    NotFound,
    NotReady,
    ValidationFailed,
)
from famrisk.kb import KnowledgeBase
from famrisk.pedigree import (
    member_patch_from_dict,
    pedigree_from_dict,
    pedigree_to_dict,
    update_individual,
    validate_pedigree,
)
from famrisk.report import build_pedigree_bundle, build_run_bundle
from famrisk.service.auth import (
    DEFAULT_TOKEN_TTL,
    Authenticator,
    hash_password,
    verify_password,
)
from famrisk.service.queue import RunQueue
from famrisk.service.storage import Storage

API_SCHEMA = 1

ROLES = ("user", "manager", "admin")

_HTTP_STATUS = {
    "BadCredentials": 401,
    "Forbidden": 403,
    "NotFound": 404,
    "UnknownIndividual": 404,
    "DuplicateUser": 409,
    "DuplicatePedigreeId": 409,
    "Conflict": 409,
    "NotReady": 409,
    "ValidationFailed": 422,
    "LockHeld": 423,
    "QuotaExceeded": 429,
}


class Credentials(BaseModel):
    username: str
    password: str


class RoleChange(BaseModel):
    role: str
    managed_user_ids: list[str] = []


class CopyRequest(BaseModel):
    new_id: str


class MemberPatch(BaseModel):
    base_revision: int
    patch: dict


class RunRequest(BaseModel):
    pedigree_id: str
    settings: dict = {}


def _summary(doc: dict) -> dict:
    return {
        "pedigree_id": doc["pedigree_id"],
        "revision": doc["revision"],
        "proband_id": doc["proband_id"],
        "member_count": len(doc["members"]),
    }


def _job_view(record: dict, estimate: float | None) -> dict:
    view = {
        k: record[k]
        for k in (
            "schema", "job_id", "user_id", "pedigree_id",
            "pedigree_revision", "settings", "status",
            "enqueued_at", "started_at", "finished_at", "error",
        )
    }
    view["estimate_seconds"] = estimate
    return view


def create_app(
    storage: Storage,
    kb: KnowledgeBase,
    *,
    workers: int = 2,
    job_quota: int = 8,
    token_ttl: float = DEFAULT_TOKEN_TTL,
    lock_ttl: float = 900.0,
    webhook=None,
) -> FastAPI:
    app = FastAPI(title="famrisk service")
    auth = Authenticator(token_ttl=token_ttl)
    queue = RunQueue(
        storage, kb, workers=workers, job_quota=job_quota, webhook=webhook
    )
    app.state.storage = storage
    app.state.kb = kb
    app.state.queue = queue
    app.state.auth = auth

    locks: dict[tuple[str, str], tuple[str, float]] = {}
    locks_guard = threading.Lock()

    @app.exception_handler(FamriskError)
    async def famrisk_error(request: Request, exc: FamriskError):
        body = {"code": exc.wire_code, "message": str(exc)}
        report = getattr(exc, "report", None)
        if report is not None:
            body["details"] = report.lines()
        return JSONResponse(
            body, status_code=_HTTP_STATUS.get(exc.wire_code, 400)
        )

    @app.exception_handler(RequestValidationError)
    async def bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse(
            {"code": "BadRequest", "message": str(exc)}, status_code=400
        )

    # auth helpers ---------------------------------------------------------

    def current_user(request: Request) -> dict:
        header = request.headers.get("authorization", "")
        token = header.removeprefix("Bearer ").strip()
        session = auth.resolve(token or None)
        user = storage.get_user(session.user_id)
        if user is None:
            raise BadCredentials("account no longer exists")
        user = dict(user)
        user["token"] = session.token
        return user

    def _manages(actor: dict, owner_id: str) -> bool:
        return (
            actor["role"] == "manager"
            and owner_id in actor.get("managed_user_ids", [])
        )

    def read_scope(actor: dict, owner: str | None) -> str:
        """Owner id the actor may read; managers see managed accounts."""
        if owner is None or owner == actor["user_id"]:
            return actor["user_id"]
        if actor["role"] == "admin" or _manages(actor, owner):
            return owner
        raise Forbidden(f"no read access to account {owner}")

    def mutate_scope(actor: dict, owner: str | None) -> str:
        """Owner id the actor may mutate; managers are read-only."""
        if owner is None or owner == actor["user_id"]:
            return actor["user_id"]
        if actor["role"] == "admin":
            return owner
        if _manages(actor, owner):
            raise Forbidden("manager access is read-only")
        raise Forbidden(f"no access to account {owner}")

    def checkout(owner_id: str, pedigree_id: str, token: str):
        """Take or refresh the single-mutator lock for a pedigree."""
        key = (owner_id, pedigree_id)
        now = time.monotonic()
        with locks_guard:
            held = locks.get(key)
            if held is not None:
                holder, taken = held
                if holder != token and now - taken < lock_ttl:
                    raise LockHeld(
                        f"pedigree {pedigree_id} is being edited in "
                        "another session"
                    )
            locks[key] = (token, now)

    def release(owner_id: str, pedigree_id: str):
        with locks_guard:
            locks.pop((owner_id, pedigree_id), None)

    def fetch_doc(owner_id: str, pedigree_id: str) -> dict:
        doc = storage.get_pedigree(owner_id, pedigree_id)
        if doc is None:
            raise NotFound(f"no pedigree {pedigree_id}")
        return doc

    # auth endpoints ---------------------------------------------------------

    @app.post("/auth/register")
    def register(credentials: Credentials):
        # first account bootstraps the administrator
        role = "admin" if storage.count_users() == 0 else "user"
        record = {
            "schema": API_SCHEMA,
            "user_id": f"user-{uuid.uuid4().hex[:12]}",
            "username": credentials.username,
            "password_hash": hash_password(credentials.password),
            "role": role,
            "managed_user_ids": [],
        }
        storage.create_user(record)
        return {
            "schema": API_SCHEMA,
            "user_id": record["user_id"],
            "role": role,
        }

    @app.post("/auth/login")
    def login(credentials: Credentials):
        user = storage.get_user_by_name(credentials.username)
        if user is None or not verify_password(
            credentials.password, user["password_hash"]
        ):
            raise BadCredentials("unknown user or wrong password")
        session = auth.issue(user["user_id"])
        return {
            "schema": API_SCHEMA,
            "token": session.token,
            "user_id": user["user_id"],
            "role": user["role"],
            "expires_at": session.expires_at,
        }

    @app.post("/users/{user_id}/role")
    def set_role(
        user_id: str,
        change: RoleChange,
        actor: dict = Depends(current_user),
    ):
        if actor["role"] != "admin":
            raise Forbidden("only the administrator assigns roles")
        if change.role not in ROLES:
            raise ValidationFailed(f"role must be one of {ROLES}")
        user = storage.get_user(user_id)
        if user is None:
            raise NotFound(f"no user {user_id}")
        user = dict(user)
        user["role"] = change.role
        user["managed_user_ids"] = list(change.managed_user_ids)
        storage.update_user(user)
        return {
            "schema": API_SCHEMA,
            "user_id": user_id,
            "role": user["role"],
            "managed_user_ids": user["managed_user_ids"],
        }

    # pedigree endpoints -----------------------------------------------------

    @app.get("/pedigrees")
    def list_pedigrees(actor: dict = Depends(current_user)):
        docs = storage.list_pedigrees(actor["user_id"])
        return {"schema": API_SCHEMA, "pedigrees": [_summary(d) for d in docs]}

    @app.post("/pedigrees", status_code=201)
    def create_pedigree_doc(
        doc: dict = Body(...), actor: dict = Depends(current_user)
    ):
        pedigree = pedigree_from_dict(doc)  # parse = validate shape
        if storage.get_pedigree(actor["user_id"], pedigree.pedigree_id):
            raise DuplicatePedigreeId(
                f"pedigree {pedigree.pedigree_id!r} already exists"
            )
        canonical = pedigree_to_dict(pedigree)
        storage.put_pedigree(actor["user_id"], canonical)
        return _summary(canonical) | {"schema": API_SCHEMA}

    @app.get("/pedigrees/{pedigree_id}")
    def get_pedigree_doc(
        pedigree_id: str,
        owner: str | None = None,
        actor: dict = Depends(current_user),
    ):
        return fetch_doc(read_scope(actor, owner), pedigree_id)

    @app.put("/pedigrees/{pedigree_id}")
    def put_pedigree_doc(
        pedigree_id: str,
        doc: dict = Body(...),
        owner: str | None = None,
        actor: dict = Depends(current_user),
    ):
        owner_id = mutate_scope(actor, owner)
        pedigree = pedigree_from_dict(doc)
        if pedigree.pedigree_id != pedigree_id:
            raise ValidationFailed("document id does not match the URL")
        stored = fetch_doc(owner_id, pedigree_id)
        if pedigree.revision <= stored["revision"]:
            raise Conflict(
                f"stale revision {pedigree.revision}; "
                f"server has {stored['revision']}"
            )
        checkout(owner_id, pedigree_id, actor["token"])
        canonical = pedigree_to_dict(pedigree)
        storage.put_pedigree(owner_id, canonical)
        return _summary(canonical) | {"schema": API_SCHEMA}

    @app.patch("/pedigrees/{pedigree_id}/members/{member_id}")
    def patch_member(
        pedigree_id: str,
        member_id: int,
        body: MemberPatch,
        owner: str | None = None,
        actor: dict = Depends(current_user),
    ):
        owner_id = mutate_scope(actor, owner)
        stored = fetch_doc(owner_id, pedigree_id)
        if body.base_revision != stored["revision"]:
            raise Conflict(
                f"stale revision {body.base_revision}; "
                f"server has {stored['revision']}"
            )
        checkout(owner_id, pedigree_id, actor["token"])
        pedigree = pedigree_from_dict(stored)
        patch = member_patch_from_dict(body.patch)
        updated = update_individual(pedigree, member_id, kb, **patch)
        canonical = pedigree_to_dict(updated)
        storage.put_pedigree(owner_id, canonical)
        return _summary(canonical) | {"schema": API_SCHEMA}

    @app.post("/pedigrees/{pedigree_id}/copy", status_code=201)
    def copy_pedigree(
        pedigree_id: str,
        body: CopyRequest,
        actor: dict = Depends(current_user),
    ):
        owner_id = actor["user_id"]
        stored = fetch_doc(owner_id, pedigree_id)
        if storage.get_pedigree(owner_id, body.new_id):
            raise DuplicatePedigreeId(
                f"pedigree {body.new_id!r} already exists"
            )
        copy = dict(stored)
        copy["pedigree_id"] = body.new_id
        copy["revision"] = 1
        pedigree_from_dict(copy)  # sanity: the copy still parses
        storage.put_pedigree(owner_id, copy)
        return _summary(copy) | {"schema": API_SCHEMA}

    @app.delete("/pedigrees/{pedigree_id}")
    def delete_pedigree(
        pedigree_id: str,
        owner: str | None = None,
        actor: dict = Depends(current_user),
    ):
        owner_id = mutate_scope(actor, owner)
        if not storage.delete_pedigree(owner_id, pedigree_id):
            raise NotFound(f"no pedigree {pedigree_id}")
        job_ids = storage.delete_runs_for_pedigree(owner_id, pedigree_id)
        storage.delete_notifications_for_jobs(job_ids)
        release(owner_id, pedigree_id)
        return {
            "schema": API_SCHEMA,
            "deleted": pedigree_id,
            "runs_deleted": job_ids,
        }

    @app.get("/pedigrees/{pedigree_id}/bundle")
    def pedigree_bundle(
        pedigree_id: str,
        owner: str | None = None,
        actor: dict = Depends(current_user),
    ):
        doc = fetch_doc(read_scope(actor, owner), pedigree_id)
        blob = build_pedigree_bundle(pedigree_from_dict(doc), kb)
        return Response(
            content=blob,
            media_type="application/zip",
            headers={
                "Content-Disposition":
                    f'attachment; filename="{pedigree_id}.zip"'
            },
        )

    # run endpoints ----------------------------------------------------------

    def readable_job(job_id: str, actor: dict) -> dict:
        record = storage.get_run(job_id)
        if record is None:
            raise NotFound(f"no job {job_id}")
        if record["user_id"] != actor["user_id"]:
            if actor["role"] != "admin" and not _manages(
                actor, record["user_id"]
            ):
                raise Forbidden("not your job")
        return record

    @app.post("/runs", status_code=201)
    def enqueue_run(body: RunRequest, actor: dict = Depends(current_user)):
        doc = storage.get_pedigree(actor["user_id"], body.pedigree_id)
        if doc is None:
            raise ValidationFailed(
                f"pedigree {body.pedigree_id!r} does not exist"
            )
        settings = RunSettings.from_dict(body.settings)
        settings.resolve(kb)  # fail fast on unknown genes/cancers
        pedigree = pedigree_from_dict(doc)
        report = validate_pedigree(pedigree, kb)
        if report.blocking:
            raise ValidationFailed(
                "pedigree has blocking validation errors", report=report
            )
        record = queue.enqueue(actor["user_id"], doc, settings)
        return _job_view(record, queue.estimate_seconds(record["job_id"]))

    @app.get("/runs/{job_id}")
    def run_status(job_id: str, actor: dict = Depends(current_user)):
        record = readable_job(job_id, actor)
        return _job_view(record, queue.estimate_seconds(job_id))

    @app.get("/runs/{job_id}/result")
    def run_result(job_id: str, actor: dict = Depends(current_user)):
        record = readable_job(job_id, actor)
        if record["status"] in ("queued", "running"):
            raise NotReady(f"job is {record['status']}")
        if record["status"] == "failed":
            error = record["error"] or {}
            exc = FamriskError(error.get("message", "run failed"))
            exc.code = error.get("code", "EngineError")
            raise exc
        return record["result"]

    @app.get("/runs/{job_id}/bundle")
    def run_bundle(job_id: str, actor: dict = Depends(current_user)):
        record = readable_job(job_id, actor)
        if record["status"] != "done":
            raise NotReady(f"job is {record['status']}")
        result = RunResult.from_dict(record["result"])
        pedigree = pedigree_from_dict(record["pedigree_doc"])
        blob = build_run_bundle(result, pedigree, kb)
        return Response(
            content=blob,
            media_type="application/zip",
            headers={
                "Content-Disposition":
                    f'attachment; filename="{job_id}.zip"'
            },
        )

    # notifications and manager views ------------------------------------------

    @app.get("/notifications")
    def notifications(actor: dict = Depends(current_user)):
        return {
            "schema": API_SCHEMA,
            "notifications": storage.list_notifications(actor["user_id"]),
        }

    @app.get("/users/{user_id}/pedigrees")
    def pedigrees_of(user_id: str, actor: dict = Depends(current_user)):
        owner_id = read_scope(actor, user_id)
        return {
            "schema": API_SCHEMA,
            "owner": owner_id,
            "pedigrees": storage.list_pedigrees(owner_id),
        }

    @app.on_event("shutdown")
    def shutdown():
        queue.stop()

    return app
