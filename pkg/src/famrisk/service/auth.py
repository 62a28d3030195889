"""Password hashing and bearer-token sessions.

Passwords are hashed with scrypt (memory-hard, salted per user) and only
the encoded hash is ever stored; verification is constant-time.  Session
tokens are opaque random strings with a server-side expiry, so a leaked
storage file cannot mint sessions.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
import time
from dataclasses import dataclass

from famrisk.errors import BadCredentials

# scrypt cost parameters; n is deliberately modest so the test suite can
# hash hundreds of passwords, still far beyond rainbow-table reach
_SCRYPT_N = 2**14
_SCRYPT_R = 8
_SCRYPT_P = 1

DEFAULT_TOKEN_TTL = 12 * 3600.0


def hash_password(password: str) -> str:
    if not password:
        raise BadCredentials("password must be non-empty")
    salt = secrets.token_bytes(16)
    digest = hashlib.scrypt(
        password.encode(), salt=salt,
        n=_SCRYPT_N, r=_SCRYPT_R, p=_SCRYPT_P,
    )
    return f"scrypt${_SCRYPT_N}${_SCRYPT_R}${_SCRYPT_P}${salt.hex()}${digest.hex()}"


def verify_password(password: str, encoded: str) -> bool:
    try:
        scheme, n, r, p, salt_hex, digest_hex = encoded.split("$")
        if scheme != "scrypt":
            return False
        digest = hashlib.scrypt(
            password.encode(), salt=bytes.fromhex(salt_hex),
            n=int(n), r=int(r), p=int(p),
        )
        return hmac.compare_digest(digest, bytes.fromhex(digest_hex))
    except (ValueError, TypeError):
        return False


@dataclass
class Session:
    token: str
    user_id: str
    expires_at: float


class Authenticator:
    """In-memory session table; tokens die with the process by design."""

    def __init__(self, token_ttl: float = DEFAULT_TOKEN_TTL):
        self.token_ttl = token_ttl
        self._sessions: dict[str, Session] = {}

    def issue(self, user_id: str) -> Session:
        token = secrets.token_urlsafe(32)
        session = Session(token, user_id, time.time() + self.token_ttl)
        self._sessions[token] = session
        return session

    def resolve(self, token: str | None) -> Session:
        """Session for a presented token, or BadCredentials."""
        if not token:
            raise BadCredentials("missing bearer token")
        session = self._sessions.get(token)
        if session is None or session.expires_at < time.time():
            self._sessions.pop(token, None)
            raise BadCredentials("invalid or expired token")
        return session

    def revoke(self, token: str):
        self._sessions.pop(token, None)
