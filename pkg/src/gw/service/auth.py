"""Password hashing and bearer-token sessions.

Passwords hash with scrypt (memory-hard) under a per-user random salt;
session tokens carry 128 bits of entropy and expire after a configurable
TTL.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
import threading
import time
from dataclasses import dataclass
from typing import Optional

_SCRYPT_N = 2**14
_SCRYPT_R = 8
_SCRYPT_P = 1

DEFAULT_SESSION_TTL = 8 * 3600.0


def hash_password(plain: str) -> str:
    salt = secrets.token_bytes(16)
    digest = hashlib.scrypt(plain.encode(), salt=salt,
                            n=_SCRYPT_N, r=_SCRYPT_R, p=_SCRYPT_P)
    return f"scrypt${salt.hex()}${digest.hex()}"


def verify_password(plain: str, stored: str) -> bool:
    try:
        scheme, salt_hex, digest_hex = stored.split("$")
        if scheme != "scrypt":
            return False
        digest = hashlib.scrypt(plain.encode(), salt=bytes.fromhex(salt_hex),
                                n=_SCRYPT_N, r=_SCRYPT_R, p=_SCRYPT_P)
        return hmac.compare_digest(digest.hex(), digest_hex)
    except (ValueError, TypeError):
        return False


@dataclass
class Session:
    token: str
    user: str
    expires: float


class SessionStore:
    def __init__(self, ttl: float = DEFAULT_SESSION_TTL):
        self.ttl = ttl
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, user: str) -> Session:
        token = secrets.token_hex(16)  # 128 bits
        session = Session(token=token, user=user, expires=time.time() + self.ttl)
        with self._lock:
            self._sessions[token] = session
        return session

    def lookup(self, token: str) -> Optional[Session]:
        with self._lock:
            session = self._sessions.get(token)
            if session is None:
                return None
            if session.expires < time.time():
                del self._sessions[token]
                return None
            return session

    def revoke(self, token: str) -> bool:
        with self._lock:
            return self._sessions.pop(token, None) is not None
