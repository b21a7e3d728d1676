"""HTTP data surface: authentication, queries, jobs, MyDB, schema browsing."""

from .app import ApiError, create_app, job_view
from .auth import SessionStore, hash_password, verify_password

__all__ = ["ApiError", "create_app", "job_view",
           "SessionStore", "hash_password", "verify_password"]
