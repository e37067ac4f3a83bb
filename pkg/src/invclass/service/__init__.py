"""HTTP front end exposing model registration, single solves, and lambda paths."""

from .app import app, create_app

__all__ = ["app", "create_app"]
