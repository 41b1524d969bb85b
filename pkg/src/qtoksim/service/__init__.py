"""HTTP service wrapping the simulator; the CLI drives the same handlers."""

from .app import app, create_app

__all__ = ["app", "create_app"]
