"""FastAPI service layer: pydantic schemas and the HTTP app."""

from .app import app, create_app

__all__ = ["app", "create_app"]
