"""HTTP service: ``uvicorn chflow.service:app`` serves the solver."""

from .app import app

__all__ = ["app"]
