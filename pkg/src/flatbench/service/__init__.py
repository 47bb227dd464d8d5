"""HTTP session API around the flattening loop."""

from .app import create_app

__all__ = ["create_app"]
