"""HTTP service wrapping the discovery engine."""

from moose.service.app import create_app

__all__ = ["create_app"]
