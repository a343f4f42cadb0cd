"""
API module for impeq.

This module contains the FastAPI service exposing validation, analysis,
evaluation and equilibrium checks.
"""

from .main import create_app
from .endpoints import router

__all__ = ["create_app", "router"]
