"""
Main FastAPI application for impeq.
"""

import os
from typing import Any, Dict

import uvicorn
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from .. import __version__
from ..utils import setup_logging
from .endpoints import router

logger = setup_logging(__name__)


def create_app() -> FastAPI:
    """
    Create and configure the FastAPI application.

    Returns:
        FastAPI: Configured application instance
    """
    app = FastAPI(
        title="impeq",
        description="Checkers for equilibria of stochastic games under imprecise deviations",
        version=__version__,
        docs_url="/docs",
        redoc_url="/redoc",
        openapi_url="/openapi.json",
    )

    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )

    app.include_router(router, prefix="/api")

    @app.get("/health")
    async def health_check() -> Dict[str, Any]:
        """Health status."""
        return {"status": "healthy", "version": __version__, "service": "impeq API"}

    @app.get("/")
    async def root() -> Dict[str, str]:
        return {
            "message": "impeq equilibrium service",
            "docs": "/docs",
            "health": "/health",
        }

    logger.info("impeq API application created")
    return app


def run_api() -> None:
    """Serve the application with uvicorn (``IMPEQ_API_HOST``/``IMPEQ_API_PORT``)."""
    host = os.getenv("IMPEQ_API_HOST", "127.0.0.1")
    port = int(os.getenv("IMPEQ_API_PORT", "8000"))
    uvicorn.run(create_app(), host=host, port=port)
